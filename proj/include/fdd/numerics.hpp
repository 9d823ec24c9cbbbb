#pragma once

// Scalar numerics shared by every module: error types, weighted moments,
// log-sum-exp, and the bracketed 1-D searches (golden section, bisection).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fdd {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the conjugate domain, negative weights, bad kinds.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A 1-D search hit its iteration cap.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// A concave objective kept improving past the last bracket expansion.
class UnboundedError : public Error {
 public:
  UnboundedError(const std::string& what, double lo, double hi)
      : Error(what), last_lo(lo), last_hi(hi) {}
  double last_lo;
  double last_hi;
};

// Zero variance where a ratio needs it.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline double weighted_mean(std::span<const double> values, std::span<const double> weights) {
  double s = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) s += weights[i] * values[i];
  return s;
}

// Population variance under the weights, computed around the mean.
inline double weighted_variance(std::span<const double> values, std::span<const double> weights) {
  const double m = weighted_mean(values, weights);
  double s = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - m;
    s += weights[i] * d * d;
  }
  return s;
}

// log sum_i w_i exp(a_i), ignoring atoms with zero weight.
inline double log_sum_exp(std::span<const double> args, std::span<const double> weights) {
  double hi = -kInf;
  for (std::size_t i = 0; i < args.size(); ++i)
    if (weights[i] > 0.0) hi = std::max(hi, args[i]);
  if (hi == -kInf) return -kInf;
  if (hi == kInf) return kInf;
  double s = 0.0;
  for (std::size_t i = 0; i < args.size(); ++i)
    if (weights[i] > 0.0) s += weights[i] * std::exp(args[i] - hi);
  return hi + std::log(s);
}

// log E_w[exp(scale * v)]
inline double log_mean_exp(std::span<const double> values, std::span<const double> weights,
                           double scale = 1.0) {
  std::vector<double> a(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) a[i] = scale * values[i];
  return log_sum_exp(a, weights);
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

struct SearchOptions {
  double tolerance = 1e-10;
  int max_iterations = 200;
  int max_doublings = 8;
};

struct SearchResult {
  double x = 0.0;
  double value = 0.0;
  int iterations = 0;
  bool at_lower = false;  // optimum sits on a hard lower limit
  bool at_upper = false;  // optimum sits on a hard upper limit
};

// Golden-section maximization of a unimodal function on [lo, hi].
inline SearchResult golden_section_max(const std::function<double(double)>& f, double lo, double hi,
                                       const SearchOptions& opt = {}) {
  static const double kInvPhi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = f(c), fd = f(d);
  int it = 0;
  while (b - a > opt.tolerance) {
    if (++it > opt.max_iterations)
      throw ConvergenceError("golden-section search exceeded " +
                             std::to_string(opt.max_iterations) + " iterations");
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
    }
  }
  SearchResult r;
  r.iterations = it;
  // Endpoints are candidates too: the optimum of a monotone map sits on them.
  const double fa = f(lo), fb = f(hi);
  r.x = fc >= fd ? c : d;
  r.value = std::max(fc, fd);
  if (fa > r.value) {
    r.x = lo;
    r.value = fa;
  }
  if (fb > r.value) {
    r.x = hi;
    r.value = fb;
  }
  return r;
}

inline SearchResult golden_section_min(const std::function<double(double)>& f, double lo, double hi,
                                       const SearchOptions& opt = {}) {
  auto r = golden_section_max([&](double x) { return -f(x); }, lo, hi, opt);
  r.value = -r.value;
  return r;
}

// Maximizes a concave function starting from [lo, hi]. A side whose optimum
// lands on the bracket edge is doubled, up to opt.max_doublings times, unless
// that side is pinned by a hard limit (lower_limit / upper_limit), in which
// case sitting on the edge is a legitimate constrained optimum.
inline SearchResult maximize_concave(const std::function<double(double)>& f, double lo, double hi,
                                     double lower_limit = -kInf, double upper_limit = kInf,
                                     const SearchOptions& opt = {}) {
  lo = std::max(lo, lower_limit);
  hi = std::min(hi, upper_limit);
  for (int doubling = 0;; ++doubling) {
    SearchResult r = golden_section_max(f, lo, hi, opt);
    const double edge = 1e-7 * std::max(1.0, hi - lo);
    const bool on_lo = r.x - lo <= edge;
    const bool on_hi = hi - r.x <= edge;
    const bool lo_pinned = lo <= lower_limit;
    const bool hi_pinned = hi >= upper_limit;
    if ((!on_lo || lo_pinned) && (!on_hi || hi_pinned)) {
      r.at_lower = on_lo && lo_pinned;
      r.at_upper = on_hi && hi_pinned;
      return r;
    }
    if (doubling == opt.max_doublings)
      throw UnboundedError("objective still increasing at the bracket edge after " +
                               std::to_string(opt.max_doublings) + " doublings",
                           lo, hi);
    const double width = hi - lo;
    if (on_lo && !lo_pinned) lo = std::max(lower_limit, lo - width);
    if (on_hi && !hi_pinned) hi = std::min(upper_limit, hi + width);
  }
}

// Largest x in [lo, hi] with pred(x) true, assuming pred is true on a prefix
// of the interval (true at lo). Bisection to an absolute tolerance.
inline double bisect_boundary(const std::function<bool(double)>& pred, double lo, double hi,
                              double tolerance = 1e-9, int max_iterations = 400) {
  if (pred(hi)) return hi;
  for (int i = 0; i < max_iterations && hi - lo > tolerance; ++i) {
    const double mid = 0.5 * (lo + hi);
    (pred(mid) ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace fdd
