#pragma once

// Variational lower bounds on f-divergences evaluated at a fixed witness g:
//
//   lt       E_P[g] - E_Q[phi*(g)]
//   shifted  E_P[g] - inf_a { E_Q[phi*(g + a)] - a }
//   scaled   sup_t shifted(t * g)
//
// Witnesses are given by their values on the atoms (or samples) of P and Q
// together with the atom weights.

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "fdd/numerics.hpp"
#include "fdd/phi.hpp"

namespace fdd {

struct WitnessValues {
  std::vector<double> on_p;
  std::vector<double> weights_p;
  std::vector<double> on_q;
  std::vector<double> weights_q;

  void validate() const {
    check_side(on_p, weights_p, "P");
    check_side(on_q, weights_q, "Q");
  }

  WitnessValues scaled(double t) const {
    WitnessValues out = *this;
    for (double& v : out.on_p) v *= t;
    for (double& v : out.on_q) v *= t;
    return out;
  }

  // Roles of P and Q exchanged.
  WitnessValues swapped() const { return {on_q, weights_q, on_p, weights_p}; }

  WitnessValues negated() const { return scaled(-1.0); }

 private:
  static void check_side(const std::vector<double>& v, const std::vector<double>& w,
                         const char* side) {
    if (v.size() != w.size())
      throw DomainError(std::string("witness values and weights on ") + side +
                        " differ in length");
    if (w.empty()) throw DomainError(std::string("empty witness on ") + side);
    double total = 0.0;
    for (double x : w) {
      if (!(x >= 0.0)) throw DomainError(std::string("negative weight on ") + side);
      total += x;
    }
    if (std::abs(total - 1.0) > 1e-9)
      throw DomainError(std::string("weights on ") + side + " do not sum to one");
    for (double x : v)
      if (!std::isfinite(x)) throw DomainError(std::string("non-finite witness value on ") + side);
  }
};

enum class Method { lt, shifted, scaled };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::lt: return "lt";
    case Method::shifted: return "shifted";
    case Method::scaled: return "scaled";
  }
  return "?";
}

struct VariationalResult {
  double value = 0.0;
  std::optional<double> alpha_star;
  std::optional<double> t_star;
  // Composite kernels optimize the reverse component's scale separately; it
  // multiplies the negated witness.
  std::optional<double> t_star_reverse;
  Method method = Method::shifted;
  bool t_on_boundary = false;
};

// Range of the scale parameter t.
struct TRange {
  enum class Kind { all_reals, nonneg, fixed } kind = Kind::all_reals;
  double fixed_value = 1.0;

  static TRange all() { return {}; }
  static TRange nonneg() { return {Kind::nonneg, 0.0}; }
  static TRange fixed(double t) { return {Kind::fixed, t}; }

  std::string name() const {
    switch (kind) {
      case Kind::all_reals: return "all";
      case Kind::nonneg: return "nonneg";
      case Kind::fixed: {
        std::ostringstream os;
        os << "fixed:" << fixed_value;
        return os.str();
      }
    }
    return "?";
  }
};

inline TRange parse_t_range(const std::string& text) {
  if (text == "all" || text == "all_reals") return TRange::all();
  if (text == "nonneg") return TRange::nonneg();
  if (text.starts_with("fixed:")) {
    try {
      return TRange::fixed(std::stod(text.substr(6)));
    } catch (const std::logic_error&) {
    }
  }
  throw DomainError("t range must be all, nonneg or fixed:<t>, got " + text);
}

struct InnerInfimum {
  double value = 0.0;
  double alpha = 0.0;
};

// inf_a { E_w[phi*(v + a)] - a } for a single (non-composite) kernel.
inline InnerInfimum inner_infimum(std::span<const double> values, std::span<const double> weights,
                                  const PhiSpec& phi) {
  switch (phi.kind()) {
    case PhiKind::kl: {
      const double lme = log_sum_exp(values, weights);
      return {lme, -lme};
    }
    case PhiKind::chi2: {
      const double m = weighted_mean(values, weights);
      return {m + 0.25 * weighted_variance(values, weights), -m};
    }
    case PhiKind::reverse_kl: {
      // phi*(y) = -1 - log(-y) needs v + a < 0. The stationarity condition
      // E[1 / (u + vmax - v)] = 1 in u = -a - vmax has its root in (0, 1].
      double vmax = -kInf;
      for (std::size_t i = 0; i < values.size(); ++i)
        if (weights[i] > 0.0) vmax = std::max(vmax, values[i]);
      auto excess = [&](double u) {
        double s = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i)
          if (weights[i] > 0.0) s += weights[i] / (u + vmax - values[i]);
        return s - 1.0;
      };
      double lo = 0.0, hi = 1.0;
      for (int i = 0; i < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++i) {
        const double mid = 0.5 * (lo + hi);
        (excess(mid) > 0.0 ? lo : hi) = mid;
      }
      const double alpha = -(0.5 * (lo + hi)) - vmax;
      double s = 0.0;
      for (std::size_t i = 0; i < values.size(); ++i)
        if (weights[i] > 0.0) s += weights[i] * phi.phi_star(values[i] + alpha);
      return {s - alpha, alpha};
    }
    case PhiKind::jeffreys: break;
  }
  throw DomainError("composite kernel " + phi.name() + " has no single inner infimum");
}

namespace detail {

inline std::string atom_error(const char* side, std::size_t i, double v, const PhiSpec& phi) {
  std::ostringstream os;
  os << "witness value " << v << " at " << side << " atom " << i << " is outside the domain of "
     << phi.name() << " phi*";
  return os.str();
}

// E_P[g] - log E_Q[e^g]
inline double dv_value(const WitnessValues& g) {
  return weighted_mean(g.on_p, g.weights_p) - log_sum_exp(g.on_q, g.weights_q);
}

// E_P[g] - E_Q[e^g - 1]
inline double lt_kl_value(const WitnessValues& g) {
  double s = 0.0;
  for (std::size_t i = 0; i < g.on_q.size(); ++i) s += g.weights_q[i] * std::expm1(g.on_q[i]);
  return weighted_mean(g.on_p, g.weights_p) - s;
}

// Shifted value for any kernel at a fixed witness. Reverse KL uses the
// reparameterized form E_Q[g] - log E_P[e^g]; the composite kernel pairs the
// forward DV term on g with the reverse DV term on -g.
inline double shifted_value(const WitnessValues& g, const PhiSpec& phi) {
  switch (phi.kind()) {
    case PhiKind::kl: return dv_value(g);
    case PhiKind::chi2: {
      // E_P g - m - (s2 - m^2) / 4, the same extension off the simplex as the partials.
      const double m = weighted_mean(g.on_q, g.weights_q);
      double s2 = 0.0;
      for (std::size_t j = 0; j < g.on_q.size(); ++j) s2 += g.weights_q[j] * g.on_q[j] * g.on_q[j];
      return weighted_mean(g.on_p, g.weights_p) - m - 0.25 * (s2 - m * m);
    }
    case PhiKind::reverse_kl: return dv_value(g.swapped());
    case PhiKind::jeffreys:
      return phi.gamma1() * dv_value(g) + phi.gamma2() * dv_value(g.negated().swapped());
  }
  return 0.0;
}

// Values of g on the side whose log-moment (or variance) is taken.
inline const std::vector<double>& inner_side(const WitnessValues& g, const PhiSpec& phi) {
  return phi.kind() == PhiKind::reverse_kl ? g.on_p : g.on_q;
}
inline const std::vector<double>& inner_weights(const WitnessValues& g, const PhiSpec& phi) {
  return phi.kind() == PhiKind::reverse_kl ? g.weights_p : g.weights_q;
}

struct ScaledSearch {
  double value = 0.0;
  double t = 0.0;
  bool on_boundary = false;
};

// sup over t of shifted_value(t * g) for a single kernel.
inline ScaledSearch maximize_over_t(const WitnessValues& g, const PhiSpec& phi,
                                    const TRange& range) {
  if (range.kind == TRange::Kind::fixed) {
    return {shifted_value(g.scaled(range.fixed_value), phi), range.fixed_value, false};
  }
  const auto& inner = inner_side(g, phi);
  const auto& inner_w = inner_weights(g, phi);
  const auto& outer = phi.kind() == PhiKind::reverse_kl ? g.on_q : g.on_p;
  const auto& outer_w = phi.kind() == PhiKind::reverse_kl ? g.weights_q : g.weights_p;
  // A witness that is constant on the inner side makes the objective linear in t.
  if (weighted_variance(inner, inner_w) <= 1e-20) {  // rounding noise counts as constant
    const double slope = weighted_mean(outer, outer_w) - weighted_mean(inner, inner_w);
    if (std::abs(slope) <= 1e-15) return {0.0, 0.0, false};
    if (range.kind == TRange::Kind::nonneg && slope < 0.0) return {0.0, 0.0, true};
    throw UnboundedError("witness is constant under the reference measure; the scaled objective "
                         "is linear in t with slope " + std::to_string(slope),
                         -kInf, kInf);
  }
  if (phi.kind() == PhiKind::chi2) {
    // Concave quadratic in t: t dE - t^2 Var / 4, peak at 2 dE / Var.
    const double de = weighted_mean(outer, outer_w) - weighted_mean(inner, inner_w);
    const double var = weighted_variance(inner, inner_w);
    const double t = 2.0 * de / var;
    if (range.kind == TRange::Kind::nonneg && t < 0.0) return {0.0, 0.0, true};
    return {de * de / var, t, false};
  }
  const double lower_limit = range.kind == TRange::Kind::nonneg ? 0.0 : -kInf;
  auto f = [&](double t) { return shifted_value(g.scaled(t), phi); };
  const SearchResult r = maximize_concave(f, -50.0, 50.0, lower_limit, kInf);
  return {r.value, r.x, r.at_lower || r.at_upper};
}

}  // namespace detail

inline double lt_objective(const WitnessValues& g, const PhiSpec& phi) {
  g.validate();
  if (phi.composite()) {
    return phi.gamma1() * detail::lt_kl_value(g) +
           phi.gamma2() * detail::lt_kl_value(g.negated().swapped());
  }
  const auto dom = phi.conjugate_domain();
  double s = 0.0;
  for (std::size_t i = 0; i < g.on_q.size(); ++i) {
    if (!dom.contains(g.on_q[i])) throw DomainError(detail::atom_error("Q", i, g.on_q[i], phi));
    s += g.weights_q[i] * phi.phi_star(g.on_q[i]);
  }
  return weighted_mean(g.on_p, g.weights_p) - s;
}

inline VariationalResult shifted_objective(const WitnessValues& g, const PhiSpec& phi) {
  g.validate();
  VariationalResult r;
  r.method = Method::shifted;
  r.value = detail::shifted_value(g, phi);
  if (phi.kind() == PhiKind::kl || phi.kind() == PhiKind::chi2)
    r.alpha_star = inner_infimum(g.on_q, g.weights_q, phi).alpha;
  return r;
}

inline VariationalResult scaled_objective(const WitnessValues& g, const PhiSpec& phi,
                                          const TRange& range = TRange::all()) {
  g.validate();
  VariationalResult r;
  r.method = Method::scaled;
  if (phi.composite()) {
    const auto fwd = detail::maximize_over_t(g, phi.forward_component(), range);
    const auto rev = detail::maximize_over_t(g.negated(), phi.reverse_component(), range);
    r.value = phi.gamma1() * fwd.value + phi.gamma2() * rev.value;
    r.t_star = fwd.t;
    r.t_star_reverse = rev.t;
    r.t_on_boundary = fwd.on_boundary || rev.on_boundary;
    return r;
  }
  const auto s = detail::maximize_over_t(g, phi, range);
  r.value = s.value;
  r.t_star = s.t;
  r.t_on_boundary = s.on_boundary;
  if (phi.kind() == PhiKind::kl || phi.kind() == PhiKind::chi2) {
    std::vector<double> tq(g.on_q);
    for (double& v : tq) v *= s.t;
    r.alpha_star = inner_infimum(tq, g.weights_q, phi).alpha;
  }
  return r;
}

inline VariationalResult evaluate(const WitnessValues& g, const PhiSpec& phi, Method method,
                                  const TRange& range = TRange::all()) {
  switch (method) {
    case Method::lt: {
      VariationalResult r;
      r.method = Method::lt;
      r.value = lt_objective(g, phi);
      return r;
    }
    case Method::shifted: return shifted_objective(g, phi);
    case Method::scaled: return scaled_objective(g, phi, range);
  }
  return {};
}

struct OptimalT {
  double t_star = 1.0;
  double delta_t = 0.0;
};

// Quadratic approximation of the KL-optimal scale around t = 1. The source
// is reweighted by e^loss (Gibbs measure) and
//   delta = (E_target[loss] - E_gibbs[loss]) / Var_gibbs(loss).
inline OptimalT optimal_t_kl_approx(std::span<const double> loss_target,
                                    std::span<const double> weights_target,
                                    std::span<const double> loss_source,
                                    std::span<const double> weights_source) {
  for (double v : loss_source)
    if (!std::isfinite(v)) throw DomainError("non-finite source loss");
  const double lz = log_sum_exp(loss_source, weights_source);
  std::vector<double> gibbs(loss_source.size());
  for (std::size_t i = 0; i < gibbs.size(); ++i)
    gibbs[i] = weights_source[i] > 0.0 ? weights_source[i] * std::exp(loss_source[i] - lz) : 0.0;
  const double var = weighted_variance(loss_source, gibbs);
  if (!(var > 1e-12)) throw DegenerateError("Gibbs variance of the source loss is degenerate");
  const double delta =
      (weighted_mean(loss_target, weights_target) - weighted_mean(loss_source, gibbs)) / var;
  return {1.0 + delta, delta};
}

inline double optimal_t_chi2(double mean_target, double mean_source, double var_source) {
  if (!(var_source > 0.0)) throw DegenerateError("source variance must be positive");
  return 2.0 * (mean_target - mean_source) / var_source;
}

// Value of a variational objective together with its partial derivatives
// with respect to the witness values and the atom weights on both sides.
struct WitnessPartials {
  double value = 0.0;
  std::vector<double> d_on_p, d_weights_p, d_on_q, d_weights_q;
  double d_t = 0.0;  // only filled by scaled_partials_fixed_t
};

namespace detail {

inline void dv_partials(const WitnessValues& g, double coeff, WitnessPartials& out, bool swap,
                        double sign) {
  // value = E_A[s g] - log E_B[e^{s g}] where (A, B) = (P, Q) or (Q, P).
  const auto& va = swap ? g.on_q : g.on_p;
  const auto& wa = swap ? g.weights_q : g.weights_p;
  const auto& vb = swap ? g.on_p : g.on_q;
  const auto& wb = swap ? g.weights_p : g.weights_q;
  auto& dva = swap ? out.d_on_q : out.d_on_p;
  auto& dwa = swap ? out.d_weights_q : out.d_weights_p;
  auto& dvb = swap ? out.d_on_p : out.d_on_q;
  auto& dwb = swap ? out.d_weights_p : out.d_weights_q;
  std::vector<double> sb(vb.size());
  for (std::size_t j = 0; j < vb.size(); ++j) sb[j] = sign * vb[j];
  const double lz = log_sum_exp(sb, wb);
  double ea = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    ea += wa[i] * sign * va[i];
    dva[i] += coeff * sign * wa[i];
    dwa[i] += coeff * sign * va[i];
  }
  for (std::size_t j = 0; j < vb.size(); ++j) {
    const double e = std::exp(sb[j] - lz);
    dvb[j] -= coeff * sign * wb[j] * e;
    dwb[j] -= coeff * e;
  }
  out.value += coeff * (ea - lz);
}

}  // namespace detail

inline WitnessPartials shifted_partials(const WitnessValues& g, const PhiSpec& phi) {
  WitnessPartials out;
  out.d_on_p.assign(g.on_p.size(), 0.0);
  out.d_weights_p.assign(g.on_p.size(), 0.0);
  out.d_on_q.assign(g.on_q.size(), 0.0);
  out.d_weights_q.assign(g.on_q.size(), 0.0);
  switch (phi.kind()) {
    case PhiKind::kl: detail::dv_partials(g, 1.0, out, false, 1.0); break;
    case PhiKind::reverse_kl: detail::dv_partials(g, 1.0, out, true, 1.0); break;
    case PhiKind::jeffreys:
      detail::dv_partials(g, phi.gamma1(), out, false, 1.0);
      detail::dv_partials(g, phi.gamma2(), out, true, -1.0);
      break;
    case PhiKind::chi2: {
      // E_P g - m - (s2 - m^2) / 4 with m = E_Q g, s2 = E_Q g^2.
      const double m = weighted_mean(g.on_q, g.weights_q);
      double s2 = 0.0;
      for (std::size_t j = 0; j < g.on_q.size(); ++j) s2 += g.weights_q[j] * g.on_q[j] * g.on_q[j];
      for (std::size_t i = 0; i < g.on_p.size(); ++i) {
        out.d_on_p[i] = g.weights_p[i];
        out.d_weights_p[i] = g.on_p[i];
      }
      for (std::size_t j = 0; j < g.on_q.size(); ++j) {
        const double v = g.on_q[j];
        out.d_on_q[j] = -g.weights_q[j] * (1.0 + 0.5 * (v - m));
        out.d_weights_q[j] = -v - 0.25 * (v * v - 2.0 * m * v);
      }
      out.value = weighted_mean(g.on_p, g.weights_p) - m - 0.25 * (s2 - m * m);
      break;
    }
  }
  return out;
}

// Partials of shifted(t * g) with respect to g, the weights, and t.
inline WitnessPartials scaled_partials_fixed_t(const WitnessValues& g, const PhiSpec& phi,
                                               double t) {
  const WitnessValues tg = g.scaled(t);
  WitnessPartials inner = shifted_partials(tg, phi);
  double dt = 0.0;
  for (std::size_t i = 0; i < g.on_p.size(); ++i) {
    dt += inner.d_on_p[i] * g.on_p[i];
    inner.d_on_p[i] *= t;
  }
  for (std::size_t j = 0; j < g.on_q.size(); ++j) {
    dt += inner.d_on_q[j] * g.on_q[j];
    inner.d_on_q[j] *= t;
  }
  inner.d_t = dt;
  return inner;
}

// Partials of the LT objective E_P[g] - E_Q[phi*(g)].
inline WitnessPartials lt_partials(const WitnessValues& g, const PhiSpec& phi) {
  if (phi.composite()) throw DomainError("lt_partials needs a single kernel");
  WitnessPartials out;
  out.d_on_p.resize(g.on_p.size());
  out.d_weights_p.resize(g.on_p.size());
  out.d_on_q.resize(g.on_q.size());
  out.d_weights_q.resize(g.on_q.size());
  double ep = 0.0, eq = 0.0;
  for (std::size_t i = 0; i < g.on_p.size(); ++i) {
    ep += g.weights_p[i] * g.on_p[i];
    out.d_on_p[i] = g.weights_p[i];
    out.d_weights_p[i] = g.on_p[i];
  }
  for (std::size_t j = 0; j < g.on_q.size(); ++j) {
    const double fs = phi.phi_star(g.on_q[j]);
    eq += g.weights_q[j] * fs;
    out.d_on_q[j] = -g.weights_q[j] * phi.phi_star_prime(g.on_q[j]);
    out.d_weights_q[j] = -fs;
  }
  out.value = ep - eq;
  return out;
}

}  // namespace fdd
