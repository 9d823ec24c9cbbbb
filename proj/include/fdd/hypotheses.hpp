#pragma once

// Hypotheses, losses, and hypothesis classes. Every hypothesis maps a point
// to a margin (real), a score in [0, 1], and a hard label in {0, 1}.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fdd/measure.hpp"
#include "fdd/numerics.hpp"

namespace fdd {

inline constexpr double kLeakySlope = 0.01;
inline constexpr int kMaxHiddenWidth = 64;

// h_c(x) = 0 if x < c else 1, on the first coordinate.
struct Threshold {
  double c = 0.0;
};

// Hard labels indexed by the (integer) first coordinate of the point.
struct LookupTable {
  std::vector<int> labels;
};

struct Linear {
  Eigen::VectorXd w;
  double b = 0.0;
};

// One hidden layer with a leaky rectifier and a single binary margin output.
struct Mlp {
  Eigen::MatrixXd w1;  // hidden x in
  Eigen::VectorXd b1;  // hidden
  Eigen::VectorXd w2;  // hidden
  double b2 = 0.0;

  Eigen::Index hidden() const { return w1.rows(); }
  Eigen::Index in_dim() const { return w1.cols(); }

  static Mlp random(Eigen::Index in_dim, Eigen::Index hidden, std::mt19937_64& rng) {
    if (hidden < 1 || hidden > kMaxHiddenWidth)
      throw DomainError("mlp hidden width must be in [1, 64]");
    std::normal_distribution<double> n01(0.0, 1.0);
    Mlp m;
    m.w1.resize(hidden, in_dim);
    m.b1.resize(hidden);
    m.w2.resize(hidden);
    const double s1 = std::sqrt(2.0 / static_cast<double>(in_dim));
    const double s2 = std::sqrt(1.0 / static_cast<double>(hidden));
    for (Eigen::Index i = 0; i < hidden; ++i) {
      for (Eigen::Index j = 0; j < in_dim; ++j) m.w1(i, j) = s1 * n01(rng);
      m.b1(i) = 0.1 * n01(rng);
      m.w2(i) = s2 * n01(rng);
    }
    m.b2 = 0.0;
    return m;
  }

  Eigen::Index parameter_count() const { return w1.size() + b1.size() + w2.size() + 1; }

  Eigen::VectorXd flatten() const {
    Eigen::VectorXd v(parameter_count());
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < w1.cols(); ++j)
      for (Eigen::Index i = 0; i < w1.rows(); ++i) v(k++) = w1(i, j);
    v.segment(k, b1.size()) = b1;
    k += b1.size();
    v.segment(k, w2.size()) = w2;
    k += w2.size();
    v(k) = b2;
    return v;
  }

  void assign(const Eigen::VectorXd& v) {
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < w1.cols(); ++j)
      for (Eigen::Index i = 0; i < w1.rows(); ++i) w1(i, j) = v(k++);
    b1 = v.segment(k, b1.size());
    k += b1.size();
    w2 = v.segment(k, w2.size());
    k += w2.size();
    b2 = v(k);
  }
};

using Hypothesis = std::variant<Threshold, LookupTable, Linear, Mlp>;

inline double leaky(double x) { return x >= 0.0 ? x : kLeakySlope * x; }
inline double leaky_prime(double x) { return x >= 0.0 ? 1.0 : kLeakySlope; }

inline double mlp_margin(const Mlp& m, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  const Eigen::VectorXd pre = m.w1 * x.transpose() + m.b1;
  double z = m.b2;
  for (Eigen::Index i = 0; i < pre.size(); ++i) z += m.w2(i) * leaky(pre(i));
  return z;
}

// Hard-label hypotheses report +-inf margins.
inline double margin(const Hypothesis& h, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  struct Visitor {
    const Eigen::Ref<const Eigen::RowVectorXd>& x;
    double operator()(const Threshold& t) const { return x(0) < t.c ? -kInf : kInf; }
    double operator()(const LookupTable& t) const {
      const auto idx = static_cast<long>(std::llround(x(0)));
      if (idx < 0 || static_cast<std::size_t>(idx) >= t.labels.size())
        throw DomainError("lookup hypothesis has no label for atom " + std::to_string(idx));
      return t.labels[static_cast<std::size_t>(idx)] ? kInf : -kInf;
    }
    double operator()(const Linear& l) const { return x.dot(l.w.transpose()) + l.b; }
    double operator()(const Mlp& m) const { return mlp_margin(m, x); }
  };
  return std::visit(Visitor{x}, h);
}

inline double score(const Hypothesis& h, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  const double z = margin(h, x);
  if (z == kInf) return 1.0;
  if (z == -kInf) return 0.0;
  return sigmoid(z);
}

inline int predict(const Hypothesis& h, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  return margin(h, x) >= 0.0 ? 1 : 0;
}

enum class LossKind { zero_one, bounded_sigmoid_disagreement, surrogate_unbounded };

inline const char* to_string(LossKind k) {
  switch (k) {
    case LossKind::zero_one: return "zero_one";
    case LossKind::bounded_sigmoid_disagreement: return "bounded_sigmoid_disagreement";
    case LossKind::surrogate_unbounded: return "surrogate_unbounded";
  }
  return "?";
}

inline LossKind parse_loss(const std::string& s) {
  if (s == "zero_one") return LossKind::zero_one;
  if (s == "bounded_sigmoid_disagreement" || s == "bounded") return LossKind::bounded_sigmoid_disagreement;
  if (s == "surrogate_unbounded" || s == "surrogate") return LossKind::surrogate_unbounded;
  throw DomainError("unknown loss kind: " + s);
}

// Symmetric losses on scores in [0, 1]. The unbounded surrogate is the
// symmetrized Bernoulli cross-entropy (s - s')(logit s - logit s').
struct LossFunction {
  LossKind kind = LossKind::zero_one;

  bool bounded() const { return kind != LossKind::surrogate_unbounded; }
  double upper() const { return bounded() ? 1.0 : kInf; }

  double operator()(double s, double s2) const {
    switch (kind) {
      case LossKind::zero_one: return (s >= 0.5) != (s2 >= 0.5) ? 1.0 : 0.0;
      case LossKind::bounded_sigmoid_disagreement: return std::abs(s - s2);
      case LossKind::surrogate_unbounded: {
        const double a = clamp_score(s), b = clamp_score(s2);
        return (a - b) * (std::log(a / (1.0 - a)) - std::log(b / (1.0 - b)));
      }
    }
    return 0.0;
  }

  // Value and partials with respect to the two margins (logits).
  struct OnLogits {
    double value, d_a, d_b;
  };
  OnLogits on_logits(double a, double b) const {
    const double sa = sigmoid(a), sb = sigmoid(b);
    switch (kind) {
      case LossKind::bounded_sigmoid_disagreement: {
        const double diff = sa - sb;
        const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
        return {std::abs(diff), sign * sa * (1.0 - sa), -sign * sb * (1.0 - sb)};
      }
      case LossKind::surrogate_unbounded: {
        const double ds = sa - sb, dz = a - b;
        return {ds * dz, sa * (1.0 - sa) * dz + ds, -sb * (1.0 - sb) * dz - ds};
      }
      case LossKind::zero_one: break;
    }
    throw DomainError("zero_one loss has no logit gradient");
  }

 private:
  static double clamp_score(double s) { return std::min(std::max(s, 1e-12), 1.0 - 1e-12); }
};

// Hypothesis set with a loss. Enumerable classes list their members; the
// parametric descriptor samples random members on demand.
struct ParametricFamily {
  enum class Form { linear, mlp } form = Form::mlp;
  Eigen::Index in_dim = 2;
  Eigen::Index hidden = 16;

  Hypothesis sample(std::mt19937_64& rng) const {
    if (form == Form::mlp) return Mlp::random(in_dim, hidden, rng);
    std::normal_distribution<double> n01(0.0, 1.0);
    Linear l;
    l.w.resize(in_dim);
    for (Eigen::Index i = 0; i < in_dim; ++i) l.w(i) = n01(rng);
    l.b = n01(rng);
    return l;
  }
};

struct HypothesisClass {
  std::vector<Hypothesis> members;
  LossFunction loss;
  std::optional<ParametricFamily> parametric;

  bool enumerable() const { return !members.empty(); }
  std::size_t size() const { return members.size(); }
};

inline HypothesisClass threshold_class(double lo, double hi, int grid = 101,
                                       LossKind loss = LossKind::zero_one) {
  if (grid < 1) throw DomainError("threshold grid needs at least one point");
  if (hi < lo) throw DomainError("threshold interval is reversed");
  HypothesisClass cls;
  cls.loss.kind = loss;
  for (int k = 0; k < grid; ++k) {
    const double c = grid == 1 ? lo : lo + (hi - lo) * k / static_cast<double>(grid - 1);
    cls.members.emplace_back(Threshold{c});
  }
  return cls;
}

inline HypothesisClass parametric_class(ParametricFamily family,
                                        LossKind loss = LossKind::bounded_sigmoid_disagreement) {
  HypothesisClass cls;
  cls.loss.kind = loss;
  cls.parametric = family;
  return cls;
}

// Scores of h on every atom of a measure.
inline std::vector<double> scores_on(const Hypothesis& h, const Eigen::MatrixXd& points) {
  std::vector<double> out(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index i = 0; i < points.rows(); ++i) out[static_cast<std::size_t>(i)] = score(h, points.row(i));
  return out;
}

// E[loss(h(X), Y)] under the measure's weights.
inline double risk(const Hypothesis& h, const Measure& data, std::span<const double> labels,
                   const LossFunction& loss) {
  if (labels.size() != data.size()) throw DomainError("risk needs one label per atom");
  double s = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i)
    s += data.weights[i] * loss(score(h, data.points.row(static_cast<Eigen::Index>(i))), labels[i]);
  return s;
}

struct Disagreement {
  double mean = 0.0;
  std::vector<double> per_point;
};

inline Disagreement disagreement(const Hypothesis& h, const Hypothesis& h2, const Measure& data,
                                 const LossFunction& loss) {
  Disagreement d;
  d.per_point.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto row = data.points.row(static_cast<Eigen::Index>(i));
    d.per_point[i] = loss(score(h, row), score(h2, row));
    d.mean += data.weights[i] * d.per_point[i];
  }
  return d;
}

// Closed form for zero-one disagreement of two thresholds under U[lo, hi]:
// the uniform mass of [min(a,b), max(a,b)).
inline double threshold_disagreement_uniform(double a, double b, double lo, double hi) {
  const double left = std::max(std::min(a, b), lo);
  const double right = std::min(std::max(a, b), hi);
  return right > left ? (right - left) / (hi - lo) : 0.0;
}

// Rows are the functions x -> loss(h(x), h'(x)), columns the points.
// Enumerable classes yield all ordered pairs; parametric classes yield
// `budget` random pairs drawn from `seed`.
inline Eigen::MatrixXd induced_loss_class(const HypothesisClass& cls, const Eigen::MatrixXd& points,
                                          std::size_t budget = 50, std::uint64_t seed = 0) {
  if (cls.enumerable()) {
    std::vector<std::vector<double>> scores;
    scores.reserve(cls.size());
    for (const auto& h : cls.members) scores.push_back(scores_on(h, points));
    const auto n = static_cast<Eigen::Index>(cls.size());
    Eigen::MatrixXd out(n * n, points.rows());
    for (Eigen::Index a = 0; a < n; ++a)
      for (Eigen::Index b = 0; b < n; ++b)
        for (Eigen::Index i = 0; i < points.rows(); ++i)
          out(a * n + b, i) = cls.loss(scores[static_cast<std::size_t>(a)][static_cast<std::size_t>(i)],
                                       scores[static_cast<std::size_t>(b)][static_cast<std::size_t>(i)]);
    return out;
  }
  if (!cls.parametric) throw DomainError("hypothesis class is empty");
  std::mt19937_64 rng(seed);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(budget), points.rows());
  for (std::size_t k = 0; k < budget; ++k) {
    const Hypothesis h = cls.parametric->sample(rng);
    const Hypothesis h2 = cls.parametric->sample(rng);
    for (Eigen::Index i = 0; i < points.rows(); ++i)
      out(static_cast<Eigen::Index>(k), i) = cls.loss(score(h, points.row(i)), score(h2, points.row(i)));
  }
  return out;
}

// Forward pass of an MLP over a batch, keeping what backprop needs.
struct MlpCache {
  Eigen::MatrixXd pre;     // n x hidden
  Eigen::MatrixXd hidden;  // n x hidden
  Eigen::VectorXd margin;  // n
};

inline MlpCache mlp_forward(const Mlp& m, const Eigen::MatrixXd& x) {
  MlpCache c;
  c.pre = (x * m.w1.transpose()).rowwise() + m.b1.transpose();
  c.hidden = c.pre.unaryExpr([](double v) { return leaky(v); });
  c.margin = (c.hidden * m.w2).array() + m.b2;
  return c;
}

// Gradient of sum_i dmargin_i * margin_i with respect to the parameters,
// laid out as Mlp::flatten().
inline Eigen::VectorXd mlp_backward(const Mlp& m, const Eigen::MatrixXd& x, const MlpCache& c,
                                    const Eigen::VectorXd& dmargin) {
  Mlp g = m;
  g.w2 = c.hidden.transpose() * dmargin;
  g.b2 = dmargin.sum();
  Eigen::MatrixXd dpre = (dmargin * m.w2.transpose()).cwiseProduct(
      c.pre.unaryExpr([](double v) { return leaky_prime(v); }));
  g.w1 = dpre.transpose() * x;
  g.b1 = dpre.colwise().sum().transpose();
  return g.flatten();
}

// E_w[loss(h, h')] for two MLPs with its gradients in both parameter vectors.
struct PairGradient {
  double value = 0.0;
  Eigen::VectorXd d_h;
  Eigen::VectorXd d_h2;
};

inline PairGradient disagreement_gradient(const Mlp& h, const Mlp& h2, const Measure& data,
                                          const LossFunction& loss) {
  const MlpCache a = mlp_forward(h, data.points);
  const MlpCache b = mlp_forward(h2, data.points);
  Eigen::VectorXd da(a.margin.size()), db(b.margin.size());
  PairGradient out;
  for (Eigen::Index i = 0; i < a.margin.size(); ++i) {
    const auto l = loss.on_logits(a.margin(i), b.margin(i));
    const double w = data.weights[static_cast<std::size_t>(i)];
    out.value += w * l.value;
    da(i) = w * l.d_a;
    db(i) = w * l.d_b;
  }
  out.d_h = mlp_backward(h, data.points, a, da);
  out.d_h2 = mlp_backward(h2, data.points, b, db);
  return out;
}

}  // namespace fdd
