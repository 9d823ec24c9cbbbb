#pragma once

// Adversarial domain adaptation at desk scale. A shared one-hidden-layer
// representation feeds a main head h and an auxiliary head h'. Each outer
// step runs k ascent steps on h' against the discrepancy d between the two
// heads' surrogate loss on target and source, then one descent step on the
// representation and h against source risk + eta * d. Full-batch gradient
// steps, so a run is a pure function of its config and seed.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fdd/datasets.hpp"
#include "fdd/hypotheses.hpp"
#include "fdd/numerics.hpp"
#include "fdd/phi.hpp"
#include "fdd/variational.hpp"

namespace fdd {

enum class DiscrepancyKind { kl, chi2, jeffreys, abs_kl, abs_chi2, optkl, optchi2 };

struct DiscrepancyChoice {
  DiscrepancyKind kind = DiscrepancyKind::kl;
  double gamma1 = 0.5;
  double gamma2 = 0.5;

  std::string name() const {
    switch (kind) {
      case DiscrepancyKind::kl: return "kl";
      case DiscrepancyKind::chi2: return "chi2";
      case DiscrepancyKind::jeffreys: {
        std::ostringstream os;
        os << "jeffreys:" << gamma1 << "," << gamma2;
        return os.str();
      }
      case DiscrepancyKind::abs_kl: return "abs_kl";
      case DiscrepancyKind::abs_chi2: return "abs_chi2";
      case DiscrepancyKind::optkl: return "optkl";
      case DiscrepancyKind::optchi2: return "optchi2";
    }
    return "?";
  }

  bool absolute() const { return kind == DiscrepancyKind::abs_kl || kind == DiscrepancyKind::abs_chi2; }

  PhiSpec phi() const {
    switch (kind) {
      case DiscrepancyKind::kl:
      case DiscrepancyKind::abs_kl:
      case DiscrepancyKind::optkl: return make_phi(PhiKind::kl);
      case DiscrepancyKind::chi2:
      case DiscrepancyKind::abs_chi2:
      case DiscrepancyKind::optchi2: return make_phi(PhiKind::chi2);
      case DiscrepancyKind::jeffreys: return make_phi(PhiKind::jeffreys, gamma1, gamma2);
    }
    return make_phi(PhiKind::kl);
  }
};

inline DiscrepancyChoice parse_discrepancy(const std::string& s) {
  if (s == "kl") return {DiscrepancyKind::kl};
  if (s == "chi2") return {DiscrepancyKind::chi2};
  if (s == "abs_kl") return {DiscrepancyKind::abs_kl};
  if (s == "abs_chi2") return {DiscrepancyKind::abs_chi2};
  if (s == "optkl") return {DiscrepancyKind::optkl};
  if (s == "optchi2") return {DiscrepancyKind::optchi2};
  if (s == "jeffreys" || s.starts_with("jeffreys:")) {
    const PhiSpec p = parse_phi(s);
    return {DiscrepancyKind::jeffreys, p.gamma1(), p.gamma2()};
  }
  throw DomainError("unknown discrepancy variant: " + s);
}

enum class TMode { fixed_one, optimized };

struct TrainConfig {
  DiscrepancyChoice discrepancy;
  double eta = 1.0;
  TMode t_mode = TMode::fixed_one;  // optkl / optchi2 always set t per step
  int inner_steps = 5;
  int outer_steps = 3000;
  double outer_lr = 0.1;
  double inner_lr = 0.1;
  std::uint64_t seed = 0;
  LossKind surrogate = LossKind::bounded_sigmoid_disagreement;
  int hidden = 16;
  double explosion_threshold = 1e6;
  int log_every = 10;
  // eta_p = eta (2 / (1 + exp(-10 p)) - 1) at progress p in [0, 1]
  bool eta_ramp = true;

  double eta_at(int step) const {
    if (!eta_ramp || outer_steps <= 1) return eta;
    const double p = static_cast<double>(step) / static_cast<double>(outer_steps - 1);
    return eta * (2.0 / (1.0 + std::exp(-10.0 * p)) - 1.0);
  }

  void validate() const {
    if (!(eta >= 0.0)) throw DomainError("eta must be nonnegative");
    if (inner_steps < 1) throw DomainError("inner_steps must be at least 1");
    if (outer_steps < 0) throw DomainError("outer_steps must be nonnegative");
    if (!(outer_lr > 0.0) || !(inner_lr > 0.0)) throw DomainError("learning rates must be positive");
    if (hidden < 1 || hidden > kMaxHiddenWidth) throw DomainError("hidden width must be in [1, 64]");
    if (surrogate == LossKind::zero_one) throw DomainError("the surrogate must be differentiable");
    if (discrepancy.kind == DiscrepancyKind::jeffreys &&
        !(discrepancy.gamma1 >= 0.0 && discrepancy.gamma2 >= 0.0 &&
          discrepancy.gamma1 + discrepancy.gamma2 > 0.0))
      throw DomainError("jeffreys weights must be nonnegative and not both zero");
  }
};

// Shared representation z = leaky(W1 x + b1) with two linear logit heads.
struct TwoHeadModel {
  Eigen::MatrixXd w1;  // hidden x in
  Eigen::VectorXd b1;
  Eigen::VectorXd w_main;
  double b_main = 0.0;
  Eigen::VectorXd w_aux;
  double b_aux = 0.0;

  static TwoHeadModel init(Eigen::Index in_dim, Eigen::Index hidden, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01(0.0, 1.0);
    TwoHeadModel m;
    m.w1.resize(hidden, in_dim);
    m.b1.resize(hidden);
    m.w_main.resize(hidden);
    m.w_aux.resize(hidden);
    const double s1 = std::sqrt(2.0 / static_cast<double>(in_dim));
    const double s2 = std::sqrt(1.0 / static_cast<double>(hidden));
    for (Eigen::Index i = 0; i < hidden; ++i)
      for (Eigen::Index j = 0; j < in_dim; ++j) m.w1(i, j) = s1 * n01(rng);
    for (Eigen::Index i = 0; i < hidden; ++i) m.b1(i) = 0.5 * n01(rng);
    for (Eigen::Index i = 0; i < hidden; ++i) m.w_main(i) = s2 * n01(rng);
    for (Eigen::Index i = 0; i < hidden; ++i) m.w_aux(i) = s2 * n01(rng);
    return m;
  }

  Eigen::Index hidden() const { return w1.rows(); }
  Eigen::Index outer_size() const { return w1.size() + b1.size() + w_main.size() + 1; }
  Eigen::Index inner_size() const { return w_aux.size() + 1; }

  // Representation and main head.
  Eigen::VectorXd outer_params() const {
    Eigen::VectorXd v(outer_size());
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < w1.cols(); ++j)
      for (Eigen::Index i = 0; i < w1.rows(); ++i) v(k++) = w1(i, j);
    v.segment(k, b1.size()) = b1;
    k += b1.size();
    v.segment(k, w_main.size()) = w_main;
    k += w_main.size();
    v(k) = b_main;
    return v;
  }

  void set_outer(const Eigen::VectorXd& v) {
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < w1.cols(); ++j)
      for (Eigen::Index i = 0; i < w1.rows(); ++i) w1(i, j) = v(k++);
    b1 = v.segment(k, b1.size());
    k += b1.size();
    w_main = v.segment(k, w_main.size());
    k += w_main.size();
    b_main = v(k);
  }

  Eigen::VectorXd inner_params() const {
    Eigen::VectorXd v(inner_size());
    v.head(w_aux.size()) = w_aux;
    v(w_aux.size()) = b_aux;
    return v;
  }

  void set_inner(const Eigen::VectorXd& v) {
    w_aux = v.head(w_aux.size());
    b_aux = v(w_aux.size());
  }

  bool finite() const {
    return w1.allFinite() && b1.allFinite() && w_main.allFinite() && w_aux.allFinite() &&
           std::isfinite(b_main) && std::isfinite(b_aux);
  }

  // The main classifier h = head o representation as a standalone network.
  Mlp main_network() const { return {w1, b1, w_main, b_main}; }
  Mlp aux_network() const { return {w1, b1, w_aux, b_aux}; }
};

struct ForwardPass {
  Eigen::MatrixXd pre;  // n x hidden
  Eigen::MatrixXd z;
  Eigen::VectorXd a;    // main logits
  Eigen::VectorXd a2;   // auxiliary logits
};

inline ForwardPass forward(const TwoHeadModel& m, const Eigen::MatrixXd& x) {
  ForwardPass f;
  f.pre = (x * m.w1.transpose()).rowwise() + m.b1.transpose();
  f.z = f.pre.unaryExpr([](double v) { return leaky(v); });
  f.a = (f.z * m.w_main).array() + m.b_main;
  f.a2 = (f.z * m.w_aux).array() + m.b_aux;
  return f;
}

struct ObjectiveValue {
  double source_risk = 0.0;
  double discrepancy = 0.0;
  double total = 0.0;            // source_risk + eta * discrepancy
  Eigen::VectorXd grad_outer;    // d total / d (representation, main head)
  Eigen::VectorXd grad_inner;    // d discrepancy / d auxiliary head
};

namespace detail {

// Discrepancy between the heads and its partials in the per-point losses.
struct DiscrepancyPartials {
  double value = 0.0;
  std::vector<double> d_target, d_source;
};

inline DiscrepancyPartials discrepancy_partials(const WitnessValues& g, const DiscrepancyChoice& choice,
                                                double t) {
  DiscrepancyPartials out;
  const PhiSpec phi = choice.phi();
  if (choice.absolute()) {
    const WitnessValues tg = g.scaled(t);
    const WitnessPartials lt = lt_partials(tg, phi);
    const double sign = lt.value >= 0.0 ? 1.0 : -1.0;
    out.value = std::abs(lt.value);
    out.d_target.resize(g.on_p.size());
    out.d_source.resize(g.on_q.size());
    for (std::size_t i = 0; i < g.on_p.size(); ++i) out.d_target[i] = sign * t * lt.d_on_p[i];
    for (std::size_t j = 0; j < g.on_q.size(); ++j) out.d_source[j] = sign * t * lt.d_on_q[j];
    return out;
  }
  WitnessPartials p;
  if (phi.composite()) {
    // gamma1 DV(t g) + gamma2 reverse DV(-t g)
    p = scaled_partials_fixed_t(g, phi.forward_component(), t);
    const WitnessPartials r = scaled_partials_fixed_t(g.negated(), phi.reverse_component(), t);
    p.value = phi.gamma1() * p.value + phi.gamma2() * r.value;
    for (std::size_t i = 0; i < p.d_on_p.size(); ++i)
      p.d_on_p[i] = phi.gamma1() * p.d_on_p[i] - phi.gamma2() * r.d_on_p[i];
    for (std::size_t j = 0; j < p.d_on_q.size(); ++j)
      p.d_on_q[j] = phi.gamma1() * p.d_on_q[j] - phi.gamma2() * r.d_on_q[j];
  } else {
    p = scaled_partials_fixed_t(g, phi, t);
  }
  out.value = p.value;
  out.d_target = std::move(p.d_on_p);
  out.d_source = std::move(p.d_on_q);
  return out;
}

inline std::vector<double> head_losses(const LossFunction& loss, const ForwardPass& f) {
  std::vector<double> out(static_cast<std::size_t>(f.a.size()));
  for (Eigen::Index i = 0; i < f.a.size(); ++i)
    out[static_cast<std::size_t>(i)] = loss.on_logits(f.a(i), f.a2(i)).value;
  return out;
}

}  // namespace detail

// Per-point surrogate losses between the heads on target (P) and source (Q).
inline WitnessValues head_witness(const TwoHeadModel& m, const Measure& source, const Measure& target,
                                  const LossFunction& loss) {
  return {detail::head_losses(loss, forward(m, target.points)), target.weights,
          detail::head_losses(loss, forward(m, source.points)), source.weights};
}

// Scale used by a step: 1 unless the config optimizes it.
struct ScaleChoice {
  double t = 1.0;
  bool fell_back = false;
};

inline ScaleChoice choose_t(const WitnessValues& g, const TrainConfig& cfg) {
  const auto kind = cfg.discrepancy.kind;
  try {
    if (kind == DiscrepancyKind::optkl) {
      const double t = optimal_t_kl_approx(g.on_p, g.weights_p, g.on_q, g.weights_q).t_star;
      if (!std::isfinite(t)) return {1.0, true};
      return {t, false};
    }
    if (kind == DiscrepancyKind::optchi2) {
      const double t = optimal_t_chi2(weighted_mean(g.on_p, g.weights_p), weighted_mean(g.on_q, g.weights_q),
                                      weighted_variance(g.on_q, g.weights_q));
      if (!std::isfinite(t)) return {1.0, true};
      return {t, false};
    }
    if (cfg.t_mode == TMode::optimized && !cfg.discrepancy.absolute()) {
      const auto r = scaled_objective(g, cfg.discrepancy.phi(), TRange::all());
      if (r.t_star && std::isfinite(*r.t_star)) return {*r.t_star, false};
      return {1.0, true};
    }
  } catch (const Error&) {
    return {1.0, true};
  }
  return {1.0, false};
}

// Source risk (logistic loss), discrepancy, and both players' gradients at a
// fixed scale t. Target labels are never touched.
inline ObjectiveValue objective(const TwoHeadModel& m, const Measure& source,
                                std::span<const double> source_labels, const Measure& target,
                                const TrainConfig& cfg, double t) {
  const LossFunction loss{cfg.surrogate};
  const ForwardPass fs = forward(m, source.points);
  const ForwardPass ft = forward(m, target.points);
  const WitnessValues g{detail::head_losses(loss, ft), target.weights, detail::head_losses(loss, fs),
                        source.weights};
  const auto dp = detail::discrepancy_partials(g, cfg.discrepancy, t);

  ObjectiveValue out;
  out.discrepancy = dp.value;

  // Logit sensitivities of the outer objective (da*) and of d alone (dd*).
  const auto ns = fs.a.size(), nt = ft.a.size();
  Eigen::VectorXd da_s(ns), da2_s(ns), da_t(nt), da2_t(nt);
  for (Eigen::Index i = 0; i < ns; ++i) {
    const auto si = static_cast<std::size_t>(i);
    const double w = source.weights[si];
    const double y = source_labels[si];
    out.source_risk += w * (softplus(fs.a(i)) - y * fs.a(i));
    const auto l = loss.on_logits(fs.a(i), fs.a2(i));
    da_s(i) = w * (sigmoid(fs.a(i)) - y) + cfg.eta * dp.d_source[si] * l.d_a;
    da2_s(i) = dp.d_source[si] * l.d_b;
  }
  for (Eigen::Index i = 0; i < nt; ++i) {
    const auto si = static_cast<std::size_t>(i);
    const auto l = loss.on_logits(ft.a(i), ft.a2(i));
    da_t(i) = cfg.eta * dp.d_target[si] * l.d_a;
    da2_t(i) = dp.d_target[si] * l.d_b;
  }
  out.total = out.source_risk + cfg.eta * out.discrepancy;

  // Inner player: d / d(w_aux, b_aux).
  out.grad_inner.resize(m.inner_size());
  out.grad_inner.head(m.w_aux.size()) = fs.z.transpose() * da2_s + ft.z.transpose() * da2_t;
  out.grad_inner(m.w_aux.size()) = da2_s.sum() + da2_t.sum();

  // Outer player: the representation feeds both heads.
  auto rep_grad = [&](const ForwardPass& f, const Eigen::MatrixXd& x, const Eigen::VectorXd& da,
                      const Eigen::VectorXd& da2, Eigen::MatrixXd& gw1, Eigen::VectorXd& gb1) {
    const Eigen::MatrixXd dz = da * m.w_main.transpose() + cfg.eta * (da2 * m.w_aux.transpose());
    const Eigen::MatrixXd dpre = dz.cwiseProduct(f.pre.unaryExpr([](double v) { return leaky_prime(v); }));
    gw1 += dpre.transpose() * x;
    gb1 += dpre.colwise().sum().transpose();
  };
  Eigen::MatrixXd gw1 = Eigen::MatrixXd::Zero(m.w1.rows(), m.w1.cols());
  Eigen::VectorXd gb1 = Eigen::VectorXd::Zero(m.b1.size());
  rep_grad(fs, source.points, da_s, da2_s, gw1, gb1);
  rep_grad(ft, target.points, da_t, da2_t, gw1, gb1);
  TwoHeadModel g_model = m;
  g_model.w1 = gw1;
  g_model.b1 = gb1;
  g_model.w_main = fs.z.transpose() * da_s + ft.z.transpose() * da_t;
  g_model.b_main = da_s.sum() + da_t.sum();
  out.grad_outer = g_model.outer_params();
  return out;
}

struct TrajectoryPoint {
  int step = 0;
  double discrepancy = 0.0;
  double source_risk = 0.0;
  double t = 1.0;
  std::optional<double> target_acc;  // oracle metric, never fed back
};

struct TrainState {
  TwoHeadModel model;
  int step = 0;
  std::vector<TrajectoryPoint> trajectory;
  bool exploded = false;
  int t_fallbacks = 0;
  std::vector<double> t_history;  // scale used at every outer step

  double max_abs_discrepancy() const {
    double best = 0.0;
    for (const auto& p : trajectory)
      best = std::max(best, std::isfinite(p.discrepancy) ? std::abs(p.discrepancy) : kInf);
    return best;
  }
};

inline double accuracy(const Mlp& net, const Measure& data, std::span<const double> labels) {
  const MlpCache c = mlp_forward(net, data.points);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < c.margin.size(); ++i) {
    const auto si = static_cast<std::size_t>(i);
    acc += data.weights[si] * (((c.margin(i) >= 0.0) == (labels[si] >= 0.5)) ? 1.0 : 0.0);
  }
  return acc;
}

struct TrainMetrics {
  double source_acc = 0.0;
  std::optional<double> target_acc;
  bool exploded = false;
  int steps_run = 0;
  double max_abs_discrepancy = 0.0;
};

struct TrainResult {
  TrainState state;
  TrainMetrics metrics;
};

// Runs the min-max game. The optimizer sees only a blinded copy of the pair;
// target accuracy is logged from the caller's pair when it is in oracle mode.
inline TrainResult train(const TrainConfig& cfg, const DomainPair& pair) {
  cfg.validate();
  const DomainPair blind = pair.blinded();
  const bool oracle = pair.capability() == LabelCapability::oracle;
  const Measure& source = blind.source;
  const Measure& target = blind.target;
  const auto& ys = blind.source_labels;

  TrainResult res;
  TrainState& st = res.state;
  st.model = TwoHeadModel::init(source.dim(), cfg.hidden, cfg.seed);

  auto log_point = [&](int step, double d, double risk_value, double t) {
    TrajectoryPoint p{step, d, risk_value, t, std::nullopt};
    if (oracle) p.target_acc = accuracy(st.model.main_network(), pair.target, pair.target_labels());
    st.trajectory.push_back(p);
  };

  for (int step = 0; step < cfg.outer_steps; ++step) {
    TrainConfig at = cfg;
    at.eta = cfg.eta_at(step);
    const WitnessValues g = head_witness(st.model, source, target, LossFunction{cfg.surrogate});
    const ScaleChoice sc = choose_t(g, cfg);
    if (sc.fell_back) ++st.t_fallbacks;
    st.t_history.push_back(sc.t);

    bool blew_up = false;
    for (int k = 0; k < cfg.inner_steps && cfg.eta > 0.0; ++k) {
      const ObjectiveValue ov = objective(st.model, source, ys, target, at, sc.t);
      if (!std::isfinite(ov.discrepancy) || std::abs(ov.discrepancy) > cfg.explosion_threshold ||
          !ov.grad_inner.allFinite()) {
        blew_up = true;
        log_point(step, ov.discrepancy, ov.source_risk, sc.t);
        break;
      }
      st.model.set_inner(st.model.inner_params() + cfg.inner_lr * ov.grad_inner);
    }
    if (blew_up) {
      st.exploded = true;
      st.step = step;
      break;
    }
    const ObjectiveValue ov = objective(st.model, source, ys, target, at, sc.t);
    if (!std::isfinite(ov.discrepancy) || std::abs(ov.discrepancy) > cfg.explosion_threshold) {
      st.exploded = true;
      log_point(step, ov.discrepancy, ov.source_risk, sc.t);
      st.step = step;
      break;
    }
    if (step % cfg.log_every == 0) log_point(step, ov.discrepancy, ov.source_risk, sc.t);
    st.model.set_outer(st.model.outer_params() - cfg.outer_lr * ov.grad_outer);
    st.step = step + 1;
    if (!st.model.finite()) {
      st.exploded = true;
      break;
    }
  }
  if (!st.exploded) {
    const double t = st.t_history.empty() ? 1.0 : st.t_history.back();
    const ObjectiveValue ov = objective(st.model, source, ys, target, cfg, t);
    log_point(st.step, ov.discrepancy, ov.source_risk, t);
  }

  res.metrics.exploded = st.exploded;
  res.metrics.steps_run = st.step;
  res.metrics.max_abs_discrepancy = st.max_abs_discrepancy();
  res.metrics.source_acc = accuracy(st.model.main_network(), source, ys);
  if (oracle) res.metrics.target_acc = accuracy(st.model.main_network(), pair.target, pair.target_labels());
  return res;
}

// ---------------------------------------------------------------------------
// Equivalence of the LT and shifted inner maxima over a witness family on two
// finite empirical laws.

enum class WitnessForm { free, constant, linear };

struct EquivalenceReport {
  double max_lt = 0.0;
  double max_shifted = 0.0;
  double shifted_at_lt_optimum = 0.0;
  double exact = 0.0;
  int iterations_lt = 0;
  int iterations_shifted = 0;
  bool passed = false;
};

namespace detail {

// Witness values on the shared atoms for each form. Atoms carry a scalar
// feature x_i; linear witnesses are w x + b.
inline std::vector<double> witness_on_atoms(WitnessForm form, const Eigen::VectorXd& theta,
                                            const std::vector<double>& features) {
  std::vector<double> g(features.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    switch (form) {
      case WitnessForm::free: g[i] = theta(static_cast<Eigen::Index>(i)); break;
      case WitnessForm::constant: g[i] = theta(0); break;
      case WitnessForm::linear: g[i] = theta(0) * features[i] + theta(1); break;
    }
  }
  return g;
}

inline Eigen::VectorXd witness_pullback(WitnessForm form, const std::vector<double>& d_values,
                                        const std::vector<double>& features, Eigen::Index dim) {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(dim);
  for (std::size_t i = 0; i < d_values.size(); ++i) {
    switch (form) {
      case WitnessForm::free: grad(static_cast<Eigen::Index>(i)) += d_values[i]; break;
      case WitnessForm::constant: grad(0) += d_values[i]; break;
      case WitnessForm::linear:
        grad(0) += d_values[i] * features[i];
        grad(1) += d_values[i];
        break;
    }
  }
  return grad;
}

}  // namespace detail

// Gradient ascent on both the LT and the shifted objective over the witness
// family, from zero, until the gradient norm drops below 1e-10.
inline EquivalenceReport objective_equivalence_check(const DiscreteDistribution& nu,
                                                     const DiscreteDistribution& mu,
                                                     const std::vector<double>& features,
                                                     WitnessForm form, const PhiSpec& phi,
                                                     double tol = 1e-3, int max_iterations = 200000) {
  if (phi.composite()) throw DomainError("equivalence check needs a single kernel");
  if (features.size() != nu.probs.size() || nu.support != mu.support)
    throw DomainError("equivalence check needs aligned supports and one feature per atom");
  const Eigen::Index dim = form == WitnessForm::free ? static_cast<Eigen::Index>(features.size())
                                                     : (form == WitnessForm::constant ? 1 : 2);
  auto value = [&](const Eigen::VectorXd& theta, bool shifted) {
    const auto g = detail::witness_on_atoms(form, theta, features);
    const WitnessValues w{g, nu.probs, g, mu.probs};
    return shifted ? shifted_objective(w, phi).value : lt_objective(w, phi);
  };
  // Step size halves until the objective does not decrease, then grows back.
  auto ascend = [&](bool shifted, int& iterations) {
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(dim);
    double lr = 0.5;
    double current = value(theta, shifted);
    double checkpoint = current;
    for (iterations = 0; iterations < max_iterations; ++iterations) {
      const auto g = detail::witness_on_atoms(form, theta, features);
      const WitnessValues w{g, nu.probs, g, mu.probs};
      const WitnessPartials p = shifted ? shifted_partials(w, phi) : lt_partials(w, phi);
      std::vector<double> d(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) d[i] = p.d_on_p[i] + p.d_on_q[i];
      const Eigen::VectorXd grad = detail::witness_pullback(form, d, features, dim);
      if (grad.norm() < 1e-10) return theta;
      // Stagnation at the floating-point floor counts as converged.
      if (iterations % 1000 == 0) {
        if (iterations > 0 && current - checkpoint <= 1e-14 * (1.0 + std::abs(current))) return theta;
        checkpoint = current;
      }
      while (true) {
        const Eigen::VectorXd next = theta + lr * grad;
        double v = -kInf;
        try {
          v = value(next, shifted);
        } catch (const DomainError&) {
        }
        if (std::isfinite(v) && v >= current) {
          theta = next;
          current = v;
          lr = std::min(2.0 * lr, 1e3);
          break;
        }
        lr *= 0.5;
        if (lr < 1e-200) return theta;  // no ascent direction left at this precision
      }
    }
    throw ConvergenceError("inner maximization did not converge");
  };
  EquivalenceReport r;
  const Eigen::VectorXd th_lt = ascend(false, r.iterations_lt);
  const Eigen::VectorXd th_sh = ascend(true, r.iterations_shifted);
  r.max_lt = value(th_lt, false);
  r.max_shifted = value(th_sh, true);
  r.shifted_at_lt_optimum = value(th_lt, true);
  r.exact = exact_f_divergence(nu, mu, phi);
  r.passed = std::abs(r.max_lt - r.max_shifted) <= tol && r.max_lt <= r.exact + tol &&
             r.max_shifted <= r.exact + tol;
  return r;
}

}  // namespace fdd
