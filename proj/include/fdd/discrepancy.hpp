#pragma once

// Hypothesis-class discrepancies between a source law mu and a target law nu:
//
//   absolute   sup_{h'} | E_mu[l] - I_nu(l) |
//   fdd        sup_{h', t} t E_nu[l] - I_mu(t l)
//   localized  fdd with h' restricted to a Rashomon set {R_mu <= r}
//
// where l = loss(h, h') and I_Q(g) = inf_a { E_Q[phi*(g + a)] - a }. The
// enumeration backend scans a finite class; the adversarial backend runs
// projected gradient ascent over a parametric witness family.

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fdd/hypotheses.hpp"
#include "fdd/measure.hpp"
#include "fdd/numerics.hpp"
#include "fdd/phi.hpp"
#include "fdd/variational.hpp"

namespace fdd {

enum class Family { absolute, fdd, localized };
enum class Backend { enumerate, adversarial };

inline const char* to_string(Family f) {
  switch (f) {
    case Family::absolute: return "absolute";
    case Family::fdd: return "fdd";
    case Family::localized: return "localized";
  }
  return "?";
}

inline const char* to_string(Backend b) { return b == Backend::enumerate ? "enumerate" : "adversarial"; }

struct DiscrepancyEstimate {
  double value = 0.0;
  std::optional<std::size_t> witness_index;
  std::optional<Hypothesis> witness_h_prime;
  std::optional<double> t_star;
  std::optional<double> t_star_reverse;
  std::optional<double> alpha_star;
  bool t_on_boundary = false;
  Family family = Family::fdd;
  Backend backend = Backend::enumerate;
  int iterations = 0;
};

// Values of loss(h, h') on every atom of a measure.
inline std::vector<double> loss_values(const std::vector<double>& h_scores, const Hypothesis& hp,
                                       const Measure& data, const LossFunction& loss) {
  std::vector<double> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    out[i] = loss(h_scores[i], score(hp, data.points.row(static_cast<Eigen::Index>(i))));
  return out;
}

// The witness g = loss(h, h') with P and Q given in that order.
inline WitnessValues loss_witness(const Hypothesis& h, const Hypothesis& hp, const LossFunction& loss,
                                  const Measure& p, const Measure& q) {
  return {loss_values(scores_on(h, p.points), hp, p, loss), p.weights,
          loss_values(scores_on(h, q.points), hp, q, loss), q.weights};
}

namespace detail {

inline std::vector<std::size_t> all_indices(const HypothesisClass& cls) {
  std::vector<std::size_t> idx(cls.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return idx;
}

inline void require_enumerable(const HypothesisClass& cls) {
  if (!cls.enumerable()) throw DomainError("the enumeration backend needs a non-empty finite class");
}

// Exhaustive scan; strict improvement keeps the lowest index on ties.
inline DiscrepancyEstimate scan_fdd(const Hypothesis& h, const HypothesisClass& cls,
                                    const std::vector<std::size_t>& members, const Measure& nu,
                                    const Measure& mu, const PhiSpec& phi, const TRange& range,
                                    Family family) {
  const auto h_nu = scores_on(h, nu.points);
  const auto h_mu = scores_on(h, mu.points);
  DiscrepancyEstimate best;
  best.family = family;
  best.value = -kInf;
  for (std::size_t idx : members) {
    const Hypothesis& hp = cls.members[idx];
    const WitnessValues g{loss_values(h_nu, hp, nu, cls.loss), nu.weights,
                          loss_values(h_mu, hp, mu, cls.loss), mu.weights};
    const VariationalResult r = scaled_objective(g, phi, range);
    if (r.value > best.value) {
      best.value = r.value;
      best.witness_index = idx;
      best.witness_h_prime = hp;
      best.t_star = r.t_star;
      best.t_star_reverse = r.t_star_reverse;
      best.alpha_star = r.alpha_star;
      best.t_on_boundary = r.t_on_boundary;
    }
  }
  return best;
}

}  // namespace detail

// sup_{h'} | E_mu[l] - I_nu(l) | without scaling.
inline DiscrepancyEstimate absolute_fdd(const Hypothesis& h, const HypothesisClass& cls,
                                        const Measure& mu, const Measure& nu, const PhiSpec& phi) {
  detail::require_enumerable(cls);
  const auto h_mu = scores_on(h, mu.points);
  const auto h_nu = scores_on(h, nu.points);
  DiscrepancyEstimate best;
  best.family = Family::absolute;
  best.value = -kInf;
  for (std::size_t idx = 0; idx < cls.size(); ++idx) {
    const Hypothesis& hp = cls.members[idx];
    const WitnessValues g{loss_values(h_mu, hp, mu, cls.loss), mu.weights,
                          loss_values(h_nu, hp, nu, cls.loss), nu.weights};
    const VariationalResult r = shifted_objective(g, phi);
    const double v = std::abs(r.value);
    if (v > best.value) {
      best.value = v;
      best.witness_index = idx;
      best.witness_h_prime = hp;
      best.alpha_star = r.alpha_star;
    }
  }
  return best;
}

inline DiscrepancyEstimate fdd(const Hypothesis& h, const HypothesisClass& cls, const Measure& nu,
                               const Measure& mu, const PhiSpec& phi,
                               const TRange& range = TRange::all()) {
  detail::require_enumerable(cls);
  return detail::scan_fdd(h, cls, detail::all_indices(cls), nu, mu, phi, range, Family::fdd);
}

struct RashomonSet {
  double level_r = 0.0;
  std::vector<std::size_t> member_indices;
  double min_risk = kInf;  // smallest source risk over the whole class

  bool empty() const { return member_indices.empty(); }
};

inline std::vector<double> source_risks(const HypothesisClass& cls, const Measure& mu,
                                        std::span<const double> labels) {
  detail::require_enumerable(cls);
  std::vector<double> out;
  out.reserve(cls.size());
  for (const auto& h : cls.members) out.push_back(risk(h, mu, labels, cls.loss));
  return out;
}

inline RashomonSet rashomon(const HypothesisClass& cls, const Measure& mu,
                            std::span<const double> labels, double r) {
  if (!(r >= 0.0)) throw DomainError("Rashomon level must be nonnegative");
  RashomonSet set;
  set.level_r = r;
  const auto risks = source_risks(cls, mu, labels);
  for (std::size_t i = 0; i < risks.size(); ++i) {
    set.min_risk = std::min(set.min_risk, risks[i]);
    if (risks[i] <= r + 1e-12) set.member_indices.push_back(i);
  }
  return set;
}

class OutsideRashomonError : public DomainError {
 public:
  OutsideRashomonError(double risk, double r1)
      : DomainError("hypothesis has source risk " + std::to_string(risk) +
                    " above the certified level " + std::to_string(r1)) {}
};

// fdd with h' restricted to the Rashomon set. h itself must have source
// risk at most r1.
inline DiscrepancyEstimate localized_fdd(const Hypothesis& h, const HypothesisClass& cls,
                                         const RashomonSet& set, const Measure& nu, const Measure& mu,
                                         std::span<const double> mu_labels, double r1,
                                         const PhiSpec& phi, const TRange& range = TRange::all()) {
  detail::require_enumerable(cls);
  const double rh = risk(h, mu, mu_labels, cls.loss);
  if (rh > r1 + 1e-12) throw OutsideRashomonError(rh, r1);
  if (set.empty()) {
    DiscrepancyEstimate e;
    e.family = Family::localized;
    return e;
  }
  return detail::scan_fdd(h, cls, set.member_indices, nu, mu, phi, range, Family::localized);
}

struct SupDisagreement {
  double value = 0.0;
  std::size_t index = 0;
};

// R^r_mu(h) = sup_{h' in H_r} E_mu[loss(h, h')].
inline SupDisagreement sup_source_disagreement(const Hypothesis& h, const HypothesisClass& cls,
                                               const RashomonSet& set, const Measure& mu) {
  if (set.empty()) throw DomainError("Rashomon set is empty");
  SupDisagreement best{-kInf, 0};
  for (std::size_t idx : set.member_indices) {
    const double v = disagreement(h, cls.members[idx], mu, cls.loss).mean;
    if (v > best.value) best = {v, idx};
  }
  return best;
}

// K_{h',mu}(t) = inf_a E_mu[psi*(t l + a)] = I_mu(t l) - t E_mu[l] for each
// member, and the envelope K_mu(t) = max over members.
class CumulantProfile {
 public:
  CumulantProfile(std::vector<std::vector<double>> losses, std::vector<std::size_t> indices,
                  std::vector<double> weights, PhiSpec phi)
      : losses_(std::move(losses)), indices_(std::move(indices)), weights_(std::move(weights)),
        phi_(std::move(phi)) {
    if (phi_.composite())
      throw DomainError("cumulant profile needs a single kernel, got " + phi_.name());
  }

  std::size_t size() const { return losses_.size(); }
  std::size_t class_index(std::size_t k) const { return indices_[k]; }
  const std::vector<double>& losses(std::size_t k) const { return losses_[k]; }
  const std::vector<double>& weights() const { return weights_; }
  const PhiSpec& phi() const { return phi_; }

  double mean(std::size_t k) const { return weighted_mean(losses_[k], weights_); }
  double variance(std::size_t k) const { return weighted_variance(losses_[k], weights_); }

  double at(std::size_t k, double t) const {
    if (t == 0.0) return 0.0;
    std::vector<double> tl(losses_[k]);
    for (double& v : tl) v *= t;
    const double k_val = inner_infimum(tl, weights_, phi_).value - t * mean(k);
    return std::max(0.0, k_val);
  }

  double envelope(double t) const {
    double best = 0.0;
    for (std::size_t k = 0; k < size(); ++k) best = std::max(best, at(k, t));
    return best;
  }

 private:
  std::vector<std::vector<double>> losses_;
  std::vector<std::size_t> indices_;
  std::vector<double> weights_;
  PhiSpec phi_;
};

inline CumulantProfile cumulant_profile(const Hypothesis& h, const HypothesisClass& cls,
                                        const std::vector<std::size_t>& members, const Measure& mu,
                                        const PhiSpec& phi) {
  detail::require_enumerable(cls);
  const auto h_mu = scores_on(h, mu.points);
  std::vector<std::vector<double>> losses;
  for (std::size_t idx : members) losses.push_back(loss_values(h_mu, cls.members[idx], mu, cls.loss));
  return CumulantProfile(std::move(losses), members, mu.weights, phi);
}

inline CumulantProfile cumulant_profile(const Hypothesis& h, const HypothesisClass& cls,
                                        const Measure& mu, const PhiSpec& phi) {
  return cumulant_profile(h, cls, detail::all_indices(cls), mu, phi);
}

// ---------------------------------------------------------------------------
// Adversarial backend.

// A differentiable family of witnesses theta -> loss(h, h'_theta), evaluated
// as witness values and weights on (P, Q) = (nu, mu).
class WitnessFamily {
 public:
  virtual ~WitnessFamily() = default;
  virtual Eigen::VectorXd initial() const = 0;
  virtual Eigen::VectorXd project(const Eigen::VectorXd& theta) const { return theta; }
  virtual WitnessValues values(const Eigen::VectorXd& theta) const = 0;
  // Gradient in theta of an objective whose partials in the witness values
  // and weights are given.
  virtual Eigen::VectorXd pullback(const Eigen::VectorXd& theta, const WitnessPartials& d) const = 0;
  virtual std::optional<Hypothesis> hypothesis(const Eigen::VectorXd&) const { return std::nullopt; }
};

// h'_c for c in [lo, hi] against a fixed threshold h_b, zero-one loss, under
// uniform interval laws. The loss is the indicator of [min(b,c), max(b,c)),
// so each side is a two-atom witness {0, 1} whose weights move with c.
class ThresholdWitnessFamily : public WitnessFamily {
 public:
  ThresholdWitnessFamily(double b, double lo, double hi, double start, double nu_lo, double nu_hi,
                         double mu_lo, double mu_hi)
      : b_(b), lo_(lo), hi_(hi), start_(start), nu_lo_(nu_lo), nu_hi_(nu_hi), mu_lo_(mu_lo),
        mu_hi_(mu_hi) {}

  Eigen::VectorXd initial() const override { return Eigen::VectorXd::Constant(1, start_); }

  Eigen::VectorXd project(const Eigen::VectorXd& theta) const override {
    return Eigen::VectorXd::Constant(1, std::min(hi_, std::max(lo_, theta(0))));
  }

  WitnessValues values(const Eigen::VectorXd& theta) const override {
    const double qn = mass(theta(0), nu_lo_, nu_hi_);
    const double qm = mass(theta(0), mu_lo_, mu_hi_);
    return {{0.0, 1.0}, {1.0 - qn, qn}, {0.0, 1.0}, {1.0 - qm, qm}};
  }

  Eigen::VectorXd pullback(const Eigen::VectorXd& theta, const WitnessPartials& d) const override {
    const double c = theta(0);
    const double dn = dmass(c, nu_lo_, nu_hi_);
    const double dm = dmass(c, mu_lo_, mu_hi_);
    Eigen::VectorXd g(1);
    g(0) = (d.d_weights_p[1] - d.d_weights_p[0]) * dn + (d.d_weights_q[1] - d.d_weights_q[0]) * dm;
    return g;
  }

  std::optional<Hypothesis> hypothesis(const Eigen::VectorXd& theta) const override {
    return Threshold{theta(0)};
  }

 private:
  // Uniform mass of [min(b,c), max(b,c)) on [lo, hi] and its derivative in c.
  double mass(double c, double lo, double hi) const {
    return threshold_disagreement_uniform(b_, c, lo, hi);
  }
  double dmass(double c, double lo, double hi) const {
    if (c < lo || c > hi) return 0.0;
    const double dens = 1.0 / (hi - lo);
    return c < b_ ? -dens : dens;
  }

  double b_, lo_, hi_, start_;
  double nu_lo_, nu_hi_, mu_lo_, mu_hi_;
};

// h' ranges over one-hidden-layer networks; the loss is taken on margins.
class MlpWitnessFamily : public WitnessFamily {
 public:
  MlpWitnessFamily(const Hypothesis& h, Mlp start, LossFunction loss, Measure nu, Measure mu)
      : start_(std::move(start)), loss_(loss), nu_(std::move(nu)), mu_(std::move(mu)) {
    if (loss_.kind == LossKind::zero_one)
      throw DomainError("the adversarial backend needs a differentiable loss");
    h_nu_ = margins(h, nu_);
    h_mu_ = margins(h, mu_);
  }

  Eigen::VectorXd initial() const override { return start_.flatten(); }

  WitnessValues values(const Eigen::VectorXd& theta) const override {
    const Mlp m = unflatten(theta);
    return {side(m, nu_, h_nu_), nu_.weights, side(m, mu_, h_mu_), mu_.weights};
  }

  Eigen::VectorXd pullback(const Eigen::VectorXd& theta, const WitnessPartials& d) const override {
    const Mlp m = unflatten(theta);
    return side_grad(m, nu_, h_nu_, d.d_on_p) + side_grad(m, mu_, h_mu_, d.d_on_q);
  }

  std::optional<Hypothesis> hypothesis(const Eigen::VectorXd& theta) const override {
    return unflatten(theta);
  }

 private:
  static std::vector<double> margins(const Hypothesis& h, const Measure& data) {
    std::vector<double> out(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
      out[i] = margin(h, data.points.row(static_cast<Eigen::Index>(i)));
    return out;
  }

  Mlp unflatten(const Eigen::VectorXd& theta) const {
    Mlp m = start_;
    m.assign(theta);
    return m;
  }

  std::vector<double> side(const Mlp& m, const Measure& data, const std::vector<double>& hz) const {
    const MlpCache c = mlp_forward(m, data.points);
    std::vector<double> out(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
      out[i] = loss_.on_logits(hz[i], c.margin(static_cast<Eigen::Index>(i))).value;
    return out;
  }

  Eigen::VectorXd side_grad(const Mlp& m, const Measure& data, const std::vector<double>& hz,
                            const std::vector<double>& d_values) const {
    const MlpCache c = mlp_forward(m, data.points);
    Eigen::VectorXd dz(c.margin.size());
    for (Eigen::Index i = 0; i < dz.size(); ++i)
      dz(i) = d_values[static_cast<std::size_t>(i)] *
              loss_.on_logits(hz[static_cast<std::size_t>(i)], c.margin(i)).d_b;
    return mlp_backward(m, data.points, c, dz);
  }

  Mlp start_;
  LossFunction loss_;
  Measure nu_, mu_;
  std::vector<double> h_nu_, h_mu_;
};

struct AdversarialOptions {
  int inner_steps = 5;
  double learning_rate = 0.01;
  int outer_steps = 400;
  double tolerance = 1e-12;  // stop once an outer step moves theta less than this
};

// Partials of gamma1 * shifted(t g) + gamma2 * shifted_rev(t_rev (-g)) for a
// composite kernel, or shifted(t g) otherwise.
inline WitnessPartials scaled_partials(const WitnessValues& g, const PhiSpec& phi, double t,
                                       double t_rev) {
  if (!phi.composite()) return scaled_partials_fixed_t(g, phi, t);
  WitnessPartials f = scaled_partials_fixed_t(g, phi.forward_component(), t);
  const WitnessPartials r = scaled_partials_fixed_t(g.negated(), phi.reverse_component(), t_rev);
  f.value = phi.gamma1() * f.value + phi.gamma2() * r.value;
  for (std::size_t i = 0; i < f.d_on_p.size(); ++i) {
    f.d_on_p[i] = phi.gamma1() * f.d_on_p[i] - phi.gamma2() * r.d_on_p[i];
    f.d_weights_p[i] = phi.gamma1() * f.d_weights_p[i] + phi.gamma2() * r.d_weights_p[i];
  }
  for (std::size_t j = 0; j < f.d_on_q.size(); ++j) {
    f.d_on_q[j] = phi.gamma1() * f.d_on_q[j] - phi.gamma2() * r.d_on_q[j];
    f.d_weights_q[j] = phi.gamma1() * f.d_weights_q[j] + phi.gamma2() * r.d_weights_q[j];
  }
  f.d_t = phi.gamma1() * f.d_t;
  return f;
}

// Alternating ascent: inner gradient steps on theta at fixed t, then a t
// refresh (closed form for chi2, golden section otherwise).
inline DiscrepancyEstimate fdd_adversarial(const WitnessFamily& family, const PhiSpec& phi,
                                           const TRange& range = TRange::all(),
                                           const AdversarialOptions& opt = {}) {
  Eigen::VectorXd theta = family.project(family.initial());
  auto refresh = [&](const WitnessValues& g) { return scaled_objective(g, phi, range); };
  VariationalResult cur = refresh(family.values(theta));
  int it = 0;
  for (; it < opt.outer_steps; ++it) {
    const Eigen::VectorXd before = theta;
    const double t = cur.t_star.value_or(1.0);
    const double t_rev = cur.t_star_reverse.value_or(t);
    for (int k = 0; k < opt.inner_steps; ++k) {
      const WitnessPartials d = scaled_partials(family.values(theta), phi, t, t_rev);
      theta = family.project(theta + opt.learning_rate * family.pullback(theta, d));
    }
    cur = refresh(family.values(theta));
    if ((theta - before).norm() < opt.tolerance) {
      ++it;
      break;
    }
  }
  DiscrepancyEstimate e;
  e.family = Family::fdd;
  e.backend = Backend::adversarial;
  e.value = cur.value;
  e.t_star = cur.t_star;
  e.t_star_reverse = cur.t_star_reverse;
  e.alpha_star = cur.alpha_star;
  e.t_on_boundary = cur.t_on_boundary;
  e.witness_h_prime = family.hypothesis(theta);
  e.iterations = it;
  return e;
}

}  // namespace fdd
