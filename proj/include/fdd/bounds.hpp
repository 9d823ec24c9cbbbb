#pragma once

// Target-error and generalization bounds assembled as itemized reports, the
// fast-rate constant solver, and Monte Carlo Rademacher complexity.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fdd/datasets.hpp"
#include "fdd/discrepancy.hpp"
#include "fdd/hypotheses.hpp"
#include "fdd/numerics.hpp"
#include "fdd/phi.hpp"

namespace fdd {

enum class ConstantsFlag { exact, proof_constants, unit_constants };

inline const char* to_string(ConstantsFlag f) {
  switch (f) {
    case ConstantsFlag::exact: return "exact";
    case ConstantsFlag::proof_constants: return "proof_constants";
    case ConstantsFlag::unit_constants: return "unit_constants";
  }
  return "?";
}

struct BoundTerm {
  std::string name;
  double value = 0.0;
};

struct BoundInputs {
  std::optional<double> delta, n, m, r, r1, C1, C2, beta;
};

struct BoundReport {
  std::string bound_name;
  double source_risk = 0.0;
  double discrepancy_term = 0.0;
  std::optional<double> lambda_star;
  std::optional<double> lambda_star_r;
  std::optional<double> cross_domain_error;
  std::vector<BoundTerm> complexity_terms;
  std::vector<BoundTerm> confidence_terms;
  std::vector<BoundTerm> localization_terms;
  double total = 0.0;
  BoundInputs inputs;
  ConstantsFlag constants_flag = ConstantsFlag::exact;
  bool feasible = true;
  std::vector<std::string> warnings;
  std::optional<double> t_star;  // minimizing t of the cumulant form

  double component_sum() const {
    double s = source_risk + discrepancy_term + lambda_star.value_or(0.0) +
               lambda_star_r.value_or(0.0) + cross_domain_error.value_or(0.0);
    for (const auto* list : {&complexity_terms, &confidence_terms, &localization_terms})
      for (const auto& t : *list) s += t.value;
    return s;
  }

  BoundReport& finalize() {
    total = component_sum();
    return *this;
  }
};

struct LocalizationParams {
  double r1 = 0.0;
  double r = 0.0;
  double C1 = 1.0;
  double C2 = 0.5;

  double m_cap() const { return std::min(r1 + r, 1.0); }
};

// ---------------------------------------------------------------------------
// Joint-risk terms. Both read hidden target labels and are oracle-only.

struct LambdaStar {
  double value = kInf;
  std::size_t index = 0;
};

inline LambdaStar lambda_star(const HypothesisClass& cls, const DomainPair& pair,
                              const std::vector<std::size_t>& members) {
  if (members.empty()) throw DomainError("lambda* over an empty class");
  const auto& target_labels = pair.target_labels();
  LambdaStar best;
  for (std::size_t idx : members) {
    const Hypothesis& h = cls.members[idx];
    const double v = risk(h, pair.source, pair.source_labels, cls.loss) +
                     risk(h, pair.target, target_labels, cls.loss);
    if (v < best.value) best = {v, idx};
  }
  return best;
}

inline LambdaStar lambda_star(const HypothesisClass& cls, const DomainPair& pair) {
  if (!cls.enumerable()) throw DomainError("lambda* over an empty class");
  std::vector<std::size_t> all(cls.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return lambda_star(cls, pair, all);
}

struct CrossDomainError {
  double value = 0.0;
  double target_risk_of_source_labeler = 0.0;  // R_nu(f_mu)
  double source_risk_of_target_labeler = 0.0;  // R_mu(f_nu)
};

// min{ E_nu[loss(f_mu, f_nu)], E_mu[loss(f_nu, f_mu)] }.
inline CrossDomainError cross_domain_error(const Hypothesis& f_mu, const Hypothesis& f_nu,
                                           const Measure& mu, const Measure& nu,
                                           const LossFunction& loss) {
  CrossDomainError e;
  e.target_risk_of_source_labeler = disagreement(f_mu, f_nu, nu, loss).mean;
  e.source_risk_of_target_labeler = disagreement(f_nu, f_mu, mu, loss).mean;
  e.value = std::min(e.target_risk_of_source_labeler, e.source_risk_of_target_labeler);
  return e;
}

// ---------------------------------------------------------------------------
// Population target-error bounds.

// R_mu(h) + absolute discrepancy + lambda*.
inline BoundReport target_bound_absolute(double source_risk, const DiscrepancyEstimate& absolute,
                                         double lambda) {
  BoundReport b;
  b.bound_name = "absolute";
  b.source_risk = source_risk;
  b.discrepancy_term = absolute.value;
  b.lambda_star = lambda;
  return b.finalize();
}

struct CumulantInfimum {
  double value = 0.0;
  double t = 0.0;
  bool at_zero_limit = false;
};

// inf_{t > 0} (D + K(t)) / t. The ratio is quasi-convex in t (t K' - K is
// nondecreasing), hence unimodal in log t; any t gives a valid bound.
inline CumulantInfimum cumulant_infimum(double d, const std::function<double(double)>& k,
                                        double t_lo = 1e-8, double t_hi = 50.0) {
  auto ratio = [&](double u) {
    const double t = std::exp(u);
    return (d + k(t)) / t;
  };
  double lo = std::log(t_lo), hi = std::log(t_hi);
  SearchResult r;
  for (int doubling = 0;; ++doubling) {
    r = golden_section_min(ratio, lo, hi, SearchOptions{1e-10, 400, 8});
    if (hi - r.x > 1e-7 * (hi - lo) || doubling == 8) break;
    hi += std::log(2.0);
  }
  CumulantInfimum out;
  out.value = r.value;
  out.t = std::exp(r.x);
  out.at_zero_limit = r.x - lo <= 1e-7 * (hi - lo);
  return out;
}

// R_mu(h) + inf_t (D + K_mu(t)) / t + lambda*, with K_mu the cumulant
// envelope over the class.
inline BoundReport target_bound_general(double source_risk, const DiscrepancyEstimate& fdd_est,
                                        const CumulantProfile& cumulant, double lambda) {
  const double d = std::max(0.0, fdd_est.value);
  const auto inf = cumulant_infimum(d, [&](double t) { return cumulant.envelope(t); });
  BoundReport b;
  b.bound_name = "general";
  b.source_risk = source_risk;
  b.discrepancy_term = inf.value;
  b.lambda_star = lambda;
  b.t_star = inf.t;
  if (inf.at_zero_limit) b.warnings.push_back("infimum approached as t -> 0+");
  return b.finalize();
}

// R_mu(h) + sqrt(2 D / phi''(1)) + lambda*.
inline BoundReport target_bound_slow(double source_risk, const DiscrepancyEstimate& fdd_est,
                                     const PhiSpec& phi, double lambda) {
  const auto curvature = phi.curvature_at_one();
  if (!curvature) throw DomainError("kernel " + phi.name() + " has no curvature at one");
  BoundReport b;
  b.bound_name = "slow";
  b.source_risk = source_risk;
  b.discrepancy_term = std::sqrt(2.0 * std::max(0.0, fdd_est.value) / *curvature);
  b.lambda_star = lambda;
  return b.finalize();
}

// Every member of the profile satisfies K(C1) <= C1 C2 E_mu[l].
inline bool localized_condition_holds(const CumulantProfile& cumulant, double C1, double C2) {
  for (std::size_t k = 0; k < cumulant.size(); ++k)
    if (cumulant.at(k, C1) > C1 * C2 * cumulant.mean(k) + 1e-12) return false;
  return true;
}

// Largest C1 in (0, hi] meeting the condition for every member. The feasible
// set is an interval starting at 0 because K(t)/t is nondecreasing.
inline std::optional<double> max_feasible_c1(const CumulantProfile& cumulant, double C2,
                                             double hi = 50.0) {
  auto ok = [&](double c1) { return localized_condition_holds(cumulant, c1, C2); };
  if (!ok(1e-8)) return std::nullopt;
  return bisect_boundary(ok, 1e-8, hi, 1e-9);
}

// R_mu(h) + D_loc / C1 + C2 R^r_mu(h) + lambda*_r. An infeasible (C1, C2)
// still yields the report, flagged.
inline BoundReport target_bound_localized(double source_risk, const DiscrepancyEstimate& localized,
                                          double r_sup, const LocalizationParams& params,
                                          double lambda_r, const CumulantProfile& cumulant) {
  if (!(params.C1 > 0.0) || !(params.C2 > 0.0)) throw DomainError("C1 and C2 must be positive");
  BoundReport b;
  b.bound_name = "localized";
  b.source_risk = source_risk;
  b.discrepancy_term = std::max(0.0, localized.value) / params.C1;
  b.localization_terms.push_back({"c2_times_sup_source_disagreement", params.C2 * r_sup});
  b.lambda_star_r = lambda_r;
  b.inputs.r = params.r;
  b.inputs.r1 = params.r1;
  b.inputs.C1 = params.C1;
  b.inputs.C2 = params.C2;
  b.feasible = localized_condition_holds(cumulant, params.C1, params.C2);
  if (!b.feasible)
    b.warnings.push_back("cumulant condition K(C1) <= C1 C2 E[l] fails on the Rashomon set");
  return b.finalize();
}

// Swaps lambda* (or lambda*_r) for the cross-domain error. Valid when both
// labelers belong to the class; otherwise the report is flagged.
inline BoundReport lambda_free(BoundReport b, const CrossDomainError& cde, bool labelers_in_class) {
  b.bound_name += "_lambda_free";
  b.lambda_star.reset();
  b.lambda_star_r.reset();
  b.cross_domain_error = cde.value;
  if (!labelers_in_class) {
    b.feasible = false;
    b.warnings.push_back("labeling functions are not members of the class");
  }
  return b.finalize();
}

// ---------------------------------------------------------------------------
// Fast-rate constants.

enum class FastRateStatus { ok, infeasible, root_beyond_bracket };

inline const char* to_string(FastRateStatus s) {
  switch (s) {
    case FastRateStatus::ok: return "ok";
    case FastRateStatus::infeasible: return "infeasible";
    case FastRateStatus::root_beyond_bracket: return "root_beyond_bracket";
  }
  return "?";
}

struct FastRateConstants {
  double C1 = 0.0;
  double coefficient = kInf;  // 1 / C1
  FastRateStatus status = FastRateStatus::ok;
};

inline double fastrate_excess(double c1, double m_cap, double C2) {
  return (std::expm1(c1) - c1) * (1.0 - m_cap + C2 * C2 * m_cap) - c1 * C2;
}

// Largest C1 with (e^C1 - C1 - 1)(1 - m + C2^2 m) <= C1 C2, by bisection on
// [1e-8, 50]. The left side grows faster than the right past their first
// crossing, so the feasible set is (0, root].
inline FastRateConstants fastrate_constants(double m_cap, double C2) {
  if (!(m_cap >= 0.0 && m_cap <= 1.0)) throw DomainError("m must lie in [0, 1]");
  if (!(C2 > 0.0 && C2 < 1.0)) throw DomainError("C2 must lie in (0, 1)");
  auto feasible = [&](double c1) { return fastrate_excess(c1, m_cap, C2) <= 0.0; };
  FastRateConstants out;
  constexpr double lo = 1e-8, hi = 50.0;
  if (!feasible(lo)) {
    out.status = FastRateStatus::infeasible;
    return out;
  }
  if (feasible(hi)) {
    out.C1 = hi;
    out.coefficient = 1.0 / hi;
    out.status = FastRateStatus::root_beyond_bracket;
    return out;
  }
  out.C1 = bisect_boundary(feasible, lo, hi, 1e-12);
  out.coefficient = 1.0 / out.C1;
  return out;
}

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
};

// C1 Var/4 <= C2 E for every member.
inline bool chi2_localized_condition(double C1, double C2, const std::vector<Moments>& members) {
  for (const auto& m : members)
    if (C1 * m.variance / 4.0 > C2 * m.mean + 1e-15) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Rademacher complexity.

struct RademacherEstimate {
  double value = 0.0;
  std::size_t n_draws = 0;
  std::uint64_t seed = 0;
  double std_error = 0.0;
};

// E_eps[ sup_f (1/n) sum_i eps_i f(z_i) ] by Monte Carlo; rows of `values`
// are functions, columns sample points.
inline RademacherEstimate rademacher_empirical(const Eigen::MatrixXd& values, std::size_t n_draws,
                                               std::uint64_t seed) {
  if (values.rows() == 0 || values.cols() == 0)
    throw DomainError("Rademacher estimate needs a non-empty class and sample");
  if (n_draws < 100) throw DomainError("Rademacher estimate needs at least 100 draws");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  const auto n = values.cols();
  Eigen::VectorXd eps(n);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t d = 0; d < n_draws; ++d) {
    for (Eigen::Index i = 0; i < n; ++i) eps(i) = coin(rng) ? 1.0 : -1.0;
    const double sup = (values * eps).maxCoeff() / static_cast<double>(n);
    sum += sup;
    sum_sq += sup * sup;
  }
  const double k = static_cast<double>(n_draws);
  RademacherEstimate r;
  r.value = sum / k;
  r.n_draws = n_draws;
  r.seed = seed;
  const double var = std::max(0.0, sum_sq / k - r.value * r.value);
  r.std_error = std::sqrt(var / (k - 1.0));
  return r;
}

// ---------------------------------------------------------------------------
// Generalization bounds from samples.

enum class GeneralizationKind { absolute_kl, localized_kl, slow, localized_chi2 };

inline const char* to_string(GeneralizationKind k) {
  switch (k) {
    case GeneralizationKind::absolute_kl: return "absolute_kl";
    case GeneralizationKind::localized_kl: return "localized_kl";
    case GeneralizationKind::slow: return "slow";
    case GeneralizationKind::localized_chi2: return "localized_chi2";
  }
  return "?";
}

inline GeneralizationKind parse_generalization_kind(const std::string& s) {
  if (s == "absolute_kl") return GeneralizationKind::absolute_kl;
  if (s == "localized_kl") return GeneralizationKind::localized_kl;
  if (s == "slow") return GeneralizationKind::slow;
  if (s == "localized_chi2") return GeneralizationKind::localized_chi2;
  throw DomainError("unknown generalization bound kind: " + s);
}

// Empirical ingredients. n and m may be infinite, which zeroes every
// confidence term.
struct GeneralizationInputs {
  double source_risk = 0.0;                  // empirical source risk of h
  std::optional<double> discrepancy;         // empirical discrepancy (absolute, fdd or localized)
  double rademacher_source = 0.0;            // over the induced loss class (local for localized kinds)
  double rademacher_target = 0.0;
  double delta = 0.05;
  double n = 0.0;
  double m = 0.0;
  double lambda = 0.0;                       // lambda* or lambda*_r
  double beta = 1.0;
  double curvature = 1.0;                    // phi''(1) for the slow kind
  std::optional<LocalizationParams> localization;
  std::optional<double> sup_source_disagreement;
  std::optional<bool> condition_holds;
};

// sqrt(log(2/delta) / (2k)), zero at k = infinity.
inline double confidence_radius(double delta, double k) {
  if (std::isinf(k)) return 0.0;
  return std::sqrt(std::log(2.0 / delta) / (2.0 * k));
}

inline BoundReport generalization_bound(GeneralizationKind kind, const GeneralizationInputs& in) {
  if (!(in.delta > 0.0 && in.delta < 1.0)) throw DomainError("delta must lie in (0, 1)");
  if (!(in.n > 0.0) || !(in.m > 0.0)) throw DomainError("sample sizes must be positive");
  if (!in.discrepancy) throw DomainError("missing component: empirical discrepancy");
  const double d = std::max(0.0, *in.discrepancy);
  const double cn = confidence_radius(in.delta, in.n);
  const double cm = confidence_radius(in.delta, in.m);
  BoundReport b;
  b.bound_name = to_string(kind);
  b.source_risk = in.source_risk;
  b.inputs.delta = in.delta;
  b.inputs.n = in.n;
  b.inputs.m = in.m;
  switch (kind) {
    case GeneralizationKind::absolute_kl:
      b.constants_flag = ConstantsFlag::proof_constants;
      b.inputs.beta = in.beta;
      b.discrepancy_term = d;
      b.lambda_star = in.lambda;
      b.complexity_terms = {{"4_rademacher_source", 4.0 * in.rademacher_source},
                            {"2e_over_beta_rademacher_target",
                             2.0 * std::numbers::e / in.beta * in.rademacher_target}};
      b.confidence_terms = {{"source_confidence", cn}, {"target_confidence", cm}};
      break;
    case GeneralizationKind::slow:
      b.constants_flag = ConstantsFlag::unit_constants;
      b.discrepancy_term = std::sqrt(2.0 * d / in.curvature);
      b.lambda_star = in.lambda;
      b.complexity_terms = {
          {"sqrt_rademacher_sum", std::sqrt(in.rademacher_source + in.rademacher_target)},
          {"rademacher_source", in.rademacher_source}};
      b.confidence_terms = {{"sqrt_confidence_sum", std::sqrt(cn + cm)}, {"source_confidence", cn}};
      break;
    case GeneralizationKind::localized_kl:
    case GeneralizationKind::localized_chi2: {
      if (!in.localization) throw DomainError("missing component: localization parameters");
      if (!in.sup_source_disagreement) throw DomainError("missing component: sup source disagreement");
      const auto& p = *in.localization;
      if (!(p.C1 > 0.0) || !(p.C2 > 0.0)) throw DomainError("C1 and C2 must be positive");
      b.constants_flag = ConstantsFlag::unit_constants;
      b.inputs.r = p.r;
      b.inputs.r1 = p.r1;
      b.inputs.C1 = p.C1;
      b.inputs.C2 = p.C2;
      b.discrepancy_term = d / p.C1;
      b.lambda_star_r = in.lambda;
      b.localization_terms = {{"c2_times_sup_source_disagreement", p.C2 * *in.sup_source_disagreement}};
      b.complexity_terms = {{"local_rademacher_target", in.rademacher_target},
                            {"local_rademacher_source", in.rademacher_source}};
      const double ld = std::log(1.0 / in.delta);
      const double fast_n = std::isinf(in.n) ? 0.0 : ld / in.n;
      const double fast_m = std::isinf(in.m) ? 0.0 : ld / in.m;
      const double loc_n = std::isinf(in.n) ? 0.0 : std::sqrt((p.r1 + p.r) * ld / in.n);
      const double loc_m = std::isinf(in.m) ? 0.0 : std::sqrt(p.r * ld / in.m);
      b.confidence_terms = {{"fast_source_confidence", fast_n},
                            {"fast_target_confidence", fast_m},
                            {"local_source_confidence", loc_n},
                            {"local_target_confidence", loc_m}};
      if (kind == GeneralizationKind::localized_kl) {
        const auto fr = fastrate_constants(p.m_cap(), std::min(p.C2, 1.0 - 1e-12));
        b.feasible = fr.status != FastRateStatus::infeasible && p.C1 <= fr.C1 + 1e-9;
      } else {
        b.feasible = in.condition_holds.value_or(false);
      }
      if (in.condition_holds && !*in.condition_holds) b.feasible = false;
      if (!b.feasible) b.warnings.push_back("fast-rate condition on (C1, C2) is not met");
      break;
    }
  }
  return b.finalize();
}

}  // namespace fdd
