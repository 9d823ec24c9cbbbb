#pragma once

// The threshold-learning worked example: uniform source on [0, 1], uniform
// target on [0, 2], both labelled by h_{1/2}, thresholds c in [0, 1/2].

#include <cmath>
#include <string>
#include <vector>

#include "fdd/bounds.hpp"
#include "fdd/datasets.hpp"
#include "fdd/discrepancy.hpp"
#include "fdd/hypotheses.hpp"

namespace fdd {

struct ReproRow {
  std::string name;
  double value = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string note;
};

struct ReproReport {
  std::vector<ReproRow> rows;
  bool all_passed() const {
    for (const auto& r : rows)
      if (!r.passed) return false;
    return true;
  }
};

struct ThresholdExample {
  DomainPair pair;
  HypothesisClass cls;
  Hypothesis h;
  PhiSpec phi;
};

inline ThresholdExample threshold_example(int grid = 101) {
  ThresholdExample ex{threshold_domains(), threshold_class(0.0, 0.5, grid), Threshold{0.5},
                      make_phi(PhiKind::kl)};
  if (grid != 101) {
    std::vector<double> cuts;
    for (const auto& m : ex.cls.members) cuts.push_back(std::get<Threshold>(m).c);
    ex.pair = threshold_domains(cuts);
  }
  return ex;
}

inline ReproReport reproduce_threshold_example() {
  const ThresholdExample ex = threshold_example();
  const auto& mu = ex.pair.source;
  const auto& nu = ex.pair.target;
  const auto& ys = ex.pair.source_labels;
  ReproReport rep;
  auto add = [&](std::string name, double value, double expected, double tol, std::string note = {}) {
    rep.rows.push_back({std::move(name), value, expected, tol, std::abs(value - expected) <= tol,
                        std::move(note)});
  };

  const auto full = fdd(ex.h, ex.cls, nu, mu, ex.phi, TRange::all());
  add("fdd_kl", full.value, 0.131, 1e-3);
  add("fdd_kl_t_star", full.t_star.value_or(0.0), -std::log(3.0), 1e-3, "optimum at c = 0");

  const double r = 0.25;
  const RashomonSet hr = rashomon(ex.cls, mu, ys, r);
  const auto loc = localized_fdd(ex.h, ex.cls, hr, nu, mu, ys, 0.0, ex.phi, TRange::all());
  add("localized_fdd_kl_r0.25", loc.value, 0.048, 1e-3, "unrestricted t");
  const auto loc_nonneg = localized_fdd(ex.h, ex.cls, hr, nu, mu, ys, 0.0, ex.phi, TRange::nonneg());
  add("localized_fdd_kl_r0.25_nonneg_t", loc_nonneg.value, 0.0, 1e-9, "t >= 0 gives the optimum t = 0");

  const auto rsup = sup_source_disagreement(ex.h, ex.cls, hr, mu);
  add("sup_source_disagreement_r0.25", rsup.value, 0.25, 1e-12);

  const auto lam = lambda_star(ex.cls, ex.pair);
  const auto lam_r = lambda_star(ex.cls, ex.pair, hr.member_indices);
  add("lambda_star", lam.value, 0.0, 1e-12);
  add("lambda_star_r", lam_r.value, 0.0, 1e-12);

  const LocalizationParams params{0.0, r, 3.74, 0.1};
  const auto profile = cumulant_profile(ex.h, ex.cls, hr.member_indices, mu, ex.phi);
  const auto bound = target_bound_localized(risk(ex.h, mu, ys, ex.cls.loss), loc, rsup.value, params,
                                            lam_r.value, profile);
  add("localized_bound", bound.total, 0.038, 1e-3,
      bound.feasible ? "constants feasible" : "constants fail the cumulant condition here");
  add("sqrt_fdd_kl", std::sqrt(full.value), 0.36, 5e-3);
  rep.rows.push_back({"localized_bound_below_sqrt_fdd", bound.total, std::sqrt(full.value), 0.0,
                      bound.total < std::sqrt(full.value), "strict inequality"});

  const RashomonSet h0 = rashomon(ex.cls, mu, ys, 0.0);
  const auto loc0 = localized_fdd(ex.h, ex.cls, h0, nu, mu, ys, 0.0, ex.phi, TRange::all());
  add("r0_localized_fdd_kl", loc0.value, 0.0, 1e-12, "Rashomon set is {h_1/2}");
  add("r0_sup_source_disagreement", sup_source_disagreement(ex.h, ex.cls, h0, mu).value, 0.0, 1e-12);

  const auto fr0 = fastrate_constants(0.0, 0.999);
  add("fastrate_C1_m0_c2_0.999", fr0.C1, 1.256, 1e-3);
  add("fastrate_coefficient_m0_c2_0.999", fr0.coefficient, 0.796, 1e-3);
  const auto fr1 = fastrate_constants(1.0, 0.1);
  add("fastrate_C1_m1_c2_0.1", fr1.C1, 3.74, 1e-2);
  add("fastrate_coefficient_m1_c2_0.1", fr1.coefficient, 0.267, 1e-3);
  return rep;
}

}  // namespace fdd
