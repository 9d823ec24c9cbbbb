#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fdd/bounds.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace fdd;
using namespace fdd::testing;

namespace {

struct Example {
  DomainPair pair = threshold_domains();
  HypothesisClass cls = threshold_class(0.0, 0.5, 101);
  Hypothesis h = Threshold{0.5};
  PhiSpec kl = make_phi(PhiKind::kl);
};

DiscrepancyEstimate with_value(double v) {
  DiscrepancyEstimate e;
  e.value = v;
  return e;
}

}  // namespace

TEST(LambdaStar, ThresholdExample) {
  Example ex;
  const auto l = lambda_star(ex.cls, ex.pair);
  EXPECT_EQ(l.value, 0.0);
  EXPECT_EQ(std::get<Threshold>(ex.cls.members[l.index]).c, 0.5);
  const auto set = rashomon(ex.cls, ex.pair.source, ex.pair.source_labels, 0.25);
  EXPECT_EQ(lambda_star(ex.cls, ex.pair, set.member_indices).value, 0.0);
}

TEST(LambdaStar, ClassWithoutTruthIsPositive) {
  Example ex;
  const auto cls = threshold_class(0.0, 0.4, 41);
  const auto l = lambda_star(cls, ex.pair);
  // h_0.4 misses [0.4, 0.5): 0.1 under mu plus 0.05 under nu.
  EXPECT_NEAR(l.value, 0.15, 1e-12);
  const auto set = rashomon(cls, ex.pair.source, ex.pair.source_labels, 0.2);
  EXPECT_GE(lambda_star(cls, ex.pair, set.member_indices).value, l.value);
  EXPECT_THROW(lambda_star(cls, ex.pair, {}), DomainError);
}

TEST(LambdaStar, NeedsOracleLabels) {
  Example ex;
  EXPECT_THROW(lambda_star(ex.cls, ex.pair.blinded()), LabelAccessError);
}

TEST(CrossDomainError, Examples) {
  Example ex;
  const LossFunction zo{LossKind::zero_one};
  EXPECT_EQ(cross_domain_error(ex.h, ex.h, ex.pair.source, ex.pair.target, zo).value, 0.0);
  const auto e = cross_domain_error(Threshold{0.25}, Threshold{0.5}, ex.pair.source, ex.pair.target, zo);
  EXPECT_NEAR(e.target_risk_of_source_labeler, 0.125, 1e-15);
  EXPECT_NEAR(e.source_risk_of_target_labeler, 0.25, 1e-15);
  EXPECT_NEAR(e.value, 0.125, 1e-15);
}

TEST(AbsoluteBound, MatchedDomainsAtTruth) {
  Example ex;
  const auto d = absolute_fdd(ex.h, ex.cls, ex.pair.source, ex.pair.source, ex.kl);
  const auto b = target_bound_absolute(0.0, d, 0.0);
  EXPECT_GE(b.total, 0.0);
  EXPECT_NEAR(b.total, b.component_sum(), 1e-12);
}

TEST(SlowBound, ThresholdExample) {
  Example ex;
  const auto d = fdd::fdd(ex.h, ex.cls, ex.pair.target, ex.pair.source, ex.kl);
  const auto b = target_bound_slow(0.0, d, ex.kl, 0.0);
  EXPECT_NEAR(b.total, std::sqrt(2.0 * d.value), 1e-15);
  EXPECT_NEAR(b.total, 0.512, 1e-3);
  EXPECT_NEAR(target_bound_slow(0.1, with_value(0.0), ex.kl, 0.2).total, 0.3, 1e-15);
  EXPECT_NEAR(target_bound_slow(0.0, with_value(0.36), make_phi(PhiKind::chi2), 0.0).total, 0.6, 1e-15);
  EXPECT_THROW(target_bound_slow(0.0, d, make_phi(PhiKind::jeffreys), 0.0), DomainError);
}

TEST(GeneralBound, ZeroDiscrepancyApproachesZero) {
  Example ex;
  const auto prof = cumulant_profile(ex.h, ex.cls, ex.pair.source, ex.kl);
  const auto b = target_bound_general(0.0, with_value(0.0), prof, 0.0);
  EXPECT_LT(b.discrepancy_term, 1e-6);
  EXPECT_FALSE(b.warnings.empty());
}

TEST(GeneralBound, NoWorseThanSlowForKl) {
  Example ex;
  const auto prof = cumulant_profile(ex.h, ex.cls, ex.pair.source, ex.kl);
  for (double d : {0.001, 0.01, 0.05, 0.131, 0.3, 1.0}) {
    const double general = target_bound_general(0.0, with_value(d), prof, 0.0).total;
    const double slow = target_bound_slow(0.0, with_value(d), ex.kl, 0.0).total;
    EXPECT_LE(general, slow + 1e-9) << d;
  }
}

TEST(GeneralBound, CumulantInfimumMatchesGrid) {
  // K(t) = t^2 / 2: inf_t (D + t^2/2) / t = sqrt(2 D) at t = sqrt(2 D).
  for (double d : {0.01, 0.2, 3.0}) {
    const auto r = cumulant_infimum(d, [](double t) { return 0.5 * t * t; });
    EXPECT_NEAR(r.value, std::sqrt(2.0 * d), 1e-9);
    EXPECT_NEAR(r.t, std::sqrt(2.0 * d), 1e-4);
  }
}

TEST(LocalizedBound, ThresholdExample) {
  Example ex;
  const auto set = rashomon(ex.cls, ex.pair.source, ex.pair.source_labels, 0.25);
  const auto loc = localized_fdd(ex.h, ex.cls, set, ex.pair.target, ex.pair.source, ex.pair.source_labels, 0.0, ex.kl);
  const double rsup = sup_source_disagreement(ex.h, ex.cls, set, ex.pair.source).value;
  const auto prof = cumulant_profile(ex.h, ex.cls, set.member_indices, ex.pair.source, ex.kl);
  const auto b = target_bound_localized(0.0, loc, rsup, {0.0, 0.25, 3.74, 0.1}, 0.0, prof);
  EXPECT_NEAR(b.total, loc.value / 3.74 + 0.025, 1e-12);
  EXPECT_NEAR(b.total, 0.038, 1e-3);
  EXPECT_LT(b.total, std::sqrt(0.131));
  // These constants fail the cumulant condition on this class; the report says so.
  EXPECT_FALSE(b.feasible);
  EXPECT_FALSE(b.warnings.empty());
}

TEST(LocalizedBound, RZeroLevel) {
  Example ex;
  const auto r0 = rashomon(ex.cls, ex.pair.source, ex.pair.source_labels, 0.0);
  const auto loc = localized_fdd(ex.h, ex.cls, r0, ex.pair.target, ex.pair.source, ex.pair.source_labels, 0.0, ex.kl);
  const auto prof = cumulant_profile(ex.h, ex.cls, r0.member_indices, ex.pair.source, ex.kl);
  const auto b = target_bound_localized(0.0, loc, 0.0, {0.0, 0.0, 1.26, 0.999}, 0.0, prof);
  EXPECT_EQ(b.total, 0.0);
  EXPECT_TRUE(b.feasible);
  EXPECT_THROW(target_bound_localized(0.0, loc, 0.0, {0.0, 0.0, 0.0, 0.5}, 0.0, prof), DomainError);
}

TEST(LocalizedBound, FeasibleC1IsMaximal) {
  Example ex;
  const auto set = rashomon(ex.cls, ex.pair.source, ex.pair.source_labels, 0.25);
  const auto prof = cumulant_profile(ex.h, ex.cls, set.member_indices, ex.pair.source, ex.kl);
  const auto c1 = max_feasible_c1(prof, 0.1);
  ASSERT_TRUE(c1);
  EXPECT_TRUE(localized_condition_holds(prof, *c1, 0.1));
  EXPECT_FALSE(localized_condition_holds(prof, *c1 + 1e-6, 0.1));
  // Some Bernoulli member binds the condition with equality.
  double worst = -INFINITY;
  for (std::size_t k = 0; k < prof.size(); ++k) {
    const double q = prof.mean(k);
    worst = std::max(worst, bernoulli_centered_cgf(q, *c1) - *c1 * 0.1 * q);
  }
  EXPECT_NEAR(worst, 0.0, 1e-7);
}

TEST(LambdaFree, SwapsJointRisk) {
  BoundReport b;
  b.bound_name = "slow";
  b.source_risk = 0.1;
  b.discrepancy_term = 0.2;
  b.lambda_star = 0.3;
  b.finalize();
  const auto f = lambda_free(b, CrossDomainError{0.05, 0.05, 0.4}, true);
  EXPECT_EQ(f.bound_name, "slow_lambda_free");
  EXPECT_FALSE(f.lambda_star);
  EXPECT_NEAR(f.total, 0.35, 1e-15);
  EXPECT_TRUE(f.feasible);
  EXPECT_FALSE(lambda_free(b, CrossDomainError{}, false).feasible);
}

TEST(FastRate, RemarkConstants) {
  const auto a = fastrate_constants(0.0, 0.999);
  EXPECT_EQ(a.status, FastRateStatus::ok);
  EXPECT_NEAR(a.C1, 1.256, 1e-3);
  EXPECT_NEAR(a.coefficient, 0.796, 1e-3);
  const auto b = fastrate_constants(1.0, 0.1);
  EXPECT_NEAR(b.C1, 3.74, 1e-2);
  EXPECT_NEAR(b.coefficient, 0.267, 1e-3);
}

TEST(FastRate, RootIsTightAndBelowIsFeasible) {
  Gen g(61);
  for (int i = 0; i < 200; ++i) {
    const double m = g.uniform(0, 1), c2 = g.uniform(0.01, 0.99);
    const auto r = fastrate_constants(m, c2);
    if (r.status != FastRateStatus::ok) continue;
    // Independent evaluation of both sides.
    const double lhs = (std::exp(r.C1) - r.C1 - 1.0) * (1.0 - m + c2 * c2 * m);
    EXPECT_NEAR(lhs, r.C1 * c2, 1e-8 * std::max(1.0, r.C1 * c2));
    for (double f : {0.1, 0.5, 0.9, 0.999}) {
      const double c = f * r.C1;
      EXPECT_LT((std::exp(c) - c - 1.0) * (1.0 - m + c2 * c2 * m), c * c2);
    }
  }
}

TEST(FastRate, SmallC2Degenerates) {
  // Below m = 1 the root behaves like 2 C2 / (1 - m) and vanishes with C2.
  const auto r = fastrate_constants(0.5, 1e-6);
  EXPECT_EQ(r.status, FastRateStatus::ok);
  EXPECT_NEAR(r.C1, 4e-6, 1e-8);
  EXPECT_GT(r.coefficient, 1e5);
  // At m = 1 the left factor is C2^2 and the root grows instead.
  EXPECT_GT(fastrate_constants(1.0, 1e-6).C1, 10.0);
  EXPECT_THROW(fastrate_constants(1.5, 0.5), DomainError);
  EXPECT_THROW(fastrate_constants(0.5, 1.0), DomainError);
}

TEST(Chi2Condition, BernoulliMoments) {
  EXPECT_TRUE(chi2_localized_condition(100.0, 0.01, {{0.3, 0.0}}));
  // q = 1/2, Var = 1/4: C1 / 16 <= C2 / 2, so C1 <= 0.8.
  const std::vector<Moments> half{{0.5, 0.25}};
  EXPECT_TRUE(chi2_localized_condition(0.8, 0.1, half));
  EXPECT_FALSE(chi2_localized_condition(0.8001, 0.1, half));
}

TEST(Rademacher, SingletonIsZero) {
  Eigen::MatrixXd f = Eigen::MatrixXd::Random(1, 30);
  const auto r = rademacher_empirical(f, 10000, 3);
  EXPECT_NEAR(r.value, 0.0, 3.0 * r.std_error);
}

TEST(Rademacher, PlusMinusOneIsOne) {
  Eigen::MatrixXd f(2, 1);
  f << 1.0, -1.0;
  const auto r = rademacher_empirical(f, 10000, 4);
  EXPECT_NEAR(r.value, 1.0, 3.0 * r.std_error + 1e-12);
}

TEST(Rademacher, SeededAndValidated) {
  Eigen::MatrixXd f = Eigen::MatrixXd::Random(3, 10);
  EXPECT_EQ(rademacher_empirical(f, 500, 1).value, rademacher_empirical(f, 500, 1).value);
  EXPECT_THROW(rademacher_empirical(f, 50, 1), DomainError);
  EXPECT_THROW(rademacher_empirical(Eigen::MatrixXd(0, 3), 500, 1), DomainError);
}

TEST(Rademacher, ThresholdLossClassShrinksWithN) {
  const auto cls = threshold_class(0.0, 0.5, 21);
  double prev = 1.0;
  for (std::size_t n : {16u, 64u, 256u}) {
    const auto d = threshold_domains_sampled(n, 1, 7);
    const auto r = rademacher_empirical(induced_loss_class(cls, d.source.points), 2000, 7);
    EXPECT_GT(r.value, 0.0);
    EXPECT_LT(r.value, prev);
    prev = r.value;
  }
}

TEST(Generalization, InfiniteSamplesReduceToPopulationBound) {
  GeneralizationInputs in;
  in.discrepancy = 0.131;
  in.n = INFINITY;
  in.m = INFINITY;
  const auto slow = generalization_bound(GeneralizationKind::slow, in);
  EXPECT_NEAR(slow.total, std::sqrt(2.0 * 0.131), 1e-15);
  const auto abs = generalization_bound(GeneralizationKind::absolute_kl, in);
  EXPECT_NEAR(abs.total, 0.131, 1e-15);
  EXPECT_EQ(abs.constants_flag, ConstantsFlag::proof_constants);
  EXPECT_EQ(slow.constants_flag, ConstantsFlag::unit_constants);
}

TEST(Generalization, ItemizedTermsSumToTotal) {
  GeneralizationInputs in;
  in.source_risk = 0.05;
  in.discrepancy = 0.1;
  in.rademacher_source = 0.2;
  in.rademacher_target = 0.15;
  in.n = 512;
  in.m = 512;
  in.localization = LocalizationParams{0.05, 0.25, 1.0, 0.5};
  in.sup_source_disagreement = 0.25;
  in.condition_holds = true;
  for (auto k : {GeneralizationKind::absolute_kl, GeneralizationKind::localized_kl, GeneralizationKind::slow,
                 GeneralizationKind::localized_chi2}) {
    const auto b = generalization_bound(k, in);
    EXPECT_NEAR(b.total, b.component_sum(), 1e-12);
    for (const auto& t : b.confidence_terms) EXPECT_GE(t.value, 0.0);
  }
  const auto abs = generalization_bound(GeneralizationKind::absolute_kl, in);
  EXPECT_NEAR(abs.complexity_terms[1].value, 2.0 * std::numbers::e * 0.15, 1e-15);
  EXPECT_NEAR(abs.confidence_terms[0].value, std::sqrt(std::log(2.0 / 0.05) / 1024.0), 1e-15);
}

TEST(Generalization, MissingComponentsAndBadDelta) {
  GeneralizationInputs in;
  in.n = 10;
  in.m = 10;
  EXPECT_THROW(generalization_bound(GeneralizationKind::slow, in), DomainError);
  in.discrepancy = 0.1;
  EXPECT_THROW(generalization_bound(GeneralizationKind::localized_kl, in), DomainError);
  in.delta = 1.0;
  EXPECT_THROW(generalization_bound(GeneralizationKind::slow, in), DomainError);
  EXPECT_THROW(parse_generalization_kind("bogus"), DomainError);
}

TEST(Generalization, FastRateFeasibilityFlag) {
  GeneralizationInputs in;
  in.discrepancy = 0.05;
  in.n = 100;
  in.m = 100;
  in.sup_source_disagreement = 0.25;
  in.localization = LocalizationParams{0.0, 1.0, 3.0, 0.1};
  EXPECT_TRUE(generalization_bound(GeneralizationKind::localized_kl, in).feasible);
  in.localization->C1 = 4.0;
  EXPECT_FALSE(generalization_bound(GeneralizationKind::localized_kl, in).feasible);
}

TEST(Generalization, ThresholdEndToEndDominatesPopulation) {
  const auto d = threshold_domains_sampled(512, 512, 7);
  const auto cls = threshold_class(0.0, 0.5, 101);
  const Hypothesis h = Threshold{0.5};
  const PhiSpec kl = make_phi(PhiKind::kl);
  GeneralizationInputs in;
  in.source_risk = risk(h, d.source, d.source_labels, cls.loss);
  in.discrepancy = absolute_fdd(h, cls, d.source, d.target, kl).value;
  in.rademacher_source = rademacher_empirical(induced_loss_class(cls, d.source.points), 1000, 7).value;
  in.rademacher_target = rademacher_empirical(induced_loss_class(cls, d.target.points), 1000, 7).value;
  in.n = 512;
  in.m = 512;
  const auto emp = generalization_bound(GeneralizationKind::absolute_kl, in);
  const Example ex;
  const double pop = target_bound_absolute(0.0, absolute_fdd(h, cls, ex.pair.source, ex.pair.target, kl), 0.0).total;
  EXPECT_TRUE(std::isfinite(emp.total));
  EXPECT_GE(emp.total, pop);
}
