#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fdd/variational.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace fdd;
using namespace fdd::testing;

namespace {

const auto kBernP = DiscreteDistribution::bernoulli(0.75);
const auto kBernQ = DiscreteDistribution::bernoulli(0.5);

// Witness on the Bernoulli atoms {0, 1}.
WitnessValues bern_witness(double at0, double at1) { return witness_on(kBernP, kBernQ, {at0, at1}); }

double numeric_partial(const std::function<double(double)>& f, double x, double h = 1e-6) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace

TEST(LtObjective, ZeroWitness) {
  EXPECT_EQ(lt_objective(bern_witness(0, 0), make_phi(PhiKind::kl)), 0.0);
}

TEST(LtObjective, LogLikelihoodRatioAttainsKl) {
  const double v = lt_objective(bern_witness(std::log(0.5), std::log(1.5)), make_phi(PhiKind::kl));
  EXPECT_NEAR(v, kl_oracle(kBernP.probs, kBernQ.probs), 1e-14);
  EXPECT_NEAR(v, 0.130812, 1e-6);
}

TEST(LtObjective, NonPositiveWhenLawsCoincide) {
  Gen g(3);
  for (int i = 0; i < 200; ++i) {
    const auto p = random_distribution(g, 4);
    const auto w = witness_on(p, p, g.reals(4, -3, 3));
    EXPECT_LE(lt_objective(w, make_phi(PhiKind::kl)), 1e-15);
    EXPECT_LE(lt_objective(w, make_phi(PhiKind::chi2)), 1e-15);
  }
}

TEST(LtObjective, DomainViolationNamesAtom) {
  const auto w = bern_witness(-1.0, 0.5);
  try {
    lt_objective(w, make_phi(PhiKind::reverse_kl));
    FAIL() << "expected DomainError";
  } catch (const DomainError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("atom 1"), std::string::npos) << what;
    EXPECT_NE(what.find("0.5"), std::string::npos) << what;
  }
}

TEST(WitnessValues, RejectsBadWeights) {
  WitnessValues w{{0.0}, {0.5}, {0.0}, {1.0}};
  EXPECT_THROW(w.validate(), DomainError);
  WitnessValues v{{0.0, 1.0}, {1.0}, {0.0}, {1.0}};
  EXPECT_THROW(v.validate(), DomainError);
  WitnessValues nan{{NAN}, {1.0}, {0.0}, {1.0}};
  EXPECT_THROW(nan.validate(), DomainError);
}

TEST(ShiftedObjective, ConstantWitnessIsZero) {
  for (double c : {-3.0, 0.0, 0.7, 12.0}) {
    EXPECT_NEAR(shifted_objective(bern_witness(c, c), make_phi(PhiKind::kl)).value, 0.0, 1e-14);
    EXPECT_NEAR(shifted_objective(bern_witness(c, c), make_phi(PhiKind::chi2)).value, 0.0, 1e-14);
  }
}

TEST(ShiftedObjective, BernoulliExample) {
  const auto r = shifted_objective(bern_witness(0, 1), make_phi(PhiKind::kl));
  EXPECT_NEAR(r.value, 0.75 - std::log(0.5 * std::numbers::e + 0.5), 1e-15);
  EXPECT_NEAR(r.value, 0.12989, 1e-5);
  ASSERT_TRUE(r.alpha_star);
  EXPECT_NEAR(*r.alpha_star, -std::log(0.5 * std::numbers::e + 0.5), 1e-15);

  const double lt = lt_objective(bern_witness(0, 1), make_phi(PhiKind::kl));
  EXPECT_NEAR(lt, 0.75 - 0.5 * (std::numbers::e - 1.0), 1e-15);
  EXPECT_NEAR(lt, -0.109, 1e-3);
  EXPECT_GT(r.value, lt);
}

TEST(ShiftedObjective, Chi2ClosedForm) {
  Gen g(5);
  for (int i = 0; i < 100; ++i) {
    const auto p = random_distribution(g, 5);
    const auto q = random_distribution(g, 5);
    const auto w = witness_on(p, q, g.reals(5, -2, 2));
    const auto r = shifted_objective(w, make_phi(PhiKind::chi2));
    EXPECT_NEAR(r.value, mean_of(w.on_p, p.probs) - mean_of(w.on_q, q.probs) - var_of(w.on_q, q.probs) / 4.0,
                1e-12);
    EXPECT_NEAR(*r.alpha_star, -mean_of(w.on_q, q.probs), 1e-12);
  }
}

TEST(InnerInfimum, ReverseKlMatchesGridMinimum) {
  Gen g(17);
  const PhiSpec rk = make_phi(PhiKind::reverse_kl);
  for (int i = 0; i < 30; ++i) {
    const auto w = g.simplex(4);
    const auto v = g.reals(4, -2, 2);
    double vmax = -INFINITY;
    for (double x : v) vmax = std::max(vmax, x);
    // a must keep every v + a negative.
    auto neg = [&](double a) {
      double s = 0.0;
      for (std::size_t k = 0; k < v.size(); ++k) s += w[k] * (-1.0 - std::log(-(v[k] + a)));
      return -(s - a);
    };
    const auto ref = zoom_grid_max(neg, -vmax - 20.0, -vmax - 1e-9, 200, 10);
    const auto got = inner_infimum(v, w, rk);
    EXPECT_NEAR(got.value, -ref.value, 1e-9);
    EXPECT_NEAR(got.alpha, ref.x, 1e-5);
  }
}

TEST(ScaledObjective, ZeroWitness) {
  const auto r = scaled_objective(bern_witness(0, 0), make_phi(PhiKind::kl));
  EXPECT_EQ(r.value, 0.0);
}

TEST(ScaledObjective, ConstantWitnessWithSlopeIsUnbounded) {
  // Constant on Q but not on P: linear in t.
  WitnessValues w{{0.0, 1.0}, {0.5, 0.5}, {0.0, 0.0}, {0.5, 0.5}};
  EXPECT_THROW(scaled_objective(w, make_phi(PhiKind::kl)), UnboundedError);
  WitnessValues down{{-1.0, 0.0}, {0.5, 0.5}, {0.0, 0.0}, {0.5, 0.5}};
  const auto r = scaled_objective(down, make_phi(PhiKind::kl), TRange::nonneg());
  EXPECT_EQ(r.value, 0.0);
  EXPECT_TRUE(r.t_on_boundary);
}

TEST(ScaledObjective, Chi2ClosedFormAndArgmax) {
  Gen g(23);
  for (int i = 0; i < 50; ++i) {
    const auto p = random_distribution(g, 4);
    const auto q = random_distribution(g, 4);
    const auto w = witness_on(p, q, g.reals(4, -1, 1));
    const double de = mean_of(w.on_p, p.probs) - mean_of(w.on_q, q.probs);
    const double var = var_of(w.on_q, q.probs);
    const auto r = scaled_objective(w, make_phi(PhiKind::chi2));
    EXPECT_NEAR(r.value, de * de / var, 1e-9);
    EXPECT_NEAR(*r.t_star, 2.0 * de / var, 1e-6);
    EXPECT_NEAR(*r.t_star, optimal_t_chi2(mean_of(w.on_p, p.probs), mean_of(w.on_q, q.probs), var), 1e-6);
  }
}

TEST(ScaledObjective, Chi2AgainstTwoDimensionalGrid) {
  Gen g(29);
  for (int i = 0; i < 5; ++i) {
    const auto p = random_distribution(g, 3);
    const auto q = random_distribution(g, 3);
    const auto w = witness_on(p, q, g.reals(3, -1, 1));
    const auto ref = chi2_scaled_grid(w.on_p, w.weights_p, w.on_q, w.weights_q);
    const auto r = scaled_objective(w, make_phi(PhiKind::chi2));
    EXPECT_NEAR(r.value, ref.value, 1e-8);
    EXPECT_NEAR(*r.t_star, ref.x, 1e-6);
  }
}

TEST(ScaledObjective, DominatesShiftedAtUnitScale) {
  Gen g(31);
  for (auto kind : {PhiKind::kl, PhiKind::chi2, PhiKind::reverse_kl, PhiKind::jeffreys}) {
    const PhiSpec phi = make_phi(kind, 0.3, 0.7);
    for (int i = 0; i < 50; ++i) {
      const auto p = random_distribution(g, 5);
      const auto q = random_distribution(g, 5);
      const auto w = witness_on(p, q, g.reals(5, -1, 1));
      EXPECT_GE(scaled_objective(w, phi).value, shifted_objective(w, phi).value - 1e-10) << phi.name();
    }
  }
}

TEST(ScaledObjective, FixedAndNonnegRanges) {
  const auto w = bern_witness(0, 1);
  const PhiSpec kl = make_phi(PhiKind::kl);
  EXPECT_NEAR(scaled_objective(w, kl, TRange::fixed(1.0)).value, shifted_objective(w, kl).value, 1e-15);
  // Negative correlation: the unrestricted optimum has t < 0 and nonneg stops at 0.
  const auto neg = bern_witness(1, 0);
  const auto all = scaled_objective(neg, kl);
  EXPECT_LT(*all.t_star, 0.0);
  const auto nn = scaled_objective(neg, kl, TRange::nonneg());
  EXPECT_NEAR(nn.value, 0.0, 1e-12);
  EXPECT_NEAR(*nn.t_star, 0.0, 1e-9);
  EXPECT_NEAR(all.value, kl_oracle(kBernP.probs, kBernQ.probs), 1e-9);
}

TEST(TRange, Parse) {
  EXPECT_EQ(parse_t_range("all").kind, TRange::Kind::all_reals);
  EXPECT_EQ(parse_t_range("nonneg").kind, TRange::Kind::nonneg);
  const auto f = parse_t_range("fixed:1.5");
  EXPECT_EQ(f.kind, TRange::Kind::fixed);
  EXPECT_EQ(f.fixed_value, 1.5);
  EXPECT_THROW(parse_t_range("fixed:x"), DomainError);
  EXPECT_THROW(parse_t_range("positive"), DomainError);
}

TEST(OptimalT, KlQuadraticApproximation) {
  const std::vector<double> src{0.0, 1.0}, ws{0.5, 0.5};
  const std::vector<double> tgt{1.0}, wt{1.0};
  const auto r = optimal_t_kl_approx(tgt, wt, src, ws);
  const double e = std::numbers::e;
  const double m = e / (1.0 + e);
  EXPECT_NEAR(m, 0.7311, 1e-4);
  EXPECT_NEAR(m * (1.0 - m), 0.1966, 1e-4);
  EXPECT_NEAR(r.delta_t, (1.0 - m) / (m * (1.0 - m)), 1e-12);
  EXPECT_NEAR(r.delta_t, 1.368, 1e-3);
  EXPECT_NEAR(r.t_star, 1.0 + r.delta_t, 1e-15);
}

TEST(OptimalT, KlIdenticalLossesGiveGibbsOffset) {
  // Same three-atom law on both sides: delta = (E[l] - E_gibbs[l]) / Var_gibbs(l).
  const std::vector<double> l{0.0, 0.5, 2.0}, w{0.2, 0.5, 0.3};
  double z = 0.0;
  std::vector<double> gw(3);
  for (int i = 0; i < 3; ++i) z += w[i] * std::exp(l[i]);
  for (int i = 0; i < 3; ++i) gw[i] = w[i] * std::exp(l[i]) / z;
  const double expected = (mean_of(l, w) - mean_of(l, gw)) / var_of(l, gw);
  const auto r = optimal_t_kl_approx(l, w, l, w);
  EXPECT_NEAR(r.delta_t, expected, 1e-12);
  EXPECT_LT(r.delta_t, 0.0);
}

TEST(OptimalT, DegenerateVarianceThrows) {
  const std::vector<double> c{0.3, 0.3}, w{0.5, 0.5};
  EXPECT_THROW(optimal_t_kl_approx(c, w, c, w), DegenerateError);
  EXPECT_THROW(optimal_t_chi2(0.1, 0.2, 0.0), DegenerateError);
}

TEST(OptimalT, Chi2Formula) {
  EXPECT_EQ(optimal_t_chi2(0.4, 0.4, 0.3), 0.0);
  EXPECT_DOUBLE_EQ(optimal_t_chi2(0.25, 0.5, 0.25), -2.0);
}

TEST(VariationalProperty, TightnessAndLowerBound) {
  Gen g(101);
  for (int i = 0; i < 300; ++i) {
    const std::size_t k = static_cast<std::size_t>(g.integer(2, 7));
    const auto p = random_distribution(g, k);
    const auto q = random_distribution(g, k);
    const auto w = witness_on(p, q, g.reals(k, -2, 2));
    for (auto kind : {PhiKind::kl, PhiKind::chi2}) {
      const PhiSpec phi = make_phi(kind);
      const double exact = exact_f_divergence(p, q, phi);
      const double lt = lt_objective(w, phi);
      const double sh = shifted_objective(w, phi).value;
      const double sc = scaled_objective(w, phi).value;
      EXPECT_GE(sh, lt);
      EXPECT_LE(lt, exact + 1e-9);
      EXPECT_LE(sh, exact + 1e-9);
      EXPECT_LE(sc, exact + 1e-9);
    }
    for (auto kind : {PhiKind::reverse_kl, PhiKind::jeffreys}) {
      const PhiSpec phi = make_phi(kind, 0.5, 0.5);
      const double exact = exact_f_divergence(p, q, phi);
      EXPECT_LE(shifted_objective(w, phi).value, exact + 1e-9) << phi.name();
      EXPECT_LE(scaled_objective(w, phi).value, exact + 1e-9) << phi.name();
    }
  }
}

TEST(VariationalProperty, ShiftedKlMatchesDirectDv) {
  Gen g(103);
  for (int i = 0; i < 300; ++i) {
    const auto p = random_distribution(g, 6);
    const auto q = random_distribution(g, 6);
    const auto w = witness_on(p, q, g.reals(6, -5, 5));
    EXPECT_NEAR(shifted_objective(w, make_phi(PhiKind::kl)).value,
                dv_naive(w.on_p, w.weights_p, w.on_q, w.weights_q), 1e-10);
  }
}

TEST(VariationalProperty, TwoAtomAttainment) {
  Gen g(107);
  for (int i = 0; i < 20; ++i) {
    const auto p = DiscreteDistribution::from_probs(g.simplex(2, 0.1));
    const auto q = DiscreteDistribution::from_probs(g.simplex(2, 0.1));
    for (auto kind : {PhiKind::kl, PhiKind::chi2}) {
      const PhiSpec phi = make_phi(kind);
      // Both objectives are shift-invariant, so g = (0, v) spans every witness.
      // The chi2 optimum sits at v = 2 (p1 - q1) / (q0 q1), which can pass 30.
      double best = -INFINITY;
      for (int s = -50000; s <= 50000; ++s)
        best = std::max(best, shifted_objective(witness_on(p, q, {0.0, 2e-3 * s}), phi).value);
      EXPECT_NEAR(best, exact_f_divergence(p, q, phi), 1e-4) << phi.name();
    }
  }
}

TEST(Partials, ShiftedMatchFiniteDifferences) {
  Gen g(109);
  for (auto kind : {PhiKind::kl, PhiKind::chi2, PhiKind::reverse_kl, PhiKind::jeffreys}) {
    const PhiSpec phi = make_phi(kind, 0.4, 0.6);
    for (int trial = 0; trial < 5; ++trial) {
      const auto p = random_distribution(g, 4);
      const auto q = random_distribution(g, 3);
      WitnessValues w{g.reals(4, -1, 1), p.probs, g.reals(3, -1, 1), q.probs};
      const auto d = shifted_partials(w, phi);
      EXPECT_NEAR(d.value, shifted_objective(w, phi).value, 1e-12);
      // Weights are perturbed off the simplex, so evaluate the raw formula.
      auto raw = [&](const WitnessValues& x) { return detail::shifted_value(x, phi); };
      for (std::size_t i = 0; i < w.on_p.size(); ++i) {
        auto f = [&](double v) { auto x = w; x.on_p[i] = v; return raw(x); };
        auto fw = [&](double v) { auto x = w; x.weights_p[i] = v; return raw(x); };
        EXPECT_NEAR(d.d_on_p[i], numeric_partial(f, w.on_p[i]), 1e-7);
        EXPECT_NEAR(d.d_weights_p[i], numeric_partial(fw, w.weights_p[i]), 1e-6);
      }
      for (std::size_t j = 0; j < w.on_q.size(); ++j) {
        auto f = [&](double v) { auto x = w; x.on_q[j] = v; return raw(x); };
        auto fw = [&](double v) { auto x = w; x.weights_q[j] = v; return raw(x); };
        EXPECT_NEAR(d.d_on_q[j], numeric_partial(f, w.on_q[j]), 1e-7);
        EXPECT_NEAR(d.d_weights_q[j], numeric_partial(fw, w.weights_q[j]), 1e-6);
      }
    }
  }
}

TEST(Partials, ScaledFixedTMatchesFiniteDifferenceInT) {
  Gen g(113);
  const PhiSpec kl = make_phi(PhiKind::kl);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = random_distribution(g, 4);
    const auto q = random_distribution(g, 4);
    const auto w = witness_on(p, q, g.reals(4, -1, 1));
    const double t = g.uniform(-2, 2);
    const auto d = scaled_partials_fixed_t(w, kl, t);
    auto f = [&](double s) { return detail::shifted_value(w.scaled(s), kl); };
    EXPECT_NEAR(d.d_t, numeric_partial(f, t), 1e-7);
  }
}

TEST(Partials, LtMatchFiniteDifferences) {
  Gen g(127);
  for (auto kind : {PhiKind::kl, PhiKind::chi2}) {
    const PhiSpec phi = make_phi(kind);
    const auto p = random_distribution(g, 4);
    const auto q = random_distribution(g, 4);
    const auto w = witness_on(p, q, g.reals(4, -1, 1));
    const auto d = lt_partials(w, phi);
    for (std::size_t j = 0; j < w.on_q.size(); ++j) {
      auto f = [&](double v) { auto x = w; x.on_q[j] = v; return lt_objective(x, phi); };
      EXPECT_NEAR(d.d_on_q[j], numeric_partial(f, w.on_q[j]), 1e-7);
    }
  }
}
