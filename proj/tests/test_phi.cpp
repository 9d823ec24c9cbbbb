#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fdd/phi.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace fdd;
using fdd::testing::Gen;
using fdd::testing::chi2_oracle;
using fdd::testing::kl_oracle;

namespace {

const PhiKind kAllKinds[] = {PhiKind::kl, PhiKind::reverse_kl, PhiKind::chi2, PhiKind::jeffreys};

}  // namespace

TEST(Phi, VanishesAtOne) {
  for (auto k : kAllKinds) EXPECT_EQ(make_phi(k).phi(1.0), 0.0) << make_phi(k).name();
}

TEST(Phi, KlClosedForms) {
  const PhiSpec kl = make_phi(PhiKind::kl);
  EXPECT_EQ(kl.phi_star(0.0), 0.0);
  EXPECT_NEAR(kl.phi_star(1.0), std::numbers::e - 1.0, 1e-15);
  EXPECT_NEAR(kl.phi(2.0), 2.0 * std::log(2.0) - 1.0, 1e-15);
  EXPECT_EQ(kl.curvature_at_one().value(), 1.0);
  EXPECT_NEAR(kl.lipschitz_on(1.0).value(), std::numbers::e, 1e-15);
}

TEST(Phi, Chi2ClosedForms) {
  const PhiSpec c = make_phi(PhiKind::chi2);
  EXPECT_EQ(c.curvature_at_one().value(), 2.0);
  EXPECT_DOUBLE_EQ(c.phi(3.0), 4.0);
  EXPECT_DOUBLE_EQ(c.phi_star(2.0), 3.0);
  EXPECT_DOUBLE_EQ(c.lipschitz_on(2.0).value(), 2.0);
}

TEST(Phi, ReverseKlConjugateDomainIsNegative) {
  const PhiSpec r = make_phi(PhiKind::reverse_kl);
  EXPECT_NEAR(r.phi_star(-1.0), -1.0, 1e-15);
  EXPECT_THROW(r.phi_star(0.0), DomainError);
  EXPECT_THROW(r.phi_star(0.5), DomainError);
  EXPECT_FALSE(r.conjugate_domain().contains(0.0));
}

TEST(Phi, ConvexOnGrid) {
  for (auto k : {PhiKind::kl, PhiKind::reverse_kl, PhiKind::chi2}) {
    const PhiSpec f = make_phi(k);
    for (int i = 1; i <= 100; ++i)
      for (int j = 1; j <= 100; j += 3) {
        const double a = 0.1 * i, b = 0.1 * j;
        EXPECT_LE(f.phi(0.5 * (a + b)), 0.5 * (f.phi(a) + f.phi(b)) + 1e-12) << f.name() << " " << a << " " << b;
      }
  }
}

TEST(Phi, ConjugateDominatesIdentity) {
  for (auto k : {PhiKind::kl, PhiKind::reverse_kl, PhiKind::chi2}) {
    const PhiSpec f = make_phi(k);
    for (int i = -400; i <= 400; ++i) {
      const double y = 0.01 * i;
      if (!f.conjugate_domain().contains(y)) continue;
      EXPECT_GE(f.psi_star(y), -1e-15) << f.name() << " at " << y;
      EXPECT_NEAR(f.psi_star(y), f.phi_star(y) - y, 1e-12);
    }
  }
}

TEST(Phi, JeffreysIsComposite) {
  const PhiSpec j = make_phi(PhiKind::jeffreys, 0.3, 0.7);
  EXPECT_TRUE(j.composite());
  EXPECT_EQ(j.forward_component().kind(), PhiKind::kl);
  EXPECT_EQ(j.reverse_component().kind(), PhiKind::reverse_kl);
  EXPECT_THROW(make_phi(PhiKind::jeffreys, -0.1, 1.0), DomainError);
  EXPECT_THROW(make_phi(PhiKind::jeffreys, 0.0, 0.0), DomainError);
}

TEST(Phi, ParseNames) {
  EXPECT_EQ(parse_phi("kl").kind(), PhiKind::kl);
  EXPECT_EQ(parse_phi("reverse_kl").kind(), PhiKind::reverse_kl);
  EXPECT_EQ(parse_phi("chi2").kind(), PhiKind::chi2);
  const PhiSpec j = parse_phi("jeffreys:0.25,0.75");
  EXPECT_DOUBLE_EQ(j.gamma1(), 0.25);
  EXPECT_DOUBLE_EQ(j.gamma2(), 0.75);
  EXPECT_THROW(parse_phi("tv"), DomainError);
  EXPECT_THROW(parse_phi("jeffreys:0.5"), DomainError);
  EXPECT_THROW(parse_phi("jeffreys:a,b"), DomainError);
}

TEST(Distribution, Validation) {
  EXPECT_THROW(DiscreteDistribution::from_probs({0.5, 0.6}), DomainError);
  EXPECT_THROW(DiscreteDistribution::from_probs({1.5, -0.5}), DomainError);
  EXPECT_NO_THROW(DiscreteDistribution::from_probs({0.25, 0.75}));
}

TEST(ExactDivergence, BernoulliExamples) {
  const auto p = DiscreteDistribution::bernoulli(0.75);
  const auto q = DiscreteDistribution::bernoulli(0.5);
  EXPECT_EQ(exact_f_divergence(q, q, make_phi(PhiKind::kl)), 0.0);
  EXPECT_NEAR(exact_f_divergence(p, q, make_phi(PhiKind::chi2)), 0.25, 1e-15);
  EXPECT_NEAR(exact_f_divergence(p, q, make_phi(PhiKind::kl)), 0.75 * std::log(1.5) + 0.25 * std::log(0.5), 1e-15);
  EXPECT_NEAR(exact_f_divergence(p, q, make_phi(PhiKind::kl)), 0.130812, 1e-6);
}

TEST(ExactDivergence, AbsoluteContinuityNamesTheAtom) {
  const auto p = DiscreteDistribution::from_probs({0.5, 0.5});
  const auto q = DiscreteDistribution::from_probs({1.0, 0.0});
  try {
    exact_f_divergence(p, q, make_phi(PhiKind::kl));
    FAIL() << "expected AbsoluteContinuityError";
  } catch (const AbsoluteContinuityError& e) {
    EXPECT_NE(std::string(e.what()).find("1"), std::string::npos);
  }
}

TEST(ExactDivergence, JeffreysIsWeightedSum) {
  Gen g(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = fdd::testing::random_distribution(g, 5);
    const auto q = fdd::testing::random_distribution(g, 5);
    const double g1 = g.uniform(0, 1), g2 = g.uniform(0, 1);
    const double expected = g1 * kl_oracle(p.probs, q.probs) + g2 * kl_oracle(q.probs, p.probs);
    EXPECT_NEAR(exact_f_divergence(p, q, make_phi(PhiKind::jeffreys, g1, g2)), expected, 1e-12);
  }
}

TEST(ExactDivergenceProperty, ZeroOnIdenticalNonnegativeAndOrdered) {
  Gen g(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = static_cast<std::size_t>(g.integer(2, 9));
    const auto p = fdd::testing::random_distribution(g, k);
    const auto q = fdd::testing::random_distribution(g, k);
    for (auto kind : kAllKinds) {
      const PhiSpec f = make_phi(kind);
      EXPECT_NEAR(exact_f_divergence(p, p, f), 0.0, 1e-15);
      EXPECT_GE(exact_f_divergence(p, q, f), 0.0);
    }
    const double kl = exact_f_divergence(p, q, make_phi(PhiKind::kl));
    const double chi2 = exact_f_divergence(p, q, make_phi(PhiKind::chi2));
    EXPECT_NEAR(kl, kl_oracle(p.probs, q.probs), 1e-12);
    EXPECT_NEAR(chi2, chi2_oracle(p.probs, q.probs), 1e-12);
    EXPECT_LE(kl, std::log1p(chi2) + 1e-12);
    EXPECT_LE(std::log1p(chi2), chi2 + 1e-12);
  }
}
