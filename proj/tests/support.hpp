#pragma once

// Hand-rolled random generators for property tests.

#include <cstdint>
#include <random>
#include <vector>

#include "fdd/fdd.hpp"

namespace fdd::testing {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin() { return integer(0, 1) == 1; }

  // Strictly positive probability vector; `floor` keeps every atom visible.
  std::vector<double> simplex(std::size_t k, double floor = 1e-3) {
    std::exponential_distribution<double> e(1.0);
    std::vector<double> p(k);
    double s = 0.0;
    for (auto& v : p) s += (v = e(rng_) + floor);
    for (auto& v : p) v /= s;
    return p;
  }

  std::vector<double> reals(std::size_t k, double lo, double hi) {
    std::vector<double> v(k);
    for (auto& x : v) x = uniform(lo, hi);
    return v;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

inline DiscreteDistribution random_distribution(Gen& g, std::size_t k) {
  return DiscreteDistribution::from_probs(g.simplex(k));
}

// Witness on the shared support of two discrete laws.
inline WitnessValues witness_on(const DiscreteDistribution& p, const DiscreteDistribution& q,
                                const std::vector<double>& g) {
  return {g, p.probs, g, q.probs};
}

// Atoms at x = 0..k-1 so lookup tables index them directly.
inline Measure atoms(const std::vector<double>& w) {
  Measure m;
  m.points.resize(static_cast<Eigen::Index>(w.size()), 1);
  for (std::size_t i = 0; i < w.size(); ++i) m.points(static_cast<Eigen::Index>(i), 0) = static_cast<double>(i);
  m.weights = w;
  return m;
}

// k-atom covariate-shift instance with a class of lookup tables that
// contains both labelers.
struct DiscreteInstance {
  DomainPair pair;
  HypothesisClass cls;
};

inline DiscreteInstance discrete_instance(Gen& g, std::size_t k = 8, std::size_t members = 9,
                                          bool shared_labeler = true) {
  DiscreteInstance out;
  out.cls.loss.kind = LossKind::zero_one;
  for (std::size_t j = 0; j < members; ++j) {
    LookupTable t;
    for (std::size_t i = 0; i < k; ++i) t.labels.push_back(g.coin() ? 1 : 0);
    out.cls.members.emplace_back(t);
  }
  const Hypothesis f_mu = out.cls.members[0];
  const Hypothesis f_nu = shared_labeler ? f_mu : out.cls.members[1];
  DomainPair& d = out.pair;
  d.name = "discrete";
  d.mode = DomainMode::analytic;
  d.source = atoms(g.simplex(k));
  d.target = atoms(g.simplex(k));
  d.source_labels = label_with(f_mu, d.source.points);
  d.source_labeler = f_mu;
  d.set_target_labels(label_with(f_nu, d.target.points), f_nu);
  return out;
}

}  // namespace fdd::testing
