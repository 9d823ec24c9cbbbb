#pragma once

// Synthetic source/target pairs. Target labels sit behind a capability flag:
// a blinded pair throws on every read of them.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fdd/hypotheses.hpp"
#include "fdd/measure.hpp"
#include "fdd/numerics.hpp"

namespace fdd {

class LabelAccessError : public Error {
 public:
  LabelAccessError() : Error("target labels are blinded in this domain pair") {}
};

enum class DomainMode { analytic, sampled };
enum class LabelCapability { oracle, blinded };

// Uniform source and target laws on intervals, labelled by thresholds. All
// threshold-family expectations are exact after discretizing the line at the
// thresholds of interest: every such hypothesis is constant on each cell.
struct UniformThresholdSetup {
  double mu_lo = 0.0, mu_hi = 1.0;
  double nu_lo = 0.0, nu_hi = 2.0;
  double truth_mu = 0.5, truth_nu = 0.5;

  double density_mu(double x) const { return x >= mu_lo && x <= mu_hi ? 1.0 / (mu_hi - mu_lo) : 0.0; }
  double density_nu(double x) const { return x >= nu_lo && x <= nu_hi ? 1.0 / (nu_hi - nu_lo) : 0.0; }

  static double overlap(double a, double b, double lo, double hi) {
    return std::max(0.0, std::min(b, hi) - std::max(a, lo));
  }
  double mass_mu(double a, double b) const { return overlap(a, b, mu_lo, mu_hi) / (mu_hi - mu_lo); }
  double mass_nu(double a, double b) const { return overlap(a, b, nu_lo, nu_hi) / (nu_hi - nu_lo); }
};

class DomainPair {
 public:
  std::string name;
  DomainMode mode = DomainMode::sampled;
  std::uint64_t seed = 0;

  Measure source;
  std::vector<double> source_labels;
  Measure target;

  std::optional<Hypothesis> source_labeler;            // f_mu, when it is a hypothesis
  std::optional<UniformThresholdSetup> threshold;       // analytic threshold engine
  std::optional<double> feature_kl;                     // KL(target features || source features)

  LabelCapability capability() const { return capability_; }

  const std::vector<double>& target_labels() const {
    if (capability_ == LabelCapability::blinded) throw LabelAccessError();
    return target_labels_;
  }

  const std::optional<Hypothesis>& target_labeler() const {
    if (capability_ == LabelCapability::blinded) throw LabelAccessError();
    return target_labeler_;
  }

  DomainPair blinded() const {
    DomainPair out = *this;
    out.target_labels_.clear();
    out.target_labeler_.reset();
    out.capability_ = LabelCapability::blinded;
    return out;
  }

  void set_target_labels(std::vector<double> labels, std::optional<Hypothesis> labeler = std::nullopt) {
    target_labels_ = std::move(labels);
    target_labeler_ = std::move(labeler);
    capability_ = LabelCapability::oracle;
  }

 private:
  std::vector<double> target_labels_;
  std::optional<Hypothesis> target_labeler_;
  LabelCapability capability_ = LabelCapability::oracle;
};

inline std::vector<double> label_with(const Hypothesis& h, const Eigen::MatrixXd& points) {
  std::vector<double> y(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    y[static_cast<std::size_t>(i)] = static_cast<double>(predict(h, points.row(i)));
  return y;
}

inline std::vector<double> default_threshold_breakpoints() {
  std::vector<double> b;
  for (const auto& h : threshold_class(0.0, 0.5, 101).members) b.push_back(std::get<Threshold>(h).c);
  return b;
}

// Analytic threshold pair: the line is cut at every breakpoint, the interval
// ends and the truths, and each cell becomes one atom located at its left end
// and weighted by its mass under each law.
inline DomainPair threshold_domains(const std::vector<double>& breakpoints = default_threshold_breakpoints(),
                                    const UniformThresholdSetup& setup = {}) {
  std::vector<double> cuts = breakpoints;
  cuts.insert(cuts.end(), {setup.mu_lo, setup.mu_hi, setup.nu_lo, setup.nu_hi, setup.truth_mu,
                           setup.truth_nu});
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  const double lo = std::min(setup.mu_lo, setup.nu_lo);
  const double hi = std::max(setup.mu_hi, setup.nu_hi);
  std::vector<double> left;
  std::vector<double> wmu, wnu;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    if (cuts[k] < lo || cuts[k + 1] > hi) continue;
    left.push_back(cuts[k]);
    wmu.push_back(setup.mass_mu(cuts[k], cuts[k + 1]));
    wnu.push_back(setup.mass_nu(cuts[k], cuts[k + 1]));
  }
  Eigen::MatrixXd pts(static_cast<Eigen::Index>(left.size()), 1);
  for (std::size_t i = 0; i < left.size(); ++i) pts(static_cast<Eigen::Index>(i), 0) = left[i];

  DomainPair d;
  d.name = "threshold";
  d.mode = DomainMode::analytic;
  d.source.points = pts;
  d.source.weights = wmu;
  d.target.points = pts;
  d.target.weights = wnu;
  d.source_labeler = Threshold{setup.truth_mu};
  d.source_labels = label_with(Threshold{setup.truth_mu}, pts);
  d.set_target_labels(label_with(Threshold{setup.truth_nu}, pts), Hypothesis{Threshold{setup.truth_nu}});
  d.threshold = setup;
  return d;
}

// The same laws, sampled.
inline DomainPair threshold_domains_sampled(std::size_t n, std::size_t m, std::uint64_t seed,
                                            const UniformThresholdSetup& setup = {}) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> umu(setup.mu_lo, setup.mu_hi);
  std::uniform_real_distribution<double> unu(setup.nu_lo, setup.nu_hi);
  Eigen::MatrixXd xs(static_cast<Eigen::Index>(n), 1), xt(static_cast<Eigen::Index>(m), 1);
  for (std::size_t i = 0; i < n; ++i) xs(static_cast<Eigen::Index>(i), 0) = umu(rng);
  for (std::size_t i = 0; i < m; ++i) xt(static_cast<Eigen::Index>(i), 0) = unu(rng);
  DomainPair d;
  d.name = "threshold";
  d.mode = DomainMode::sampled;
  d.seed = seed;
  d.source = Measure::empirical(xs);
  d.target = Measure::empirical(xt);
  d.source_labeler = Threshold{setup.truth_mu};
  d.source_labels = label_with(Threshold{setup.truth_mu}, xs);
  d.set_target_labels(label_with(Threshold{setup.truth_nu}, xt), Hypothesis{Threshold{setup.truth_nu}});
  d.threshold = setup;
  return d;
}

// Source N(0, I), target N(shift * e1, I); labels 1[sum(x) >= 0].
inline DomainPair gaussian_shift(int dim, double mean_shift, std::size_t n, std::size_t m,
                                 std::uint64_t seed) {
  if (dim < 1) throw DomainError("gaussian_shift needs dim >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  Eigen::MatrixXd xs(static_cast<Eigen::Index>(n), dim), xt(static_cast<Eigen::Index>(m), dim);
  for (Eigen::Index i = 0; i < xs.rows(); ++i)
    for (int j = 0; j < dim; ++j) xs(i, j) = n01(rng);
  for (Eigen::Index i = 0; i < xt.rows(); ++i)
    for (int j = 0; j < dim; ++j) xt(i, j) = n01(rng) + (j == 0 ? mean_shift : 0.0);
  Linear rule;
  rule.w = Eigen::VectorXd::Ones(dim);
  rule.b = 0.0;
  DomainPair d;
  d.name = "gaussian_shift";
  d.mode = DomainMode::sampled;
  d.seed = seed;
  d.source = Measure::empirical(xs);
  d.target = Measure::empirical(xt);
  d.source_labeler = rule;
  d.source_labels = label_with(rule, xs);
  d.set_target_labels(label_with(rule, xt), Hypothesis{rule});
  d.feature_kl = 0.5 * mean_shift * mean_shift;
  return d;
}

struct TwoMoonsOptions {
  double noise = 0.1;
  double positive_fraction = 0.5;  // class balance of both domains
};

inline constexpr double kMoonsCenterX = 0.5;
inline constexpr double kMoonsCenterY = 0.25;

// Label 0: (cos a, sin a); label 1: (1 - cos a, 0.5 - sin a); a ~ U[0, pi].
inline void sample_moons(std::size_t count, double positive_fraction, double noise,
                         std::mt19937_64& rng, Eigen::MatrixXd& x, std::vector<double>& y) {
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  std::normal_distribution<double> jitter(0.0, 1.0);
  x.resize(static_cast<Eigen::Index>(count), 2);
  y.resize(count);
  const auto positives = static_cast<std::size_t>(std::llround(positive_fraction * count));
  for (std::size_t i = 0; i < count; ++i) {
    const bool inner = i >= count - positives;
    const double a = angle(rng);
    double px = inner ? 1.0 - std::cos(a) : std::cos(a);
    double py = inner ? 0.5 - std::sin(a) : std::sin(a);
    if (noise > 0.0) {
      px += noise * jitter(rng);
      py += noise * jitter(rng);
    }
    x(static_cast<Eigen::Index>(i), 0) = px;
    x(static_cast<Eigen::Index>(i), 1) = py;
    y[i] = inner ? 1.0 : 0.0;
  }
}

// Rotation by `degrees` about the centroid of the two moons.
inline Eigen::MatrixXd rotate_about_center(const Eigen::MatrixXd& x, double degrees) {
  const double a = degrees * std::numbers::pi / 180.0;
  Eigen::Matrix2d r;
  r << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  const Eigen::RowVector2d c(kMoonsCenterX, kMoonsCenterY);
  return ((x.rowwise() - c) * r.transpose()).rowwise() + c;
}

inline DomainPair two_moons(double rotation_deg, std::size_t n, std::size_t m, std::uint64_t seed,
                            const TwoMoonsOptions& opt = {}) {
  if (!(rotation_deg >= 0.0 && rotation_deg < 180.0))
    throw DomainError("two_moons rotation must lie in [0, 180)");
  if (!(opt.noise >= 0.0)) throw DomainError("two_moons noise must be nonnegative");
  std::mt19937_64 rng(seed);
  Eigen::MatrixXd xs, xt;
  std::vector<double> ys, yt;
  sample_moons(n, opt.positive_fraction, opt.noise, rng, xs, ys);
  sample_moons(m, opt.positive_fraction, opt.noise, rng, xt, yt);
  DomainPair d;
  d.name = "two_moons";
  d.mode = DomainMode::sampled;
  d.seed = seed;
  d.source = Measure::empirical(xs);
  d.source_labels = std::move(ys);
  d.target = Measure::empirical(rotate_about_center(xt, rotation_deg));
  d.set_target_labels(std::move(yt));
  return d;
}

}  // namespace fdd
