#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "fdd/numerics.hpp"

namespace fdd {

// Finitely supported probability measure on R^d. Rows of `points` are atoms;
// an empirical sample is the special case of uniform weights.
struct Measure {
  Eigen::MatrixXd points;
  std::vector<double> weights;

  static Measure empirical(Eigen::MatrixXd pts) {
    Measure m;
    const auto n = static_cast<std::size_t>(pts.rows());
    m.points = std::move(pts);
    m.weights.assign(n, n == 0 ? 0.0 : 1.0 / static_cast<double>(n));
    return m;
  }

  std::size_t size() const { return weights.size(); }
  Eigen::Index dim() const { return points.cols(); }

  void validate() const {
    if (static_cast<std::size_t>(points.rows()) != weights.size())
      throw DomainError("measure has mismatched points and weights");
    if (weights.empty()) throw DomainError("empty measure");
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw DomainError("negative atom weight");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw DomainError("atom weights do not sum to one");
  }
};

}  // namespace fdd
