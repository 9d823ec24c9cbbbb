#pragma once

// f-divergence kernels: the generator phi, its convex conjugate phi*, the
// shifted conjugate psi*(y) = phi*(y) - y, and exact divergences between
// finite distributions.

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fdd/numerics.hpp"

namespace fdd {

enum class PhiKind { kl, reverse_kl, chi2, jeffreys };

// Open interval (lower, upper) on which phi* is finite.
struct ConjugateDomain {
  double lower = -kInf;
  double upper = kInf;
  bool contains(double y) const { return y > lower && y < upper; }
};

class PhiSpec {
 public:
  PhiSpec() = default;

  PhiKind kind() const { return kind_; }
  double gamma1() const { return gamma1_; }
  double gamma2() const { return gamma2_; }

  // Jeffreys is carried as the weighted pair (gamma1 * KL, gamma2 * reverse KL).
  bool composite() const { return kind_ == PhiKind::jeffreys; }

  PhiSpec forward_component() const { return PhiSpec(PhiKind::kl); }
  PhiSpec reverse_component() const { return PhiSpec(PhiKind::reverse_kl); }

  std::string name() const {
    switch (kind_) {
      case PhiKind::kl: return "kl";
      case PhiKind::reverse_kl: return "reverse_kl";
      case PhiKind::chi2: return "chi2";
      case PhiKind::jeffreys: {
        std::ostringstream os;
        os << "jeffreys:" << gamma1_ << "," << gamma2_;
        return os.str();
      }
    }
    return "?";
  }

  double phi(double x) const {
    if (x < 0.0) throw DomainError("phi is defined on x >= 0, got " + std::to_string(x));
    switch (kind_) {
      case PhiKind::kl: return xlogx(x) - x + 1.0;
      case PhiKind::reverse_kl: return x == 0.0 ? kInf : -std::log(x);
      case PhiKind::chi2: return (x - 1.0) * (x - 1.0);
      case PhiKind::jeffreys:
        return gamma1_ * (xlogx(x) - x + 1.0) + gamma2_ * (x == 0.0 ? kInf : -std::log(x));
    }
    return 0.0;
  }

  ConjugateDomain conjugate_domain() const {
    if (kind_ == PhiKind::reverse_kl) return {-kInf, 0.0};
    return {};
  }

  double phi_star(double y) const {
    check_conjugate(y);
    switch (kind_) {
      case PhiKind::kl: return std::expm1(y);
      case PhiKind::reverse_kl: return -1.0 - std::log(-y);
      case PhiKind::chi2: return 0.25 * y * y + y;
      case PhiKind::jeffreys: break;
    }
    return 0.0;
  }

  double phi_star_prime(double y) const {
    check_conjugate(y);
    switch (kind_) {
      case PhiKind::kl: return std::exp(y);
      case PhiKind::reverse_kl: return -1.0 / y;
      case PhiKind::chi2: return 0.5 * y + 1.0;
      case PhiKind::jeffreys: break;
    }
    return 0.0;
  }

  double psi_star(double y) const { return phi_star(y) - y; }

  // phi''(1); absent for the composite kernel, whose bounds are not assembled
  // from a single curvature.
  std::optional<double> curvature_at_one() const {
    switch (kind_) {
      case PhiKind::kl: return 1.0;
      case PhiKind::reverse_kl: return 1.0;
      case PhiKind::chi2: return 2.0;
      case PhiKind::jeffreys: return std::nullopt;
    }
    return std::nullopt;
  }

  // Lipschitz constant of phi* on [0, b].
  std::optional<double> lipschitz_on(double b) const {
    if (b < 0.0) throw DomainError("lipschitz_on needs b >= 0");
    switch (kind_) {
      case PhiKind::kl: return std::exp(b);
      case PhiKind::chi2: return 0.5 * b + 1.0;
      default: return std::nullopt;
    }
  }

  friend PhiSpec make_phi(PhiKind kind, double gamma1, double gamma2);

 private:
  explicit PhiSpec(PhiKind kind, double g1 = 0.0, double g2 = 0.0)
      : kind_(kind), gamma1_(g1), gamma2_(g2) {}

  static double xlogx(double x) { return x == 0.0 ? 0.0 : x * std::log(x); }

  void check_conjugate(double y) const {
    if (composite())
      throw DomainError("composite kernel " + name() + " has no single conjugate");
    if (!conjugate_domain().contains(y)) {
      std::ostringstream os;
      os << "phi* of " << name() << " is undefined at y=" << y;
      throw DomainError(os.str());
    }
  }

  PhiKind kind_ = PhiKind::kl;
  double gamma1_ = 0.0;
  double gamma2_ = 0.0;
};

inline PhiSpec make_phi(PhiKind kind, double gamma1 = 0.5, double gamma2 = 0.5) {
  if (kind != PhiKind::jeffreys) return PhiSpec(kind);
  if (!(gamma1 >= 0.0) || !(gamma2 >= 0.0))
    throw DomainError("jeffreys weights must be nonnegative");
  if (gamma1 + gamma2 <= 0.0) throw DomainError("jeffreys weights must not both be zero");
  return PhiSpec(kind, gamma1, gamma2);
}

// "kl", "reverse_kl", "chi2", "jeffreys:g1,g2" (bare "jeffreys" means 0.5,0.5).
inline PhiSpec parse_phi(std::string_view text) {
  if (text == "kl") return make_phi(PhiKind::kl);
  if (text == "reverse_kl") return make_phi(PhiKind::reverse_kl);
  if (text == "chi2") return make_phi(PhiKind::chi2);
  if (text == "jeffreys") return make_phi(PhiKind::jeffreys, 0.5, 0.5);
  if (text.starts_with("jeffreys:")) {
    const std::string rest(text.substr(9));
    const auto comma = rest.find(',');
    if (comma == std::string::npos) throw DomainError("expected jeffreys:g1,g2");
    try {
      std::size_t used1 = 0, used2 = 0;
      const double g1 = std::stod(rest.substr(0, comma), &used1);
      const double g2 = std::stod(rest.substr(comma + 1), &used2);
      if (used1 != comma || used2 != rest.size() - comma - 1)
        throw DomainError("malformed jeffreys weights: " + rest);
      return make_phi(PhiKind::jeffreys, g1, g2);
    } catch (const std::logic_error&) {
      throw DomainError("malformed jeffreys weights: " + rest);
    }
  }
  throw DomainError("unknown kernel kind: " + std::string(text));
}

struct DiscreteDistribution {
  std::vector<std::string> support;
  std::vector<double> probs;

  // Atoms named "0", "1", ...
  static DiscreteDistribution from_probs(std::vector<double> p) {
    DiscreteDistribution d;
    for (std::size_t i = 0; i < p.size(); ++i) d.support.push_back(std::to_string(i));
    d.probs = std::move(p);
    d.validate();
    return d;
  }

  static DiscreteDistribution bernoulli(double p) { return from_probs({1.0 - p, p}); }

  void validate() const {
    if (support.size() != probs.size())
      throw DomainError("support and probability vectors differ in length");
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (!(probs[i] >= 0.0)) throw DomainError("negative probability at atom " + support[i]);
      total += probs[i];
    }
    if (std::abs(total - 1.0) > 1e-12) throw DomainError("probabilities do not sum to one");
    for (std::size_t i = 0; i < support.size(); ++i)
      for (std::size_t j = i + 1; j < support.size(); ++j)
        if (support[i] == support[j]) throw DomainError("duplicate atom " + support[i]);
  }
};

class AbsoluteContinuityError : public DomainError {
 public:
  explicit AbsoluteContinuityError(const std::string& atom)
      : DomainError("P is not absolutely continuous w.r.t. Q at atom " + atom), atom(atom) {}
  std::string atom;
};

inline double exact_f_divergence(const DiscreteDistribution& p, const DiscreteDistribution& q,
                                 const PhiSpec& phi) {
  p.validate();
  q.validate();
  if (p.support != q.support) throw DomainError("supports are not aligned");
  if (phi.composite()) {
    return phi.gamma1() * exact_f_divergence(p, q, phi.forward_component()) +
           phi.gamma2() * exact_f_divergence(q, p, phi.forward_component());
  }
  double total = 0.0;
  for (std::size_t i = 0; i < p.probs.size(); ++i) {
    const double pi = p.probs[i], qi = q.probs[i];
    if (qi == 0.0) {
      if (pi > 0.0) throw AbsoluteContinuityError(p.support[i]);
      continue;
    }
    total += qi * phi.phi(pi / qi);
  }
  return total;
}

}  // namespace fdd
