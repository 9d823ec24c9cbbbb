#pragma once

// JSON views of the result types and CSV writers for datasets and
// trajectories.

#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "fdd/bounds.hpp"
#include "fdd/datasets.hpp"
#include "fdd/discrepancy.hpp"
#include "fdd/hypotheses.hpp"
#include "fdd/trainer.hpp"
#include "fdd/variational.hpp"

namespace fdd {

using json = nlohmann::ordered_json;

inline constexpr const char* kSchema = "fdd-lab/1";

// JSON has no infinities; they travel as strings.
inline json number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

template <class T>
json optional_number(const std::optional<T>& v) {
  return v ? number(static_cast<double>(*v)) : json(nullptr);
}

inline json to_json(const Hypothesis& h) {
  struct Visitor {
    json operator()(const Threshold& t) const { return {{"form", "threshold"}, {"c", number(t.c)}}; }
    json operator()(const LookupTable& t) const { return {{"form", "lookup"}, {"labels", t.labels}}; }
    json operator()(const Linear& l) const {
      return {{"form", "linear"}, {"w", std::vector<double>(l.w.data(), l.w.data() + l.w.size())},
              {"b", l.b}};
    }
    json operator()(const Mlp& m) const {
      return {{"form", "mlp"}, {"hidden", m.hidden()}, {"in_dim", m.in_dim()}};
    }
  };
  return std::visit(Visitor{}, h);
}

inline json to_json(const VariationalResult& r) {
  json j{{"method", to_string(r.method)}, {"value", number(r.value)},
         {"alpha_star", optional_number(r.alpha_star)}, {"t_star", optional_number(r.t_star)}};
  if (r.t_star_reverse) j["t_star_reverse"] = number(*r.t_star_reverse);
  if (r.method == Method::scaled) j["t_on_boundary"] = r.t_on_boundary;
  return j;
}

inline json to_json(const DiscrepancyEstimate& e) {
  json j{{"family", to_string(e.family)},
         {"backend", to_string(e.backend)},
         {"value", number(e.value)},
         {"t_star", optional_number(e.t_star)},
         {"alpha_star", optional_number(e.alpha_star)},
         {"witness_index", e.witness_index ? json(*e.witness_index) : json(nullptr)},
         {"witness_h_prime", e.witness_h_prime ? to_json(*e.witness_h_prime) : json(nullptr)}};
  if (e.t_star_reverse) j["t_star_reverse"] = number(*e.t_star_reverse);
  j["t_on_boundary"] = e.t_on_boundary;
  if (e.backend == Backend::adversarial) j["iterations"] = e.iterations;
  return j;
}

inline json to_json(const std::vector<BoundTerm>& terms) {
  json j = json::object();
  for (const auto& t : terms) j[t.name] = number(t.value);
  return j;
}

inline json to_json(const BoundReport& b) {
  json inputs = json::object();
  auto put = [&](const char* k, const std::optional<double>& v) {
    if (v) inputs[k] = number(*v);
  };
  put("delta", b.inputs.delta);
  put("n", b.inputs.n);
  put("m", b.inputs.m);
  put("r", b.inputs.r);
  put("r1", b.inputs.r1);
  put("C1", b.inputs.C1);
  put("C2", b.inputs.C2);
  put("beta", b.inputs.beta);
  json comps{{"source_risk", number(b.source_risk)}, {"discrepancy_term", number(b.discrepancy_term)}};
  if (b.lambda_star) comps["lambda_star"] = number(*b.lambda_star);
  if (b.lambda_star_r) comps["lambda_star_r"] = number(*b.lambda_star_r);
  if (b.cross_domain_error) comps["cross_domain_error"] = number(*b.cross_domain_error);
  comps["complexity_terms"] = to_json(b.complexity_terms);
  comps["confidence_terms"] = to_json(b.confidence_terms);
  comps["localization_terms"] = to_json(b.localization_terms);
  json j{{"bound_name", b.bound_name}, {"components", comps},   {"total", number(b.total)},
         {"inputs", inputs},           {"constants_flag", to_string(b.constants_flag)},
         {"feasible", b.feasible},     {"warnings", b.warnings}};
  if (b.t_star) j["t_star"] = number(*b.t_star);
  return j;
}

// One row per component: name,value.
inline void write_bound_csv(std::ostream& out, const BoundReport& b) {
  out << "component,value\n";
  auto row = [&](const std::string& k, double v) { out << k << ',' << std::setprecision(17) << v << '\n'; };
  row("source_risk", b.source_risk);
  row("discrepancy_term", b.discrepancy_term);
  if (b.lambda_star) row("lambda_star", *b.lambda_star);
  if (b.lambda_star_r) row("lambda_star_r", *b.lambda_star_r);
  if (b.cross_domain_error) row("cross_domain_error", *b.cross_domain_error);
  for (const auto* list : {&b.complexity_terms, &b.confidence_terms, &b.localization_terms})
    for (const auto& t : *list) row(t.name, t.value);
  row("total", b.total);
}

inline json to_json(const FastRateConstants& c) {
  return {{"C1", number(c.C1)}, {"coefficient", number(c.coefficient)}, {"status", to_string(c.status)}};
}

inline json to_json(const RademacherEstimate& r) {
  return {{"value", number(r.value)}, {"n_draws", r.n_draws}, {"seed", r.seed},
          {"std_error", number(r.std_error)}};
}

inline json to_json(const TrainMetrics& m) {
  return {{"source_acc", number(m.source_acc)},
          {"target_acc", optional_number(m.target_acc)},
          {"exploded", m.exploded},
          {"steps_run", m.steps_run},
          {"max_abs_discrepancy", number(m.max_abs_discrepancy)}};
}

inline void write_trajectory_csv(std::ostream& out, const TrainState& st) {
  out << "step,discrepancy,source_risk,target_acc\n";
  out << std::setprecision(17);
  for (const auto& p : st.trajectory) {
    out << p.step << ',' << p.discrepancy << ',' << p.source_risk << ',';
    if (p.target_acc) out << *p.target_acc;
    out << '\n';
  }
}

// Columns x0..x{d-1}, y, domain. Target labels are left empty when blinded.
inline void write_dataset_csv(std::ostream& out, const DomainPair& pair) {
  const auto d = pair.source.dim();
  for (Eigen::Index j = 0; j < d; ++j) out << 'x' << j << ',';
  out << "y,domain\n";
  out << std::setprecision(17);
  auto rows = [&](const Measure& m, const std::vector<double>* y, const char* name) {
    for (Eigen::Index i = 0; i < m.points.rows(); ++i) {
      for (Eigen::Index j = 0; j < d; ++j) out << m.points(i, j) << ',';
      if (y) out << (*y)[static_cast<std::size_t>(i)];
      out << ',' << name << '\n';
    }
  };
  rows(pair.source, &pair.source_labels, "source");
  const bool oracle = pair.capability() == LabelCapability::oracle;
  rows(pair.target, oracle ? &pair.target_labels() : nullptr, "target");
}

// Descriptor of an analytic threshold pair.
inline json threshold_descriptor(const UniformThresholdSetup& s) {
  return {{"source", {{"law", "uniform"}, {"interval", {s.mu_lo, s.mu_hi}}, {"labeler", {{"form", "threshold"}, {"c", s.truth_mu}}}}},
          {"target", {{"law", "uniform"}, {"interval", {s.nu_lo, s.nu_hi}}, {"labeler", {{"form", "threshold"}, {"c", s.truth_nu}}}}}};
}

inline WitnessValues witness_from_json(const json& j) {
  WitnessValues g;
  g.on_p = j.at("on_p").get<std::vector<double>>();
  g.on_q = j.at("on_q").get<std::vector<double>>();
  auto weights = [](const json& src, const char* key, std::size_t n) {
    if (src.contains(key)) return src.at(key).get<std::vector<double>>();
    return std::vector<double>(n, n == 0 ? 0.0 : 1.0 / static_cast<double>(n));
  };
  g.weights_p = weights(j, "weights_p", g.on_p.size());
  g.weights_q = weights(j, "weights_q", g.on_q.size());
  return g;
}

}  // namespace fdd
