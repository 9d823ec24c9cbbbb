#pragma once

// fdd-lab command dispatch. Kept in a header so tests can drive it with
// in-memory streams.

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "fdd/fdd.hpp"
#include "fdd/io.hpp"

namespace fdd::cli {

enum Status : int { kOk = 0, kUsage = 2, kNumerical = 3, kMismatch = 4 };

// Full-precision decimal text; parses back to the same double.
inline std::string exact_text(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + exact_text(v[i]);
  return s;
}

// Options registered through Echo are written back into the output header
// after parsing, with their resolved values.
class Echo {
 public:
  // `name` may carry aliases, "m-cap,m"; the first one is echoed.
  template <class T>
  CLI::Option* option(CLI::App* app, const std::string& name, T& var, const std::string& desc) {
    auto* opt = app->add_option(flags(name), var, desc);
    opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    items_.emplace_back(primary(name), [&var]() -> json { return text(var); });
    return opt;
  }

  CLI::Option* list(CLI::App* app, const std::string& name, std::vector<double>& var, const std::string& desc) {
    auto* opt = app->add_option("--" + name, var, desc)->delimiter(',');
    opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    items_.emplace_back(name, [&var]() -> json { return join(var); });
    return opt;
  }

  CLI::Option* flag(CLI::App* app, const std::string& name, bool& var, const std::string& desc) {
    auto* opt = app->add_flag(flags(name), var, desc);
    opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    items_.emplace_back(primary(name), [&var]() -> json { return var; });
    return opt;
  }

  void write(json& out) const {
    for (const auto& [name, get] : items_) out[name] = get();
  }

 private:
  static std::string primary(const std::string& name) { return name.substr(0, name.find(',')); }
  static std::string flags(const std::string& name) {
    std::string out;
    std::size_t start = 0;
    while (true) {
      const auto comma = name.find(',', start);
      out += (out.empty() ? "--" : ",--") + name.substr(start, comma - start);
      if (comma == std::string::npos) return out;
      start = comma + 1;
    }
  }
  static std::string text(const std::string& s) { return s; }
  static std::string text(double v) { return exact_text(v); }
  template <class I>
    requires std::is_integral_v<I>
  static std::string text(I v) { return std::to_string(v); }

  std::vector<std::pair<std::string, std::function<json()>>> items_;
};

struct Globals {
  std::string format = "json";
  std::string output;
  std::uint64_t seed = 0;
  std::string config;  // only consumed by the argv rewrite
};

inline std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto log = std::make_shared<spdlog::logger>("fdd-lab", sink);
  log->set_pattern("[%l] %v");
  const char* env = std::getenv("FDD_LOG");
  const std::string level = env ? env : "info";
  if (level == "quiet") log->set_level(spdlog::level::off);
  else if (level == "debug") log->set_level(spdlog::level::debug);
  else log->set_level(spdlog::level::info);
  return log;
}

// --- argv rewrite for --config --------------------------------------------

// The file holds either a flat option object or a whole previous output, whose
// "config" and "command" keys are used. File options go right after the
// subcommand path so later command-line flags win.
inline std::vector<std::string> apply_config_file(const std::vector<std::string>& args) {
  std::vector<std::string> rest;
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw CLI::ArgumentMismatch("--config needs a path");
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (path.empty()) return args;

  std::ifstream in(path);
  if (!in) throw DomainError("cannot read config file " + path);
  const json doc = json::parse(in);
  const json& opts = doc.contains("config") ? doc.at("config") : doc;
  if (!opts.is_object()) throw DomainError("config file must hold a JSON object");

  std::size_t lead = 0;
  while (lead < rest.size() && !rest[lead].empty() && rest[lead][0] != '-') ++lead;
  std::vector<std::string> out(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(lead));
  if (out.empty() && doc.contains("command")) {
    std::istringstream words(doc.at("command").get<std::string>());
    for (std::string w; words >> w;) out.push_back(w);
  }
  for (const auto& [key, value] : opts.items()) {
    if (value.is_boolean()) out.push_back("--" + key + "=" + (value.get<bool>() ? "true" : "false"));
    else if (value.is_string() && value.get<std::string>().empty()) continue;  // empty means unset
    else if (value.is_string()) out.push_back("--" + key + "=" + value.get<std::string>());
    else if (value.is_number()) out.push_back("--" + key + "=" + value.dump());
    else throw DomainError("config value for " + key + " must be a string, number or bool");
  }
  out.insert(out.end(), rest.begin() + static_cast<std::ptrdiff_t>(lead), rest.end());
  return out;
}

// --- shared setup -----------------------------------------------------------

struct TaskOptions {
  std::string task = "threshold";
  double rotation = 30.0;
  std::size_t n = 300;
  std::size_t m = 300;
  int dim = 2;
  double shift = 1.0;

  void add(CLI::App* app, Echo& echo, bool with_threshold) {
    echo.option(app, "task", task,
                with_threshold ? "threshold | threshold-sampled | gaussian | two-moons" : "two-moons | gaussian")
        ->check(with_threshold ? CLI::IsMember({"threshold", "threshold-sampled", "gaussian", "two-moons"})
                               : CLI::IsMember({"two-moons", "gaussian"}));
    echo.option(app, "rotation", rotation, "two-moons target rotation in degrees");
    echo.option(app, "n", n, "source sample size");
    echo.option(app, "m", m, "target sample size");
    echo.option(app, "dim", dim, "gaussian feature dimension");
    echo.option(app, "shift", shift, "gaussian target mean shift along e1");
  }

  DomainPair make(std::uint64_t seed, const std::vector<double>& breakpoints = {}) const {
    if (task == "threshold")
      return breakpoints.empty() ? threshold_domains() : threshold_domains(breakpoints);
    if (task == "threshold-sampled") return threshold_domains_sampled(n, m, seed);
    if (task == "gaussian") return gaussian_shift(dim, shift, n, m, seed);
    return two_moons(rotation, n, m, seed);
  }
};

struct ClassOptions {
  std::string cls = "threshold";
  double lo = 0.0;
  double hi = 0.5;
  int grid = 101;
  std::string loss = "zero_one";
  int hidden = 16;

  void add(CLI::App* app, Echo& echo) {
    echo.option(app, "class", cls, "threshold | linear | mlp")->check(CLI::IsMember({"threshold", "linear", "mlp"}));
    echo.option(app, "lo", lo, "smallest threshold");
    echo.option(app, "hi", hi, "largest threshold");
    echo.option(app, "grid", grid, "number of thresholds");
    echo.option(app, "loss", loss, "zero_one | bounded_sigmoid_disagreement | surrogate_unbounded");
    echo.option(app, "hidden", hidden, "mlp hidden width");
  }

  HypothesisClass make(Eigen::Index in_dim) const {
    const LossKind kind = parse_loss(loss);
    if (cls == "threshold") return threshold_class(lo, hi, grid, kind);
    ParametricFamily fam;
    fam.form = cls == "mlp" ? ParametricFamily::Form::mlp : ParametricFamily::Form::linear;
    fam.in_dim = in_dim;
    fam.hidden = hidden;
    return parametric_class(fam, kind);
  }

  std::vector<double> grid_points() const {
    std::vector<double> cuts;
    for (const auto& h : threshold_class(lo, hi, grid).members) cuts.push_back(std::get<Threshold>(h).c);
    return cuts;
  }
};

// Threshold domains cut at the class grid and at h, so every loss is exact.
inline DomainPair analytic_pair(const TaskOptions& task, const ClassOptions& cls, double h,
                                std::uint64_t seed) {
  if (task.task != "threshold" || cls.cls != "threshold") return task.make(seed);
  auto cuts = cls.grid_points();
  cuts.push_back(h);
  return task.make(seed, cuts);
}

inline bool member_of(const HypothesisClass& cls, const Hypothesis& h) {
  const auto* t = std::get_if<Threshold>(&h);
  if (!t) return false;
  for (const auto& m : cls.members)
    if (const auto* c = std::get_if<Threshold>(&m); c && std::abs(c->c - t->c) <= 1e-12) return true;
  return false;
}

// --- dispatch ---------------------------------------------------------------

struct Emit {
  std::string command;
  json config = json::object();
  json result;
  std::function<void(std::ostream&)> csv;  // set when the command has a CSV form
};

inline int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  auto log = make_logger(err);

  CLI::App app{"Laboratory for f-divergence domain discrepancies and bounds", "fdd-lab"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  Globals g;
  Echo global_echo;
  global_echo.option(&app, "format", g.format, "json | csv")->check(CLI::IsMember({"json", "csv"}));
  bool csv = false;
  global_echo.flag(&app, "csv", csv, "shorthand for --format csv");
  global_echo.option(&app, "output", g.output, "write the result here instead of stdout");
  global_echo.option(&app, "seed", g.seed, "seed for every stochastic step (default 0)");
  app.add_option("--config", g.config, "JSON file of options; command-line flags override it");

  Emit emit;
  std::function<Emit()> run;

  // phi
  auto* phi_cmd = app.add_subcommand("phi", "Evaluate a kernel and its convex conjugate");
  Echo phi_echo;
  std::string phi_name = "kl";
  std::vector<double> phi_x{1.0}, phi_y;
  phi_echo.option(phi_cmd, "phi", phi_name, "kl | reverse_kl | chi2 | jeffreys:g1,g2");
  phi_echo.list(phi_cmd, "x", phi_x, "points for phi");
  phi_echo.list(phi_cmd, "y", phi_y, "points for the conjugate");
  phi_cmd->callback([&] {
    run = [&] {
      const PhiSpec phi = parse_phi(phi_name);
      json r{{"kernel", phi.name()}};
      json xs = json::array();
      for (double x : phi_x) xs.push_back({{"x", number(x)}, {"phi", number(phi.phi(x))}});
      json ys = json::array();
      for (double y : phi_y) ys.push_back({{"y", number(y)}, {"phi_star", number(phi.phi_star(y))}});
      r["phi"] = xs;
      r["phi_star"] = ys;
      r["curvature_at_one"] = optional_number(phi.curvature_at_one());
      const auto dom = phi.conjugate_domain();
      r["conjugate_domain"] = {number(dom.lower), number(dom.upper)};
      Emit e;
      e.command = "phi";
      phi_echo.write(e.config);
      e.result = r;
      return e;
    };
  });

  // estimate
  auto* est_cmd = app.add_subcommand("estimate", "Variational objectives for a witness on two laws");
  Echo est_echo;
  std::string est_input, est_phi = "kl", est_method = "all", est_range = "all";
  std::vector<double> est_g, est_p, est_q, est_on_p, est_on_q, est_wp, est_wq;
  est_echo.option(est_cmd, "input", est_input, "JSON with on_p, on_q and optional weights_p, weights_q");
  est_echo.option(est_cmd, "phi", est_phi, "kernel");
  est_echo.option(est_cmd, "method", est_method, "lt | shifted | scaled | all")
      ->check(CLI::IsMember({"lt", "shifted", "scaled", "all"}));
  est_echo.option(est_cmd, "t-range", est_range, "all | nonneg | fixed:<t>");
  est_echo.list(est_cmd, "g", est_g, "witness on a shared finite support");
  est_echo.list(est_cmd, "p", est_p, "probabilities of P on that support");
  est_echo.list(est_cmd, "q", est_q, "probabilities of Q on that support");
  est_echo.list(est_cmd, "on-p", est_on_p, "witness values on P atoms");
  est_echo.list(est_cmd, "on-q", est_on_q, "witness values on Q atoms");
  est_echo.list(est_cmd, "weights-p", est_wp, "P atom weights (uniform when omitted)");
  est_echo.list(est_cmd, "weights-q", est_wq, "Q atom weights (uniform when omitted)");
  est_cmd->callback([&] {
    run = [&] {
      const PhiSpec phi = parse_phi(est_phi);
      WitnessValues w;
      json r = json::object();
      if (!est_input.empty()) {
        std::ifstream in(est_input);
        if (!in) throw DomainError("cannot read " + est_input);
        w = witness_from_json(json::parse(in));
      } else if (!est_g.empty()) {
        if (est_p.size() != est_g.size() || est_q.size() != est_g.size())
          throw DomainError("--g, --p and --q need equal lengths");
        w = {est_g, est_p, est_g, est_q};
        try {
          r["exact_divergence"] = number(exact_f_divergence(DiscreteDistribution::from_probs(est_p),
                                                            DiscreteDistribution::from_probs(est_q), phi));
        } catch (const AbsoluteContinuityError&) {
          r["exact_divergence"] = "inf";
        }
      } else {
        auto uniform = [](std::size_t k) { return std::vector<double>(k, k ? 1.0 / static_cast<double>(k) : 0.0); };
        w = {est_on_p, est_wp.empty() ? uniform(est_on_p.size()) : est_wp, est_on_q,
             est_wq.empty() ? uniform(est_on_q.size()) : est_wq};
      }
      w.validate();
      const TRange range = parse_t_range(est_range);
      json methods = json::object();
      if (est_method == "all" || est_method == "lt") methods["lt"] = number(lt_objective(w, phi));
      if (est_method == "all" || est_method == "shifted") methods["shifted"] = to_json(shifted_objective(w, phi));
      if (est_method == "all" || est_method == "scaled") methods["scaled"] = to_json(scaled_objective(w, phi, range));
      r["kernel"] = phi.name();
      r["objectives"] = methods;
      Emit e;
      e.command = "estimate";
      est_echo.write(e.config);
      e.result = r;
      return e;
    };
  });

  // fdd compute
  auto* fdd_cmd = app.add_subcommand("fdd", "Hypothesis-class discrepancies");
  fdd_cmd->require_subcommand(1);
  auto* fdd_compute = fdd_cmd->add_subcommand("compute", "Compute a discrepancy for a fixed h");
  fdd_compute->set_help_flag("--help", "Print this help message and exit");  // --h is the hypothesis
  Echo fdd_echo;
  TaskOptions fdd_task;
  ClassOptions fdd_cls;
  std::string fdd_phi = "kl", fdd_family = "fdd", fdd_range = "all", fdd_backend = "enumerate";
  double fdd_h = 0.5, fdd_r = 0.25, fdd_r1 = 0.0;
  int fdd_steps = 400;
  fdd_task.add(fdd_compute, fdd_echo, true);
  fdd_cls.add(fdd_compute, fdd_echo);
  fdd_echo.option(fdd_compute, "phi", fdd_phi, "kernel");
  auto* family_opt = fdd_echo.option(fdd_compute, "family", fdd_family, "fdd | absolute | localized")
      ->check(CLI::IsMember({"fdd", "absolute", "localized"}));
  fdd_echo.option(fdd_compute, "h", fdd_h, "threshold of the fixed hypothesis (threshold class)");
  auto* rashomon_opt = fdd_echo.option(fdd_compute, "r,rashomon", fdd_r, "Rashomon level; giving it selects the localized family");
  fdd_echo.option(fdd_compute, "r1", fdd_r1, "certified source risk level of h");
  fdd_echo.option(fdd_compute, "t-range", fdd_range, "all | nonneg | fixed:<t>");
  fdd_echo.option(fdd_compute, "backend", fdd_backend, "enumerate | adversarial")
      ->check(CLI::IsMember({"enumerate", "adversarial"}));
  fdd_echo.option(fdd_compute, "steps", fdd_steps, "outer steps of the adversarial backend");
  fdd_compute->callback([&] {
    run = [&] {
      if (rashomon_opt->count() > 0 && family_opt->count() == 0) fdd_family = "localized";
      const PhiSpec phi = parse_phi(fdd_phi);
      const TRange range = parse_t_range(fdd_range);
      const DomainPair pair = analytic_pair(fdd_task, fdd_cls, fdd_h, g.seed);
      const HypothesisClass cls = fdd_cls.make(pair.source.dim());
      std::mt19937_64 rng(g.seed);
      json r = json::object();
      DiscrepancyEstimate est;
      Hypothesis h = Threshold{fdd_h};
      if (cls.parametric) h = cls.parametric->sample(rng);
      if (fdd_backend == "adversarial" || cls.parametric) {
        if (fdd_family != "fdd") throw DomainError("the adversarial backend computes the fdd family only");
        AdversarialOptions opt;
        opt.outer_steps = fdd_steps;
        if (cls.parametric) {
          if (cls.parametric->form != ParametricFamily::Form::mlp)
            throw DomainError("the adversarial backend needs the mlp class");
          const MlpWitnessFamily fam(h, std::get<Mlp>(cls.parametric->sample(rng)), cls.loss, pair.target,
                                     pair.source);
          est = fdd_adversarial(fam, phi, range, opt);
        } else {
          if (!pair.threshold) throw DomainError("the adversarial threshold family needs the threshold task");
          const auto& s = *pair.threshold;
          const ThresholdWitnessFamily fam(fdd_h, fdd_cls.lo, fdd_cls.hi, 0.5 * (fdd_cls.lo + fdd_cls.hi),
                                           s.nu_lo, s.nu_hi, s.mu_lo, s.mu_hi);
          est = fdd_adversarial(fam, phi, range, opt);
        }
      } else if (fdd_family == "absolute") {
        est = absolute_fdd(h, cls, pair.source, pair.target, phi);
      } else if (fdd_family == "fdd") {
        est = fdd(h, cls, pair.target, pair.source, phi, range);
      } else {
        const RashomonSet set = rashomon(cls, pair.source, pair.source_labels, fdd_r);
        est = localized_fdd(h, cls, set, pair.target, pair.source, pair.source_labels, fdd_r1, phi, range);
        r["rashomon"] = {{"r", number(fdd_r)},
                         {"size", set.member_indices.size()},
                         {"min_risk", number(set.min_risk)}};
      }
      r["kernel"] = phi.name();
      r["h"] = to_json(h);
      r["estimate"] = to_json(est);
      Emit e;
      e.command = "fdd compute";
      fdd_echo.write(e.config);
      e.result = r;
      return e;
    };
  });

  // bounds
  auto* bounds_cmd = app.add_subcommand("bounds", "Assemble target-error and generalization bounds");
  bounds_cmd->require_subcommand(1);

  auto* bt = bounds_cmd->add_subcommand("target", "Population bound on the threshold task");
  bt->set_help_flag("--help", "Print this help message and exit");
  Echo bt_echo;
  ClassOptions bt_cls;
  std::string bt_kind = "localized", bt_phi = "kl";
  double bt_h = 0.5, bt_r = 0.25, bt_r1 = 0.0, bt_c1 = 3.74, bt_c2 = 0.1;
  bool bt_lambda_free = false;
  bt_cls.add(bt, bt_echo);
  bt_echo.option(bt, "kind", bt_kind, "absolute (abs) | general | slow | localized")
      ->check(CLI::IsMember({"absolute", "abs", "general", "slow", "localized"}));
  bt_echo.option(bt, "phi", bt_phi, "kernel");
  bt_echo.option(bt, "h", bt_h, "threshold of the bounded hypothesis");
  bt_echo.option(bt, "r", bt_r, "Rashomon level");
  bt_echo.option(bt, "r1", bt_r1, "certified source risk level of h");
  bt_echo.option(bt, "C1", bt_c1, "localized scale constant");
  bt_echo.option(bt, "C2", bt_c2, "localized disagreement weight");
  bt_echo.flag(bt, "lambda-free", bt_lambda_free, "replace lambda* by the cross-domain labeler error");
  bt->callback([&] {
    run = [&] {
      if (bt_cls.cls != "threshold") throw DomainError("population bounds need the threshold class");
      TaskOptions task;
      const DomainPair pair = analytic_pair(task, bt_cls, bt_h, g.seed);
      const HypothesisClass cls = bt_cls.make(1);
      const PhiSpec phi = parse_phi(bt_phi);
      const Hypothesis h = Threshold{bt_h};
      const auto& mu = pair.source;
      const auto& nu = pair.target;
      const double src = risk(h, mu, pair.source_labels, cls.loss);
      json extra = json::object();
      BoundReport b;
      if (bt_kind == "absolute" || bt_kind == "abs") {
        b = target_bound_absolute(src, absolute_fdd(h, cls, mu, nu, phi), lambda_star(cls, pair).value);
      } else if (bt_kind == "general") {
        b = target_bound_general(src, fdd(h, cls, nu, mu, phi), cumulant_profile(h, cls, mu, phi),
                                 lambda_star(cls, pair).value);
      } else if (bt_kind == "slow") {
        b = target_bound_slow(src, fdd(h, cls, nu, mu, phi), phi, lambda_star(cls, pair).value);
      } else {
        const RashomonSet set = rashomon(cls, mu, pair.source_labels, bt_r);
        const auto loc = localized_fdd(h, cls, set, nu, mu, pair.source_labels, bt_r1, phi);
        const auto sup = sup_source_disagreement(h, cls, set, mu);
        const auto profile = cumulant_profile(h, cls, set.member_indices, mu, phi);
        b = target_bound_localized(src, loc, sup.value, {bt_r1, bt_r, bt_c1, bt_c2},
                                   lambda_star(cls, pair, set.member_indices).value, profile);
        extra["max_feasible_C1"] = optional_number(max_feasible_c1(profile, bt_c2));
      }
      if (bt_lambda_free) {
        const Hypothesis f_mu = *pair.source_labeler;
        const Hypothesis f_nu = *pair.target_labeler();
        b = lambda_free(b, cross_domain_error(f_mu, f_nu, mu, nu, cls.loss),
                        member_of(cls, f_mu) && member_of(cls, f_nu));
      }
      json r = to_json(b);
      r["target_risk"] = number(risk(h, nu, pair.target_labels(), cls.loss));
      for (auto& [k, v] : extra.items()) r[k] = v;
      Emit e;
      e.command = "bounds target";
      bt_echo.write(e.config);
      e.result = r;
      e.csv = [b](std::ostream& os) { write_bound_csv(os, b); };
      return e;
    };
  });

  auto* bg = bounds_cmd->add_subcommand("generalization", "Finite-sample bound from supplied components");
  Echo bg_echo;
  std::string bg_kind = "absolute_kl";
  double bg_source = 0.0, bg_disc = 0.0, bg_rs = 0.0, bg_rt = 0.0, bg_delta = 0.05, bg_n = 1000.0,
         bg_m = 1000.0, bg_lambda = 0.0, bg_beta = 1.0, bg_curv = 1.0, bg_r = 0.0, bg_r1 = 0.0, bg_c1 = 1.0,
         bg_c2 = 0.5, bg_sup = 0.0;
  std::string bg_condition = "unset";
  bg_echo.option(bg, "kind", bg_kind, "absolute_kl | localized_kl | slow | localized_chi2")
      ->check(CLI::IsMember({"absolute_kl", "localized_kl", "slow", "localized_chi2"}));
  bg_echo.option(bg, "source-risk", bg_source, "empirical source risk");
  bg_echo.option(bg, "discrepancy", bg_disc, "empirical discrepancy");
  bg_echo.option(bg, "rademacher-source", bg_rs, "source Rademacher complexity");
  bg_echo.option(bg, "rademacher-target", bg_rt, "target Rademacher complexity");
  bg_echo.option(bg, "delta", bg_delta, "failure probability");
  bg_echo.option(bg, "n", bg_n, "source sample size (inf allowed)");
  bg_echo.option(bg, "m", bg_m, "target sample size (inf allowed)");
  bg_echo.option(bg, "lambda", bg_lambda, "joint optimal risk");
  bg_echo.option(bg, "beta", bg_beta, "target scale of the absolute bound");
  bg_echo.option(bg, "curvature", bg_curv, "phi''(1) for the slow kind");
  bg_echo.option(bg, "r", bg_r, "Rashomon level");
  bg_echo.option(bg, "r1", bg_r1, "certified source risk level");
  bg_echo.option(bg, "C1", bg_c1, "localized scale constant");
  bg_echo.option(bg, "C2", bg_c2, "localized disagreement weight");
  bg_echo.option(bg, "sup-disagreement", bg_sup, "sup source disagreement over the Rashomon set");
  bg_echo.option(bg, "condition", bg_condition, "true | false | unset: chi2 localization condition")
      ->check(CLI::IsMember({"true", "false", "unset"}));
  bg->callback([&] {
    run = [&] {
      GeneralizationInputs in;
      in.source_risk = bg_source;
      in.discrepancy = bg_disc;
      in.rademacher_source = bg_rs;
      in.rademacher_target = bg_rt;
      in.delta = bg_delta;
      in.n = bg_n;
      in.m = bg_m;
      in.lambda = bg_lambda;
      in.beta = bg_beta;
      in.curvature = bg_curv;
      in.localization = LocalizationParams{bg_r1, bg_r, bg_c1, bg_c2};
      in.sup_source_disagreement = bg_sup;
      if (bg_condition != "unset") in.condition_holds = bg_condition == "true";
      const BoundReport b = generalization_bound(parse_generalization_kind(bg_kind), in);
      Emit e;
      e.command = "bounds generalization";
      bg_echo.write(e.config);
      e.result = to_json(b);
      e.csv = [b](std::ostream& os) { write_bound_csv(os, b); };
      return e;
    };
  });

  auto* bf = bounds_cmd->add_subcommand("fastrate", "Largest C1 meeting the fast-rate condition");
  Echo bf_echo;
  double bf_m = 1.0, bf_c2 = 0.1;
  bf_echo.option(bf, "m-cap,m", bf_m, "M = min(r1 + r, 1)");
  bf_echo.option(bf, "C2,c2", bf_c2, "disagreement weight in (0, 1)");
  bf->callback([&] {
    run = [&] {
      const auto c = fastrate_constants(bf_m, bf_c2);
      Emit e;
      e.command = "bounds fastrate";
      bf_echo.write(e.config);
      e.result = to_json(c);
      e.csv = [c](std::ostream& os) {
        os << "C1,coefficient,status\n" << exact_text(c.C1) << ',' << exact_text(c.coefficient) << ','
           << to_string(c.status) << '\n';
      };
      return e;
    };
  });

  // train
  auto* tr = app.add_subcommand("train", "Adversarial domain adaptation on a toy task");
  Echo tr_echo;
  TaskOptions tr_task;
  tr_task.task = "two-moons";
  TrainConfig tc;
  std::string tr_disc = "kl", tr_tmode = "fixed_one", tr_surrogate = to_string(tc.surrogate), tr_log;
  tr_task.add(tr, tr_echo, false);
  tr_echo.option(tr, "discrepancy", tr_disc, "kl | chi2 | jeffreys:g1,g2 | abs_kl | abs_chi2 | optkl | optchi2");
  tr_echo.option(tr, "eta", tc.eta, "weight of the discrepancy (0 trains on the source only)");
  tr_echo.option(tr, "t-mode", tr_tmode, "fixed_one | optimized")->check(CLI::IsMember({"fixed_one", "optimized"}));
  tr_echo.option(tr, "inner-steps", tc.inner_steps, "ascent steps on the auxiliary head per outer step");
  tr_echo.option(tr, "outer-steps", tc.outer_steps, "descent steps on representation and main head");
  tr_echo.option(tr, "outer-lr", tc.outer_lr, "outer learning rate");
  tr_echo.option(tr, "inner-lr", tc.inner_lr, "inner learning rate");
  tr_echo.option(tr, "surrogate", tr_surrogate, "bounded_sigmoid_disagreement | surrogate_unbounded");
  tr_echo.option(tr, "hidden", tc.hidden, "representation width");
  tr_echo.flag(tr, "eta-ramp", tc.eta_ramp, "ramp eta in over training");
  tr_echo.option(tr, "log-every", tc.log_every, "trajectory logging period");
  tr_echo.option(tr, "log", tr_log, "trajectory CSV path");
  tr->callback([&] {
    run = [&] {
      tc.discrepancy = parse_discrepancy(tr_disc);
      tc.t_mode = tr_tmode == "optimized" ? TMode::optimized : TMode::fixed_one;
      tc.surrogate = parse_loss(tr_surrogate);
      tc.seed = g.seed;
      const DomainPair pair = tr_task.make(g.seed);
      log->info("training {} on {} for {} steps", tc.discrepancy.name(), pair.name, tc.outer_steps);
      auto res = std::make_shared<TrainResult>(train(tc, pair));
      if (res->state.exploded) log->warn("discrepancy exploded at step {}", res->state.step);
      if (!tr_log.empty()) {
        std::ofstream f(tr_log);
        if (!f) throw DomainError("cannot write " + tr_log);
        write_trajectory_csv(f, res->state);
      }
      json r = to_json(res->metrics);
      r["discrepancy"] = tc.discrepancy.name();
      r["t_fallbacks"] = res->state.t_fallbacks;
      r["final_discrepancy"] =
          res->state.trajectory.empty() ? json(nullptr) : number(res->state.trajectory.back().discrepancy);
      Emit e;
      e.command = "train";
      tr_echo.write(e.config);
      e.result = r;
      e.csv = [res](std::ostream& os) { write_trajectory_csv(os, res->state); };
      return e;
    };
  });

  // dataset
  auto* ds = app.add_subcommand("dataset", "Generate or describe a domain pair");
  Echo ds_echo;
  TaskOptions ds_task;
  ds_task.task = "two-moons";
  bool ds_blind = false;
  ds_task.add(ds, ds_echo, true);
  ds_echo.flag(ds, "blind", ds_blind, "omit target labels");
  ds->callback([&] {
    run = [&] {
      DomainPair pair = ds_task.make(g.seed);
      if (ds_blind) pair = pair.blinded();
      json r{{"name", pair.name},
             {"mode", pair.mode == DomainMode::analytic ? "analytic" : "sampled"},
             {"labels", pair.capability() == LabelCapability::oracle ? "oracle" : "blinded"},
             {"source_size", pair.source.size()},
             {"target_size", pair.target.size()},
             {"dim", pair.source.dim()}};
      if (pair.threshold) r["descriptor"] = threshold_descriptor(*pair.threshold);
      if (pair.feature_kl) r["feature_kl"] = number(*pair.feature_kl);
      auto shared = std::make_shared<DomainPair>(std::move(pair));
      Emit e;
      e.command = "dataset";
      ds_echo.write(e.config);
      e.result = r;
      e.csv = [shared](std::ostream& os) { write_dataset_csv(os, *shared); };
      return e;
    };
  });

  // reproduce
  auto* rp = app.add_subcommand("reproduce", "Reproduce a worked example");
  rp->require_subcommand(1);
  auto* rp_thr = rp->add_subcommand("threshold-example", "Uniform threshold-learning example");
  Echo rp_echo;
  bool rp_failed = false;
  rp_thr->callback([&] {
    run = [&] {
      const ReproReport rep = reproduce_threshold_example();
      json rows = json::array();
      for (const auto& row : rep.rows)
        rows.push_back({{"name", row.name},
                        {"value", number(row.value)},
                        {"expected", number(row.expected)},
                        {"tolerance", number(row.tolerance)},
                        {"passed", row.passed},
                        {"note", row.note}});
      rp_failed = !rep.all_passed();
      Emit e;
      e.command = "reproduce threshold-example";
      rp_echo.write(e.config);
      e.result = {{"rows", rows}, {"all_passed", rep.all_passed()}};
      e.csv = [rep](std::ostream& os) {
        os << "name,value,expected,tolerance,passed\n";
        for (const auto& row : rep.rows)
          os << row.name << ',' << exact_text(row.value) << ',' << exact_text(row.expected) << ','
             << exact_text(row.tolerance) << ',' << (row.passed ? "true" : "false") << '\n';
      };
      return e;
    };
  });

  for (auto* sub : {phi_cmd, est_cmd, fdd_cmd, fdd_compute, bounds_cmd, bt, bg, bf, tr, ds, rp, rp_thr})
    sub->fallthrough();

  try {
    std::vector<std::string> args;
    for (int i = argc - 1; i >= 1; --i) args.emplace_back(argv[i]);
    std::reverse(args.begin(), args.end());
    args = apply_config_file(args);
    std::reverse(args.begin(), args.end());  // CLI11 consumes the vector from the back
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  } catch (const json::exception& e) {
    err << "config: " << e.what() << '\n';
    return kUsage;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  if (!run) {
    err << app.help();
    return kUsage;
  }
  try {
    emit = run();
  } catch (const LabelAccessError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  }

  global_echo.write(emit.config);
  std::ofstream file;
  std::ostream* sink = &out;
  if (!g.output.empty()) {
    file.open(g.output);
    if (!file) {
      err << "error: cannot write " << g.output << '\n';
      return kUsage;
    }
    sink = &file;
  }
  if (g.format == "csv" || csv) {
    if (!emit.csv) {
      err << "error: " << emit.command << " has no CSV form\n";
      return kUsage;
    }
    *sink << "# " << kSchema << ' ' << emit.command << ' ' << emit.config.dump() << '\n';
    emit.csv(*sink);
  } else {
    json doc{{"schema", kSchema}, {"command", emit.command}, {"config", emit.config}, {"result", emit.result}};
    *sink << doc.dump(2) << '\n';
  }
  if (rp_failed) {
    log->error("reproduction mismatch");
    return kMismatch;
  }
  return kOk;
}

}  // namespace fdd::cli
