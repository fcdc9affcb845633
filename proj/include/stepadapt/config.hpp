#pragma once

// Experiment configuration: JSON text -> validated ExperimentConfig -> the
// library objects it describes. Unknown keys are rejected and every default
// is filled in, so echo(parse(text)) is a canonical, re-parseable document.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "stepadapt/engine.hpp"
#include "stepadapt/errors.hpp"
#include "stepadapt/noise.hpp"
#include "stepadapt/problem.hpp"
#include "stepadapt/stepsize.hpp"

namespace stepadapt {

using json = nlohmann::json;

struct RuleSection {
  std::string variant = "multiplicative";
  double u = 1.05;
  double d = 0.9;
  double gbar = 0.5;
  /// Kesten / deterministic schedule scale c in c/(m+1); defaults to gbar.
  std::optional<double> c;
  /// Constant step; defaults to gbar.
  std::optional<double> g;
};

struct InitSection {
  double x0 = 2.0;
  /// Defaults to the rule's largest step.
  std::optional<double> gamma0;
  /// Defaults to gamma0.
  std::optional<double> gamma1;
};

struct RunSection {
  std::size_t horizon = 20000;
  std::uint64_t seed = 1;
  std::size_t n_seeds = 100;
  std::size_t record_stride = 1;
  std::size_t rate_window = 2000;
};

struct SweepSection {
  std::vector<double> u_grid;
  std::vector<double> d_grid;
  std::vector<double> d_list;
};

struct KCurveSection {
  double z_min = -0.5;
  double z_max = 0.5;
  std::size_t n_points = 41;
  std::size_t mc_samples = 100000;
};

struct OutputSection {
  std::string path = ".";
  std::string format = "csv";
};

struct ExperimentConfig {
  std::string problem_name = "tanh";
  json problem_params = json::object();
  std::string noise_family = "gaussian";
  json noise_params = json::object();
  RuleSection rule;
  InitSection init;
  RunSection run;
  StopCriteria stop;
  SweepSection sweep;
  KCurveSection kcurve;
  OutputSection output;
  bool force = false;
};

namespace detail {

// Walks one JSON object, consuming keys and remembering which were seen so
// that leftovers can be reported as unknown.
class SectionReader {
 public:
  SectionReader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ParseError(where() + "expected an object");
  }

  template <class T>
  T take(const std::string& key, T fallback) {
    seen_.insert(key);
    auto it = node_.find(key);
    if (it == node_.end()) return fallback;
    return convert<T>(*it, key);
  }

  template <class T>
  std::optional<T> take_optional(const std::string& key) {
    seen_.insert(key);
    auto it = node_.find(key);
    if (it == node_.end() || it->is_null()) return std::nullopt;
    return convert<T>(*it, key);
  }

  const json* child(const std::string& key) {
    seen_.insert(key);
    auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  void reject_unknown() const {
    for (auto it = node_.begin(); it != node_.end(); ++it)
      if (!seen_.count(it.key())) throw ParseError("unknown key '" + qualified(it.key()) + "'");
  }

  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string where() const { return path_.empty() ? "" : path_ + ": "; }

  template <class T>
  T convert(const json& value, const std::string& key) const {
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!value.is_number()) throw ParseError("");
      } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!value.is_number_integer() || (value.is_number_integer() && !value.is_number_unsigned() &&
                                           value.get<std::int64_t>() < 0))
          throw ParseError("");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!value.is_boolean()) throw ParseError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!value.is_string()) throw ParseError("");
      }
      return value.get<T>();
    } catch (const std::exception&) {
      throw ParseError("key '" + qualified(key) + "' has the wrong type");
    }
  }

  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

struct ParamSpec {
  const char* key;
  json fallback;
};

// Fills defaults for a named family's parameter block and rejects extras.
inline json normalize_params(const json* given, const std::string& path, const std::vector<ParamSpec>& specs) {
  json out = json::object();
  const json empty = json::object();
  const json& node = given ? *given : empty;
  if (!node.is_object()) throw ParseError(path + ": expected an object");
  std::set<std::string> allowed;
  for (const auto& spec : specs) {
    allowed.insert(spec.key);
    auto it = node.find(spec.key);
    if (it == node.end() || it->is_null()) {
      if (spec.fallback.is_null()) throw ParseError("missing key '" + path + "." + spec.key + "'");
      out[spec.key] = spec.fallback;
    } else {
      out[spec.key] = *it;
    }
  }
  for (auto it = node.begin(); it != node.end(); ++it)
    if (!allowed.count(it.key())) throw ParseError("unknown key '" + path + "." + it.key() + "'");
  return out;
}

inline double number_at(const json& params, const char* key, const std::string& path) {
  const json& v = params.at(key);
  if (!v.is_number()) throw ParseError("key '" + path + "." + key + "' must be a number");
  return v.get<double>();
}

inline std::vector<double> numbers_at(const json& params, const char* key, const std::string& path) {
  const json& v = params.at(key);
  if (!v.is_array()) throw ParseError("key '" + path + "." + key + "' must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) throw ParseError("key '" + path + "." + key + "' must be an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

inline json problem_param_defaults(const std::string& name, const json* given) {
  const std::string path = "problem.params";
  if (name == "tanh") return normalize_params(given, path, {{"a", 1.0}});
  if (name == "linear_sat") return normalize_params(given, path, {{"a", 1.0}, {"c", 1.0}});
  if (name == "sine_drift") return normalize_params(given, path, {{"alpha", 1.0}, {"beta", 0.5}});
  if (name == "three_zeros") return normalize_params(given, path, {});
  if (name == "tabulated")
    return normalize_params(given, path,
                            {{"xs", nullptr}, {"ys", nullptr}, {"M", nullptr}, {"R", nullptr}, {"zeros", nullptr}});
  throw ParseError("unknown problem.name '" + name + "'");
}

inline json continuous_param_defaults(const std::string& family, const json* given, const std::string& path) {
  if (family == "gaussian") return normalize_params(given, path, {{"sigma", 0.1}});
  if (family == "uniform") return normalize_params(given, path, {{"halfwidth", 0.1}});
  if (family == "laplace") return normalize_params(given, path, {{"scale", 0.1}});
  throw ParseError("unknown continuous family '" + family + "' at " + path);
}

inline json noise_param_defaults(const std::string& family, const json* given) {
  const std::string path = "noise.params";
  if (family == "zero") return normalize_params(given, path, {});
  if (family != "atom_mixture") return continuous_param_defaults(family, given, path);
  json out = normalize_params(given, path,
                              {{"continuous", json{{"family", "uniform"}, {"params", json::object()}}},
                               {"atoms", nullptr}});
  SectionReader cont(out["continuous"], path + ".continuous");
  const std::string cf = cont.take<std::string>("family", "uniform");
  const json* cp = cont.child("params");
  cont.reject_unknown();
  out["continuous"] = json{{"family", cf}, {"params", continuous_param_defaults(cf, cp, path + ".continuous.params")}};
  if (!out["atoms"].is_array()) throw ParseError("key '" + path + ".atoms' must be an array");
  json atoms = json::array();
  for (std::size_t i = 0; i < out["atoms"].size(); ++i) {
    const std::string ap = path + ".atoms[" + std::to_string(i) + "]";
    atoms.push_back(normalize_params(&out["atoms"][i], ap, {{"location", nullptr}, {"mass", nullptr}}));
    number_at(atoms.back(), "location", ap);
    number_at(atoms.back(), "mass", ap);
  }
  out["atoms"] = atoms;
  return out;
}

inline ContinuousFamily build_continuous(const std::string& family, const json& params, const std::string& path) {
  if (family == "gaussian") return Gaussian{number_at(params, "sigma", path)};
  if (family == "uniform") return Uniform{number_at(params, "halfwidth", path)};
  return Laplace{number_at(params, "scale", path)};
}

inline std::vector<double> double_list(SectionReader& r, const std::string& key) {
  const json* node = r.child(key);
  if (!node || node->is_null()) return {};
  if (!node->is_array()) throw ParseError("key '" + r.qualified(key) + "' must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : *node) {
    if (!e.is_number()) throw ParseError("key '" + r.qualified(key) + "' must be an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

template <class Fn>
void as_validation(const std::string& key, Fn&& fn) {
  try {
    fn();
  } catch (const InvalidConfig& e) {
    throw ValidationError(key + ": " + e.what());
  }
}

}  // namespace detail

inline TargetFunction build_problem(const ExperimentConfig& cfg) {
  const json& p = cfg.problem_params;
  const std::string path = "problem.params";
  const std::string& name = cfg.problem_name;
  if (name == "tanh") return make_tanh(detail::number_at(p, "a", path));
  if (name == "linear_sat") return make_linear_sat(detail::number_at(p, "a", path), detail::number_at(p, "c", path));
  if (name == "sine_drift")
    return make_sine_drift(detail::number_at(p, "alpha", path), detail::number_at(p, "beta", path));
  if (name == "three_zeros") return make_three_zeros();
  if (name == "tabulated")
    return make_tabulated(detail::numbers_at(p, "xs", path), detail::numbers_at(p, "ys", path),
                          detail::number_at(p, "M", path), detail::number_at(p, "R", path),
                          detail::numbers_at(p, "zeros", path));
  throw ParseError("unknown problem.name '" + name + "'");
}

inline NoiseModel build_noise(const ExperimentConfig& cfg) {
  const json& p = cfg.noise_params;
  const std::string& fam = cfg.noise_family;
  if (fam == "zero") return NoiseModel::zero();
  if (fam == "atom_mixture") {
    const json& cont = p.at("continuous");
    std::vector<Atom> atoms;
    for (const auto& a : p.at("atoms")) atoms.push_back({a.at("location").get<double>(), a.at("mass").get<double>()});
    return NoiseModel::mixture(
        detail::build_continuous(cont.at("family").get<std::string>(), cont.at("params"), "noise.params.continuous"),
        std::move(atoms));
  }
  return NoiseModel(std::visit([](auto c) -> NoiseFamily { return c; },
                               detail::build_continuous(fam, p, "noise.params")));
}

inline StepRuleConfig build_rule(const ExperimentConfig& cfg) {
  const RuleSection& r = cfg.rule;
  if (r.variant == "multiplicative") return Multiplicative{r.u, r.d, r.gbar};
  if (r.variant == "kesten") return Kesten{harmonic_schedule(r.c.value_or(r.gbar))};
  if (r.variant == "deterministic") return Deterministic{harmonic_schedule(r.c.value_or(r.gbar))};
  if (r.variant == "constant") return Constant{r.g.value_or(r.gbar)};
  throw ParseError("unknown rule.variant '" + r.variant + "'");
}

inline SimConfig build_sim_config(const ExperimentConfig& cfg) {
  StepRuleConfig rule = build_rule(cfg);
  const double gamma0 = cfg.init.gamma0.value_or(max_step(rule));
  return SimConfig{.problem = build_problem(cfg),
                   .noise = build_noise(cfg),
                   .rule = std::move(rule),
                   .x0 = cfg.init.x0,
                   .gamma0 = gamma0,
                   .gamma1 = cfg.init.gamma1,
                   .horizon = cfg.run.horizon,
                   .seed = cfg.run.seed,
                   .record_stride = cfg.run.record_stride,
                   .stop = cfg.stop,
                   .rate_window = cfg.run.rate_window,
                   .small_gamma_fraction = 1e-4};
}

/// Canonical JSON form with every default filled.
inline json to_json(const ExperimentConfig& c) {
  const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return json{
      {"problem", {{"name", c.problem_name}, {"params", c.problem_params}}},
      {"noise", {{"family", c.noise_family}, {"params", c.noise_params}}},
      {"rule",
       {{"variant", c.rule.variant},
        {"u", c.rule.u},
        {"d", c.rule.d},
        {"gbar", c.rule.gbar},
        {"c", opt(c.rule.c)},
        {"g", opt(c.rule.g)}}},
      {"init", {{"x0", c.init.x0}, {"gamma0", opt(c.init.gamma0)}, {"gamma1", opt(c.init.gamma1)}}},
      {"run",
       {{"horizon", c.run.horizon},
        {"seed", c.run.seed},
        {"n_seeds", c.run.n_seeds},
        {"record_stride", c.run.record_stride},
        {"rate_window", c.run.rate_window}}},
      {"stop",
       {{"conv_window", c.stop.conv_window},
        {"conv_tol", c.stop.conv_tol},
        {"gamma_tail_tol", c.stop.gamma_tail_tol},
        {"blowup_bound", c.stop.blowup_bound},
        {"stop_on_convergence", c.stop.stop_on_convergence}}},
      {"sweep", {{"u_grid", c.sweep.u_grid}, {"d_grid", c.sweep.d_grid}, {"d_list", c.sweep.d_list}}},
      {"kcurve",
       {{"z_min", c.kcurve.z_min},
        {"z_max", c.kcurve.z_max},
        {"n_points", c.kcurve.n_points},
        {"mc_samples", c.kcurve.mc_samples}}},
      {"output", {{"path", c.output.path}, {"format", c.output.format}}},
      {"force", c.force},
  };
}

inline std::string echo(const ExperimentConfig& c, int indent = 2) { return to_json(c).dump(indent); }

/// Structural and range validation, without the assumption gate.
inline void validate(const ExperimentConfig& c) {
  using detail::as_validation;
  const RuleSection& r = c.rule;
  if (!(r.d > 0 && r.d < 1)) throw ValidationError("rule.d: d must be in (0,1)");
  if (!(r.u > 1)) throw ValidationError("rule.u: u must be > 1");
  if (!(r.gbar > 0)) throw ValidationError("rule.gbar: gbar must be > 0");
  if (r.c && !(*r.c > 0)) throw ValidationError("rule.c: c must be > 0");
  if (r.g && !(*r.g > 0)) throw ValidationError("rule.g: g must be > 0");
  if (c.run.n_seeds < 1) throw ValidationError("run.n_seeds: must be >= 1");
  for (double u : c.sweep.u_grid)
    if (!(u > 1)) throw ValidationError("sweep.u_grid: every u must be > 1");
  for (double d : c.sweep.d_grid)
    if (!(d > 0 && d < 1)) throw ValidationError("sweep.d_grid: every d must be in (0,1)");
  for (double d : c.sweep.d_list)
    if (!(d > 0 && d < 1)) throw ValidationError("sweep.d_list: every d must be in (0,1)");
  if (!(c.kcurve.z_min <= c.kcurve.z_max)) throw ValidationError("kcurve: z_min must be <= z_max");
  if (c.kcurve.n_points < 1) throw ValidationError("kcurve.n_points: must be >= 1");
  if (c.kcurve.mc_samples < 1) throw ValidationError("kcurve.mc_samples: must be >= 1");
  if (c.output.format != "csv" && c.output.format != "json")
    throw ValidationError("output.format: must be 'csv' or 'json'");
  as_validation("problem", [&] { build_problem(c); });
  as_validation("noise", [&] { build_noise(c); });
  as_validation("rule", [&] { validate(build_rule(c)); });
  as_validation("config", [&] { validate(build_sim_config(c)); });
}

/// A5/A6 gate for the run-type commands.
inline AssumptionReport check_config_assumptions(const ExperimentConfig& c) {
  const StepRuleConfig rule = build_rule(c);
  return check_assumptions(build_problem(c), build_noise(c), max_step(rule));
}

struct ParseOptions {
  /// Apply the A5/A6 gate (skipped anyway when the config or caller forces).
  bool enforce_assumptions = true;
  bool force = false;
};

/// Parse, fill defaults, validate. ParseError for malformed text, unknown
/// keys or wrong types; ValidationError for out-of-range values and, unless
/// forced, for failed A5/A6 checks.
inline ExperimentConfig parse_config(std::string_view text, const ParseOptions& options = {}) {
  json root;
  try {
    root = json::parse(text.begin(), text.end(), nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what());
  }
  using detail::SectionReader;
  ExperimentConfig c;
  SectionReader top(root, "");
  c.force = top.take<bool>("force", false);

  if (const json* node = top.child("problem")) {
    SectionReader r(*node, "problem");
    c.problem_name = r.take<std::string>("name", "tanh");
    const json* params = r.child("params");
    r.reject_unknown();
    c.problem_params = detail::problem_param_defaults(c.problem_name, params);
  } else {
    c.problem_params = detail::problem_param_defaults(c.problem_name, nullptr);
  }

  if (const json* node = top.child("noise")) {
    SectionReader r(*node, "noise");
    c.noise_family = r.take<std::string>("family", "gaussian");
    const json* params = r.child("params");
    r.reject_unknown();
    c.noise_params = detail::noise_param_defaults(c.noise_family, params);
  } else {
    c.noise_params = detail::noise_param_defaults(c.noise_family, nullptr);
  }

  if (const json* node = top.child("rule")) {
    SectionReader r(*node, "rule");
    c.rule.variant = r.take<std::string>("variant", c.rule.variant);
    c.rule.u = r.take<double>("u", c.rule.u);
    c.rule.d = r.take<double>("d", c.rule.d);
    c.rule.gbar = r.take<double>("gbar", c.rule.gbar);
    c.rule.c = r.take_optional<double>("c");
    c.rule.g = r.take_optional<double>("g");
    r.reject_unknown();
  }
  if (c.rule.variant != "multiplicative" && c.rule.variant != "kesten" && c.rule.variant != "deterministic" &&
      c.rule.variant != "constant")
    throw ParseError("unknown rule.variant '" + c.rule.variant + "'");
  if (c.rule.variant == "kesten" || c.rule.variant == "deterministic") {
    if (!c.rule.c) c.rule.c = c.rule.gbar;
  }
  if (c.rule.variant == "constant" && !c.rule.g) c.rule.g = c.rule.gbar;

  if (const json* node = top.child("init")) {
    SectionReader r(*node, "init");
    c.init.x0 = r.take<double>("x0", c.init.x0);
    c.init.gamma0 = r.take_optional<double>("gamma0");
    c.init.gamma1 = r.take_optional<double>("gamma1");
    r.reject_unknown();
  }

  if (const json* node = top.child("run")) {
    SectionReader r(*node, "run");
    c.run.horizon = r.take<std::size_t>("horizon", c.run.horizon);
    c.run.seed = r.take<std::uint64_t>("seed", c.run.seed);
    c.run.n_seeds = r.take<std::size_t>("n_seeds", c.run.n_seeds);
    c.run.record_stride = r.take<std::size_t>("record_stride", c.run.record_stride);
    c.run.rate_window = r.take<std::size_t>("rate_window", c.run.rate_window);
    r.reject_unknown();
  }

  if (const json* node = top.child("stop")) {
    SectionReader r(*node, "stop");
    c.stop.conv_window = r.take<std::size_t>("conv_window", c.stop.conv_window);
    c.stop.conv_tol = r.take<double>("conv_tol", c.stop.conv_tol);
    c.stop.gamma_tail_tol = r.take<double>("gamma_tail_tol", c.stop.gamma_tail_tol);
    c.stop.blowup_bound = r.take<double>("blowup_bound", c.stop.blowup_bound);
    c.stop.stop_on_convergence = r.take<bool>("stop_on_convergence", c.stop.stop_on_convergence);
    r.reject_unknown();
  }

  if (const json* node = top.child("sweep")) {
    SectionReader r(*node, "sweep");
    c.sweep.u_grid = detail::double_list(r, "u_grid");
    c.sweep.d_grid = detail::double_list(r, "d_grid");
    c.sweep.d_list = detail::double_list(r, "d_list");
    r.reject_unknown();
  }

  if (const json* node = top.child("kcurve")) {
    SectionReader r(*node, "kcurve");
    c.kcurve.z_min = r.take<double>("z_min", c.kcurve.z_min);
    c.kcurve.z_max = r.take<double>("z_max", c.kcurve.z_max);
    c.kcurve.n_points = r.take<std::size_t>("n_points", c.kcurve.n_points);
    c.kcurve.mc_samples = r.take<std::size_t>("mc_samples", c.kcurve.mc_samples);
    r.reject_unknown();
  }

  if (const json* node = top.child("output")) {
    SectionReader r(*node, "output");
    c.output.path = r.take<std::string>("path", c.output.path);
    c.output.format = r.take<std::string>("format", c.output.format);
    r.reject_unknown();
  }
  top.reject_unknown();

  validate(c);
  if (!c.init.gamma0) c.init.gamma0 = max_step(build_rule(c));

  if (options.enforce_assumptions && !options.force && !c.force) {
    try {
      enforce_assumptions(check_config_assumptions(c));
    } catch (const InvalidConfig& e) {
      throw ValidationError(e.what());
    }
  }
  return c;
}

}  // namespace stepadapt
