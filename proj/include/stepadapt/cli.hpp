#pragma once

// Subcommand dispatch and artifact emission. Artifacts carry a metadata
// header (tool version, config hash, seed, force flag, canonical config) and
// contain nothing that depends on wall time or thread count.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "stepadapt/analysis.hpp"
#include "stepadapt/config.hpp"
#include "stepadapt/engine.hpp"
#include "stepadapt/errors.hpp"
#include "stepadapt/noise.hpp"
#include "stepadapt/random.hpp"

namespace stepadapt {

inline constexpr std::string_view kToolVersion = "stepadapt 0.1.0";

enum class Subcommand { Run, Ensemble, Phase, KCurve, Precision, Check };

inline std::optional<Subcommand> parse_subcommand(std::string_view name) {
  if (name == "run") return Subcommand::Run;
  if (name == "ensemble") return Subcommand::Ensemble;
  if (name == "phase") return Subcommand::Phase;
  if (name == "kcurve") return Subcommand::KCurve;
  if (name == "precision") return Subcommand::Precision;
  if (name == "check") return Subcommand::Check;
  return std::nullopt;
}

inline std::string_view subcommand_name(Subcommand s) {
  switch (s) {
    case Subcommand::Run:
      return "run";
    case Subcommand::Ensemble:
      return "ensemble";
    case Subcommand::Phase:
      return "phase";
    case Subcommand::KCurve:
      return "kcurve";
    case Subcommand::Precision:
      return "precision";
    case Subcommand::Check:
      return "check";
  }
  return "?";
}

struct CliOptions {
  /// Overrides output.path.
  std::optional<std::filesystem::path> out_dir;
  /// Overrides run.n_seeds.
  std::optional<std::size_t> seeds;
  bool force = false;
  /// Wall time only; never changes results.
  unsigned threads = 1;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// Shortest round-trip decimal; non-finite values as nan / inf / -inf.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// FNV-1a, 64-bit.
inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, 16);
  std::string s(buf, res.ptr);
  return std::string(16 - s.size(), '0') + s;
}

namespace detail {

// A table of pre-formatted cells, written as CSV or as JSON rows.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<json>> rows;
  std::vector<std::pair<std::string, std::string>> notes;
};

inline json cell(double v) { return std::isfinite(v) ? json(v) : json(format_number(v)); }
inline json cell(std::optional<double> v) { return v ? cell(*v) : json(nullptr); }

inline std::string csv_cell(const json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) return format_number(v.get<double>());
  return v.dump();
}

struct Metadata {
  std::string subcommand;
  std::string config_compact;
  std::uint64_t seed;
  bool force;
};

inline std::vector<std::pair<std::string, std::string>> metadata_lines(const Metadata& m) {
  return {
      {"tool", std::string(kToolVersion)},
      {"subcommand", m.subcommand},
      {"config_hash", "fnv1a64:" + hex64(fnv1a64(m.config_compact))},
      {"seed", std::to_string(m.seed)},
      {"child_seed", "mix64(seed ^ 0x9e3779b97f4a7c15 * (index + 1))"},
      {"force", m.force ? "true" : "false"},
      {"config", m.config_compact},
  };
}

inline std::string render_csv(const Metadata& m, const Table& t) {
  std::ostringstream os;
  for (const auto& [k, v] : metadata_lines(m)) os << "# " << k << ": " << v << '\n';
  for (const auto& [k, v] : t.notes) os << "# " << k << ": " << v << '\n';
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
  os << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_cell(row[i]);
    os << '\n';
  }
  return os.str();
}

inline json metadata_json(const Metadata& m) {
  json meta = json::object();
  for (const auto& [k, v] : metadata_lines(m)) meta[k] = v;
  meta["config"] = json::parse(m.config_compact);
  return meta;
}

inline std::string render_json(const Metadata& m, const Table& t) {
  json doc;
  doc["metadata"] = metadata_json(m);
  json notes = json::object();
  for (const auto& [k, v] : t.notes) notes[k] = v;
  doc["summary"] = notes;
  doc["columns"] = t.columns;
  json rows = json::array();
  for (const auto& row : t.rows) {
    json obj = json::object();
    for (std::size_t i = 0; i < row.size(); ++i) obj[t.columns[i]] = row[i];
    rows.push_back(obj);
  }
  doc["rows"] = rows;
  return doc.dump(2) + "\n";
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

inline Table trajectory_table(const Trajectory& traj) {
  Table t;
  t.columns = {"t", "x", "y", "gamma", "ln_gamma"};
  for (std::size_t i = 0; i < traj.ts.size(); ++i) {
    const bool has_y = !std::isnan(traj.ys[i]);
    t.rows.push_back({json(traj.ts[i]), cell(traj.xs[i]), has_y ? cell(traj.ys[i]) : json(nullptr),
                      cell(traj.gammas[i]), cell(std::log(traj.gammas[i]))});
  }
  t.notes = {{"status", to_string(traj.status)},
             {"x_star", format_number(traj.status.x_star)},
             {"t_stop", std::to_string(traj.status.t_stop)}};
  return t;
}

inline std::string ensemble_summary(const EnsembleResult& e) {
  return "conv_fraction=" + format_number(e.conv_fraction) +
         " median_limit_err=" + format_number(e.median_limit_error) +
         " median_slope=" + format_number(e.median_rate_slope);
}

inline Table ensemble_table(const EnsembleResult& e) {
  Table t;
  t.columns = {"seed", "status", "x_star", "t_stop", "rate_slope", "limit_error"};
  for (const auto& s : e.seeds) {
    t.rows.push_back({json(s.seed), json(to_string(s.status)),
                      s.status.converged() ? cell(s.status.x_star) : json(nullptr), json(s.t_final),
                      cell(s.rate_slope), cell(s.limit_error)});
  }
  t.notes = {{"n_seeds", std::to_string(e.seeds.size())},
             {"conv_fraction", format_number(e.conv_fraction)},
             {"median_limit_err", format_number(e.median_limit_error)},
             {"median_slope", format_number(e.median_rate_slope)}};
  for (const auto& [zero, count] : e.attractor_counts)
    t.notes.emplace_back("attractor[" + format_number(zero) + "]", std::to_string(count));
  return t;
}

inline Table phase_table(const PhaseDiagram& diagram) {
  Table t;
  t.columns = {"u", "d", "ud", "kappa", "class", "conv_fraction", "median_limit_err", "median_slope"};
  for (const auto& c : diagram.cells) {
    t.rows.push_back({cell(c.u), cell(c.d), cell(c.ud), cell(c.kappa), json(to_string(c.theoretical_class)),
                      cell(c.empirical_conv_fraction), cell(c.median_limit_error), cell(c.median_rate_slope)});
  }
  return t;
}

inline Table precision_table(double u, const std::vector<PrecisionRow>& rows) {
  Table t;
  t.columns = {"d", "lambda", "boundary_abs_phi", "median_err", "median_steps"};
  for (const auto& r : rows) {
    t.rows.push_back({cell(r.d), cell(r.lambda), cell(r.boundary_abs_phi), cell(r.median_limit_error),
                      cell(r.median_steps)});
  }
  t.notes = {{"u", format_number(u)}};
  return t;
}

inline Table kcurve_table(const ExperimentConfig& cfg, const NoiseModel& noise) {
  Table t;
  t.columns = {"z", "k_diag", "k_plus", "k_minus", "k_mc", "mc_stderr"};
  const auto zs = linspace(cfg.kcurve.z_min, cfg.kcurve.z_max, cfg.kcurve.n_points);
  const double n = static_cast<double>(cfg.kcurve.mc_samples);
  for (std::size_t i = 0; i < zs.size(); ++i) {
    const double z = zs[i];
    RandomState rng(child_seed(cfg.run.seed, i));
    const double mc = k_mc_oracle(noise, z, z, cfg.kcurve.mc_samples, rng);
    const double p = k_diag(noise, z);
    t.rows.push_back({cell(z), cell(p), cell(k_plus(noise, z).value), cell(k_minus(noise, z).value), cell(mc),
                      cell(std::sqrt(p * (1.0 - p) / n))});
  }
  return t;
}

inline json check_json(const Metadata& m, const AssumptionReport& report) {
  json doc;
  doc["metadata"] = metadata_json(m);
  json checks = json::array();
  for (const auto& c : report.checks) {
    checks.push_back({{"assumption", c.assumption},
                      {"verdict", c.pass ? "pass" : "fail"},
                      {"lhs", cell(c.lhs)},
                      {"rhs", cell(c.rhs)},
                      {"margin", cell(c.margin)},
                      {"note", c.note}});
  }
  doc["checks"] = checks;
  doc["blocking_failure"] = report.blocking_failure();
  return doc;
}

}  // namespace detail

/// Parse `config_text`, run the subcommand, write its artifact under the
/// output directory, print a one-line summary to `out`. Returns 0 on success,
/// 1 on parse/validation failure, 2 on runtime failure.
inline int dispatch(Subcommand cmd, std::string_view config_text, const CliOptions& options, std::ostream& out,
                    std::ostream& err) {
  const std::string name(subcommand_name(cmd));
  ExperimentConfig cfg;
  try {
    ParseOptions po;
    po.force = options.force;
    po.enforce_assumptions = cmd != Subcommand::Check && cmd != Subcommand::KCurve;
    cfg = parse_config(config_text, po);
    if (options.seeds) {
      if (*options.seeds < 1) throw ValidationError("--seeds must be >= 1");
      cfg.run.n_seeds = *options.seeds;
    }
    cfg.force = cfg.force || options.force;
  } catch (const ParseError& e) {
    err << name << ": parse error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ValidationError& e) {
    err << name << ": validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const Error& e) {
    err << name << ": validation error: " << e.what() << '\n';
    return kExitValidation;
  }

  const detail::Metadata meta{name, to_json(cfg).dump(), cfg.run.seed, cfg.force};
  const std::filesystem::path dir = options.out_dir ? *options.out_dir : std::filesystem::path(cfg.output.path);
  const bool as_json = cfg.output.format == "json";
  const auto emit = [&](const std::string& stem, const detail::Table& table) {
    const auto path = dir / (stem + (as_json ? ".json" : ".csv"));
    detail::write_file(path, as_json ? detail::render_json(meta, table) : detail::render_csv(meta, table));
    return path;
  };

  try {
    switch (cmd) {
      case Subcommand::Check: {
        const AssumptionReport report = check_config_assumptions(cfg);
        const auto path = dir / "check.json";
        detail::write_file(path, detail::check_json(meta, report).dump(2) + "\n");
        out << "check: " << (report.all_pass() ? "all assumptions pass" : "some assumptions fail")
            << (report.blocking_failure() ? " (blocking)" : "") << " -> " << path.string() << '\n';
        return report.blocking_failure() ? kExitValidation : kExitOk;
      }
      case Subcommand::Run: {
        const Trajectory traj = run(build_sim_config(cfg));
        const auto path = emit("trajectory", detail::trajectory_table(traj));
        out << "run: status=" << to_string(traj.status) << " x_star=" << format_number(traj.status.x_star)
            << " t_stop=" << traj.status.t_stop << " -> " << path.string() << '\n';
        return kExitOk;
      }
      case Subcommand::Ensemble: {
        const EnsembleResult ens = run_ensemble(build_sim_config(cfg), cfg.run.n_seeds, options.threads);
        const auto path = emit("ensemble", detail::ensemble_table(ens));
        out << "ensemble: n=" << ens.seeds.size() << ' ' << detail::ensemble_summary(ens) << " -> "
            << path.string() << '\n';
        return kExitOk;
      }
      case Subcommand::Phase: {
        const PhaseDiagram diagram =
            phase_sweep(cfg.sweep.u_grid, cfg.sweep.d_grid, build_sim_config(cfg), cfg.run.n_seeds, options.threads);
        const auto path = emit("phase", detail::phase_table(diagram));
        out << "phase: cells=" << diagram.cells.size() << " -> " << path.string() << '\n';
        return kExitOk;
      }
      case Subcommand::Precision: {
        const auto rows =
            precision_vs_rate(cfg.rule.u, cfg.sweep.d_list, build_sim_config(cfg), cfg.run.n_seeds, options.threads);
        const auto path = emit("precision", detail::precision_table(cfg.rule.u, rows));
        out << "precision: rows=" << rows.size() << " -> " << path.string() << '\n';
        return kExitOk;
      }
      case Subcommand::KCurve: {
        const auto path = emit("kcurve", detail::kcurve_table(cfg, build_noise(cfg)));
        out << "kcurve: points=" << cfg.kcurve.n_points << " -> " << path.string() << '\n';
        return kExitOk;
      }
    }
  } catch (const InvalidConfig& e) {
    err << name << ": validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << name << ": runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitRuntime;
}

}  // namespace stepadapt
