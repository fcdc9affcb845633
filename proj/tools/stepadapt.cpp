// stepadapt: experiment driver for the multiplicative step-size rule.
//
//   stepadapt <run|ensemble|phase|kcurve|precision|check> --config PATH
//             [--out DIR] [--seeds N] [--force] [--threads N]

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "stepadapt/cli.hpp"

namespace {

unsigned threads_from_env() {
  const char* env = std::getenv("STEPADAPT_THREADS");
  if (!env || !*env) return 1;
  try {
    const unsigned long v = std::stoul(env);
    return v == 0 ? 1u : static_cast<unsigned>(v);
  } catch (const std::exception&) {
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiplicative step-size stochastic approximation experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::size_t seeds = 0;
  bool force = false;
  unsigned threads = 0;

  for (const char* name : {"run", "ensemble", "phase", "kcurve", "precision", "check"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "Output directory (overrides output.path)");
    sub->add_option("--seeds", seeds, "Number of seeds (overrides run.n_seeds)");
    sub->add_flag("--force", force, "Run even if the A5/A6 checks fail");
    sub->add_option("--threads", threads, "Worker threads (default: $STEPADAPT_THREADS or 1)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : stepadapt::kExitValidation;
  }

  const auto cmd = stepadapt::parse_subcommand(app.get_subcommands().front()->get_name());
  std::ifstream in(config_path, std::ios::binary);
  if (!in) {
    std::cerr << "cannot read " << config_path << '\n';
    return stepadapt::kExitValidation;
  }
  std::stringstream text;
  text << in.rdbuf();

  stepadapt::CliOptions options;
  if (!out_dir.empty()) options.out_dir = out_dir;
  if (seeds > 0) options.seeds = seeds;
  options.force = force;
  options.threads = threads > 0 ? threads : threads_from_env();
  return stepadapt::dispatch(*cmd, text.str(), options, std::cout, std::cerr);
}
