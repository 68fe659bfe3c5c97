// Command-line front end: run | sweep | check | gen, JSON configs in,
// CSV/JSON artifacts out.

#include <iostream>

#include "CLI11.hpp"
#include "rsgd/cli.hpp"
#include "rsgd/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Retracted stochastic subgradient descent on matrix manifolds"};
  app.require_subcommand(1);

  rsgd::CliOptions opts;
  std::string out;
  std::uint64_t seed = 0;
  int workers = 0;

  auto add_common = [&](CLI::App* sub, bool with_force) {
    sub->add_option("--config", opts.config_path, "JSON config file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output root directory (overrides config)");
    sub->add_option("--seed", seed, "base seed override");
    sub->add_option("--workers", workers, "bounded worker pool size");
    if (with_force) sub->add_flag("--force", opts.force, "overwrite existing outputs");
  };

  CLI::App* run = app.add_subcommand("run", "single experiment with aggregation");
  CLI::App* sweep = app.add_subcommand("sweep", "schedule grid with per-cell runs");
  CLI::App* check = app.add_subcommand("check", "numerical theory verifiers");
  CLI::App* gen = app.add_subcommand("gen", "deterministic problem instances");
  for (CLI::App* sub : {run, sweep, check}) add_common(sub, false);
  add_common(gen, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : rsgd::kExitConfig;
  }

  if (run->count("--out") || sweep->count("--out") || check->count("--out") ||
      gen->count("--out"))
    opts.out = out;
  if (run->count("--seed") || sweep->count("--seed") || check->count("--seed") ||
      gen->count("--seed"))
    opts.seed = seed;
  if (run->count("--workers") || sweep->count("--workers") ||
      check->count("--workers") || gen->count("--workers"))
    opts.workers = workers;

  try {
    if (*run) return rsgd::cmd_run(opts);
    if (*sweep) return rsgd::cmd_sweep(opts);
    if (*check) return rsgd::cmd_check(opts);
    if (*gen) return rsgd::cmd_gen(opts);
  } catch (const rsgd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return rsgd::kExitConfig;
  } catch (const rsgd::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return rsgd::kExitConfig;
  } catch (const rsgd::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return rsgd::kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return rsgd::kExitConfig;
  }
  return rsgd::kExitConfig;
}
