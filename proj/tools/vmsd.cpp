// vmsd: streamline-diffusion Vlasov-Maxwell solver, batch front end.
//
//   vmsd solve       --config run.conf [--out DIR]
//   vmsd study       --config run.conf [--out DIR] [--levels N]
//   vmsd verify-dual --config run.conf [--out DIR] [--seed N]
//   vmsd estimate    --config run.conf [--out DIR]
//
// Exit codes: 0 success, 2 configuration error, 3 Picard non-convergence,
// 4 verification failure.

#include <CLI11.hpp>
#include <iostream>

#include "vmsd/app.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Space-time streamline-diffusion solver for the 1.5D relativistic Vlasov-Maxwell system"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  int levels = 0;
  long long seed = -1;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory (overrides output.dir)");
  };
  CLI::App* solve = app.add_subcommand("solve", "run the coupled iteration once and write snapshots");
  CLI::App* study = app.add_subcommand("study", "refinement ladder with observed convergence rates");
  CLI::App* verify = app.add_subcommand("verify-dual", "check the dual-problem oracles and Gronwall certificates");
  CLI::App* estimate = app.add_subcommand("estimate", "run once and report the a posteriori estimators");
  for (CLI::App* s : {solve, study, verify, estimate}) add_common(s);
  study->add_option("--levels", levels, "number of mesh levels (overrides study.levels)")->check(CLI::PositiveNumber);
  verify->add_option("--seed", seed, "random seed for sampled checks (overrides run.seed)")->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : vmsd::kConfigError;
  }

  try {
    vmsd::RunConfig cfg = vmsd::load_config(config_path);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (levels > 0) cfg.levels = levels;
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    if (solve->parsed()) return vmsd::cmd_solve(cfg);
    if (study->parsed()) return vmsd::cmd_study(cfg);
    if (verify->parsed()) return vmsd::cmd_verify_dual(cfg);
    return vmsd::cmd_estimate(cfg);
  } catch (const vmsd::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return vmsd::kConfigError;
  } catch (const vmsd::NonNeutralError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return vmsd::kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
