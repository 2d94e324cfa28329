// Command-line front end: homogenize | solve | downscale | sweep.
// Exit codes: 0 success, 1 configuration error, 2 numerical failure, 3 I/O error.

#include <CLI11.hpp>
#include <iostream>
#include <string>

#include "microfrac/config.hpp"
#include "microfrac/runner.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  int threads = 1;
  bool verbose = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "configuration file")->required();
  cmd->add_option("--out", args.out_dir, "output directory (overrides [output] dir)");
  cmd->add_option("--threads", args.threads, "worker threads for sweeps and table builds")
      ->check(CLI::PositiveNumber);
  cmd->add_flag("--verbose", args.verbose, "per-step progress on stderr");
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-scale phase-field damage simulator for periodic composites"};
  app.require_subcommand(1);

  CommonArgs args;
  auto* homogenize = app.add_subcommand("homogenize", "build the damage look-up table");
  auto* solve = app.add_subcommand("solve", "run the macro load schedule");
  auto* downscale = app.add_subcommand("downscale", "reconstruct the micro field at a point");
  auto* sweep = app.add_subcommand("sweep", "cross product of (shape, f, ell, notch) cases");
  for (auto* cmd : {homogenize, solve, downscale, sweep}) add_common(cmd, args);

  CLI11_PARSE(app, argc, argv);

  try {
    const microfrac::RunConfig cfg = microfrac::parse_config(args.config_path);
    microfrac::RunOptions opts;
    opts.out_dir_override = args.out_dir;
    opts.threads = args.threads;
    opts.verbose = args.verbose;
    if (homogenize->parsed()) return microfrac::run_homogenize(cfg, opts);
    if (solve->parsed()) return microfrac::run_solve(cfg, opts);
    if (downscale->parsed()) return microfrac::run_downscale(cfg, opts);
    if (sweep->parsed()) return microfrac::run_sweep(cfg, opts);
    return 1;
  } catch (const microfrac::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const microfrac::NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const microfrac::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
