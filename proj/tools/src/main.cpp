#include "asyncheat/cli/commands.hpp"

#include "CLI11.hpp"

#include <csignal>
#include <iostream>

namespace {

asyncheat::CancellationToken g_cancel;

extern "C" void on_sigint(int) { g_cancel.cancel(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Asynchronous heat-equation simulation and switched-system analysis"};
  app.require_subcommand(1);
  app.fallthrough();

  asyncheat::cli::CommandOptions opts;
  std::string out;
  std::uint64_t cap = 0;
  app.add_option("--config", opts.config, "Experiment configuration (JSON)")->required();
  auto* out_opt = app.add_option("--out", out, "Output directory, overrides output_dir");
  app.add_option("--workers", opts.workers, "Worker threads for the ensemble (0: all cores)");
  auto* cap_opt = app.add_option("--cap", cap, "Maximum number of enumerated modes");

  app.add_subcommand("simulate", "Synchronous reference and asynchronous ensemble");
  app.add_subcommand("analyze", "Worst-mode certificates and analytic bounds");
  app.add_subcommand("verify", "Exhaustive checks on every mode (small systems)");
  app.add_subcommand("compare", "Empirical exceedance against the analytic bound");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return asyncheat::cli::kExitConfig;
  }
  if (*out_opt) opts.out = out;
  if (*cap_opt) opts.cap = cap;

  std::signal(SIGINT, on_sigint);
  opts.cancel = &g_cancel;
  const std::string command = app.get_subcommands().front()->get_name();
  return asyncheat::cli::run_command(command, opts, std::cout, std::cerr);
}
