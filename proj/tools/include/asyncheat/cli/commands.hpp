#pragma once

#include "asyncheat/analysis.hpp"
#include "asyncheat/cancellation.hpp"
#include "asyncheat/cli/config.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>

namespace asyncheat::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitConfig = 2,
  kExitNumerical = 3,
  kExitIo = 4,
  kExitCancelled = 130,
};

class VerificationFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommandOptions {
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;  ///< overrides output_dir
  unsigned workers = 0;                      ///< 0: hardware parallelism
  std::optional<std::uint64_t> cap;          ///< overrides the config cap
  const CancellationToken* cancel = nullptr;
};

/// Everything the bounds need, built from the most delayed mode and the
/// factorized expected matrix only.
struct WorstModeAnalysis {
  Eigen::MatrixXd w_tilde;
  analysis::LyapunovCertificate certificate;
  double spectral_radius = 0.0;
  Eigen::MatrixXd lambda;
  double lambda_spectral_radius = 0.0;
  analysis::MeanContractionReport mean;
  Eigen::VectorXd e0;
  analysis::TailConstants tail;
};

WorstModeAnalysis analyze_worst_mode(const ExperimentConfig& cfg,
                                     const CancellationToken* cancel = nullptr);

/// Each command writes its artifacts into the resolved output directory.
void cmd_simulate(const ExperimentConfig& cfg, const CommandOptions& opts);
void cmd_analyze(const ExperimentConfig& cfg, const CommandOptions& opts);
/// Prints a JSON report; throws VerificationFailed after printing if any check fails.
void cmd_verify(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& report);
void cmd_compare(const ExperimentConfig& cfg, const CommandOptions& opts);

/// Loads the config, dispatches and maps failures to exit codes. Errors go
/// to `err` as a one-line JSON object.
int run_command(const std::string& command, const CommandOptions& opts, std::ostream& out,
                std::ostream& err);

}  // namespace asyncheat::cli
