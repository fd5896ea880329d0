#pragma once

#include "asyncheat/grid.hpp"
#include "asyncheat/modes.hpp"
#include "asyncheat/sim.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace asyncheat::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DelayKind { uniform, all_edges, per_edge };
enum class InitialKind { cos2, ramp, explicit_values };

struct EpsilonSweep {
  int step = 0;
  std::vector<double> epsilons;
};

/// Parsed and validated experiment description. Every field except the ones
/// marked optional must be present in the JSON document.
struct ExperimentConfig {
  int num_pes = 0;
  int points_per_pe = 0;
  double dx = 0.0;
  double dt = 0.0;
  double alpha = 0.0;
  int buffer_len = 0;
  grid::BoundaryConditions boundary;
  int steps = 0;
  int ensemble_size = 0;
  std::uint64_t seed = 0;
  std::vector<double> epsilons;
  std::filesystem::path output_dir;
  InitialKind initial_kind = InitialKind::cos2;
  std::vector<double> initial_values;  ///< explicit_values only

  // optional keys
  DelayKind delay_kind = DelayKind::uniform;
  std::vector<std::vector<double>> delay_probs;  ///< per edge, filled for every kind
  std::uint64_t cap = modes::kDefaultModeCap;
  std::vector<int> snapshot_steps;               ///< default {0, steps/2, steps}
  std::optional<EpsilonSweep> sweep;
  int tail_horizon = 100'000;
  bool per_run_norms = false;

  grid::GridSpec grid() const;
  modes::AugmentedSpec aspec() const;
  modes::SwitchingDistribution distribution() const;
  /// Selected initial state with the Dirichlet values applied.
  grid::StateVector initial_state() const;
  sim::RunConfig run_config() const;
};

/// Strict parse: unknown keys, wrong types and out-of-range values raise ConfigError.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace asyncheat::cli
