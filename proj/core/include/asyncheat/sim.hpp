#pragma once

#include "asyncheat/cancellation.hpp"
#include "asyncheat/grid.hpp"
#include "asyncheat/modes.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <random>
#include <vector>

namespace asyncheat::sim {

using Rng = std::mt19937_64;

/// Seed of ensemble member `index`: base xor splitmix64(index).
std::uint64_t run_seed(std::uint64_t base, std::uint64_t index) noexcept;

/// Uniform double in [0, 1) from the top 53 bits of one draw.
double uniform01(Rng& rng) noexcept;

/// Buffered grid history, newest first: history()[d] = U(k - d).
class AsyncSimState {
 public:
  AsyncSimState(std::vector<grid::StateVector> history, long step);

  const std::vector<grid::StateVector>& history() const noexcept { return history_; }
  const grid::StateVector& newest() const noexcept { return history_.front(); }
  long step() const noexcept { return step_; }
  int buffer_len() const noexcept { return static_cast<int>(history_.size()); }

  /// X(k) = [U(k); U(k-1); ...; U(k-q+1)]
  Eigen::VectorXd augmented() const;

 private:
  friend class AsyncStencil;
  std::vector<grid::StateVector> history_;
  grid::StateVector scratch_;
  long step_;
};

/// Every buffer primed with the initial state; step 0.
AsyncSimState init_state(const grid::StateVector& initial, int buffer_len);

/// Inverse-CDF sampler over the per-edge delay distributions.
class DelaySampler {
 public:
  explicit DelaySampler(const modes::SwitchingDistribution& dist);

  void sample(Rng& rng, modes::DelayPattern& out) const;
  std::size_t num_edges() const noexcept { return cdf_.size(); }

 private:
  std::vector<std::vector<double>> cdf_;
};

/// One independent draw per edge.
modes::DelayPattern sample_delays(Rng& rng, const modes::SwitchingDistribution& dist);

/// Buffered asynchronous update on grid states. Stale reads come from the
/// buffer at the edge's delay; same-PE reads always use the newest buffer.
/// O(Nn) per step; never forms mode matrices.
class AsyncStencil {
 public:
  explicit AsyncStencil(const modes::AugmentedSpec& aspec);

  void step(AsyncSimState& state, const modes::DelayPattern& pattern) const;
  const modes::AugmentedSpec& spec() const noexcept { return aspec_; }
  std::size_t num_edges() const noexcept { return num_edges_; }

 private:
  modes::AugmentedSpec aspec_;
  std::size_t num_edges_;
  // Edge index of each interior point's left/right read; -1 for a same-PE read.
  std::vector<int> left_edge_;
  std::vector<int> right_edge_;
};

/// Functional form: returns the successor state.
AsyncSimState async_step(const AsyncSimState& state, const modes::DelayPattern& pattern,
                         const grid::GridSpec& spec);

struct RunConfig {
  modes::AugmentedSpec aspec;
  modes::SwitchingDistribution dist;
  grid::StateVector initial;
  grid::BoundaryConditions bc;
  int steps = 0;
  std::uint64_t seed = 0;
  std::vector<double> epsilons;
  /// Steps at which the newest grid state is recorded.
  std::vector<int> snapshot_steps;

  void validate() const;
};

struct Trajectory {
  std::vector<double> error_norms;      ///< ||X(k) - X_ss||, k = 0..steps
  std::vector<double> error_inf_norms;  ///< ||X(k) - X_ss||_inf
  std::vector<double> state_inf_norms;  ///< ||X(k)||_inf
  std::map<int, grid::StateVector> snapshots;
};

/// Single trajectory of ensemble member `run_index` (seed run_seed(cfg.seed, run_index)).
/// Errors are measured against X_ss = psi X(0).
Trajectory run_trajectory(const RunConfig& cfg, std::uint64_t run_index = 0);

/// U(k+1) = A U(k) on the grid, errors against the boundary ramp.
Trajectory run_sync_reference(const RunConfig& cfg);

struct EnsembleOptions {
  int num_runs = 1;
  /// Worker threads; 0 selects std::thread::hardware_concurrency().
  unsigned workers = 0;
  /// Steps at which componentwise mean/standard error and per-run squared
  /// norms are kept.
  std::vector<int> moment_steps;
  bool keep_run_norms = false;
  bool keep_run_snapshots = false;
  /// Polled between chunks of steps.
  const CancellationToken* cancel = nullptr;
};

struct StepMoments {
  int step = 0;
  Eigen::VectorXd mean;                  ///< empirical E[e(k)]
  Eigen::VectorXd std_error;             ///< sample std / sqrt(M), componentwise
  std::vector<double> run_squared_norms; ///< ||e(k)||^2 per run
};

struct EnsembleResult {
  int num_runs = 0;
  std::vector<double> epsilons;
  std::vector<double> mean_error_norm;     ///< ||(1/M) sum_runs e(k)||
  std::vector<double> mean_squared_norm;   ///< (1/M) sum_runs ||e(k)||^2
  std::vector<double> max_error_inf_norm;  ///< max_runs ||e(k)||_inf
  /// exceedance[k][i] = fraction of runs with ||e(k)||^2 > epsilons[i]
  std::vector<std::vector<double>> exceedance;
  std::vector<StepMoments> moments;
  std::vector<std::vector<double>> run_error_norms;  ///< [run][k] when requested
  std::vector<std::map<int, grid::StateVector>> run_snapshots;
  /// ||X(k+1)||_inf <= ||X(k)||_inf held on every run and step.
  bool marginally_stable = true;
};

/// Runs are independent and merged in run-index order, so the result is
/// bit-identical for any worker count.
EnsembleResult run_ensemble(const RunConfig& cfg, const EnsembleOptions& options);

}  // namespace asyncheat::sim
