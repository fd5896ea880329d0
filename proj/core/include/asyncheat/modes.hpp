#pragma once

#include "asyncheat/grid.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace asyncheat::modes {

/// Grid plus a history buffer of q past states per processing element.
/// The augmented state is X(k) = [U(k); U(k-1); ...; U(k-q+1)].
class AugmentedSpec {
 public:
  AugmentedSpec(grid::GridSpec grid, int buffer_len);

  const grid::GridSpec& grid() const noexcept { return grid_; }
  int buffer_len() const noexcept { return buffer_len_; }
  Eigen::Index grid_size() const noexcept { return grid_.size(); }
  Eigen::Index dim() const noexcept { return grid_.size() * buffer_len_; }

 private:
  grid::GridSpec grid_;
  int buffer_len_;
};

enum class Side : std::uint8_t { left, right };

/// A read of `neighbor` while updating `point`, where the two lie in different
/// processing elements and `point` is not a Dirichlet row. Only these reads
/// can be stale.
struct DependencyEdge {
  Eigen::Index point;
  Eigen::Index neighbor;
  Side side;

  bool operator==(const DependencyEdge&) const = default;
};

/// Edges ordered by updating point, then left before right.
std::vector<DependencyEdge> dependency_edges(const grid::GridSpec& spec);

/// One delay in {0, ..., q-1} per dependency edge. Delay d at step k reads the
/// neighbour value written at step k - d.
struct DelayPattern {
  std::vector<int> delays;

  bool operator==(const DelayPattern&) const = default;
};

/// Number of switching modes q^E, or nullopt if it does not fit in 64 bits.
std::optional<std::uint64_t> mode_count(const AugmentedSpec& aspec);

/// Human readable q^E, e.g. "3^196".
std::string mode_count_text(const AugmentedSpec& aspec);

struct ModeMatrix {
  Eigen::MatrixXd w;
  DelayPattern pattern;
};

class ModeCapExceeded : public std::runtime_error {
 public:
  ModeCapExceeded(std::string count, std::uint64_t cap);
  const std::string& count() const noexcept { return count_; }
  std::uint64_t cap() const noexcept { return cap_; }

 private:
  std::string count_;
  std::uint64_t cap_;
};

inline constexpr std::uint64_t kDefaultModeCap = 100'000;

/// Every mode matrix, lexicographic in the edge order: the all-zero pattern
/// (synchronous) first, the all-(q-1) pattern (most delayed) last.
/// Throws ModeCapExceeded when q^E > cap.
std::vector<ModeMatrix> enumerate_modes(const AugmentedSpec& aspec,
                                        std::uint64_t cap = kDefaultModeCap);

/// Pattern with every edge at the oldest buffer entry.
DelayPattern most_delayed_pattern(const AugmentedSpec& aspec);

/// W_sigma for a fixed delay pattern. Block row 0 holds the stencil with each
/// stale neighbour read placed in the block column of its delay; block rows
/// 1..q-1 shift the history.
ModeMatrix build_mode_matrix(const AugmentedSpec& aspec, const DelayPattern& pattern);

/// Common unit-eigenvalue structure shared by every mode.
///
/// s1/s2 select the first and last grid coordinates of the newest block;
/// v1/v2 repeat the boundary ramps mu1/mu2 over all q blocks; psi = v1 s1 + v2 s2.
struct SteadyStateProjector {
  Eigen::MatrixXd psi;
  Eigen::VectorXd v1;
  Eigen::VectorXd v2;
  Eigen::RowVectorXd s1;
  Eigen::RowVectorXd s2;
  Eigen::Index grid_size = 0;

  /// psi * x without forming the matrix product.
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
};

SteadyStateProjector build_projector(const AugmentedSpec& aspec);

class DeflationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// W - psi. Throws DeflationError if the result is not strictly stable
/// (spectral radius >= 1 - 1e-12).
Eigen::MatrixXd deflate(const Eigen::MatrixXd& w, const SteadyStateProjector& proj);

/// Independent categorical delay distribution per dependency edge.
class SwitchingDistribution {
 public:
  explicit SwitchingDistribution(std::vector<std::vector<double>> per_edge);

  static SwitchingDistribution uniform(std::size_t num_edges, int buffer_len);
  /// Same categorical on every edge.
  static SwitchingDistribution identical(std::size_t num_edges, std::vector<double> probs);

  std::size_t num_edges() const noexcept { return per_edge_.size(); }
  int buffer_len() const noexcept { return buffer_len_; }
  const std::vector<double>& edge(std::size_t e) const { return per_edge_.at(e); }

 private:
  std::vector<std::vector<double>> per_edge_;
  int buffer_len_ = 1;
};

/// Product of the per-edge probabilities of the pattern's delays.
double mode_probability(const DelayPattern& pattern, const SwitchingDistribution& dist);

/// Lambda = sum_j pi_j (W_j - psi), formed by spreading each stale read over
/// its delay block columns with that edge's probabilities. No enumeration.
Eigen::MatrixXd expected_matrix(const AugmentedSpec& aspec, const SwitchingDistribution& dist);

/// Same quantity by explicit enumeration of all modes; used for cross-checks.
Eigen::MatrixXd expected_matrix_enumerated(const AugmentedSpec& aspec,
                                           const SwitchingDistribution& dist,
                                           std::uint64_t cap = kDefaultModeCap);

struct EigenstructureReport {
  std::array<double, 2> right_residuals{};  // ||W v_i - v_i||
  std::array<double, 2> left_residuals{};   // ||s_i W - s_i||
  std::vector<double> leading_moduli;       // three largest |lambda|
  int unit_eigenvalues = 0;                 // eigenvalues within tolerance of 1
  int unit_modulus = 0;                     // moduli >= 1 - tolerance
  double inf_norm = 0.0;
  bool passed = false;
};

inline constexpr double kEigenTolerance = 1e-10;

EigenstructureReport verify_eigenstructure(const Eigen::MatrixXd& w,
                                           const SteadyStateProjector& proj,
                                           double tolerance = kEigenTolerance);

}  // namespace asyncheat::modes
