#pragma once

#include <Eigen/Core>

namespace asyncheat::grid {

using StateVector = Eigen::VectorXd;

/// Explicit 1D heat-equation discretization split across processing elements.
///
/// The grid has num_pes * points_per_pe points. Points 0 and size()-1 carry
/// the Dirichlet values and are updated by identity rows. The mesh ratio
/// r = alpha * dt / dx^2 must satisfy 0 < r <= 0.5.
class GridSpec {
 public:
  GridSpec(int num_pes, int points_per_pe, double dx, double dt, double alpha);

  /// Unit dx and alpha, dt = r. Convenient when only the mesh ratio matters.
  static GridSpec with_ratio(int num_pes, int points_per_pe, double r);

  int num_pes() const noexcept { return num_pes_; }
  int points_per_pe() const noexcept { return points_per_pe_; }
  Eigen::Index size() const noexcept {
    return static_cast<Eigen::Index>(num_pes_) * points_per_pe_;
  }
  double dx() const noexcept { return dx_; }
  double dt() const noexcept { return dt_; }
  double alpha() const noexcept { return alpha_; }
  double r() const noexcept { return r_; }

  /// Index of the processing element owning grid point `point` (0-based).
  int pe_of(Eigen::Index point) const noexcept {
    return static_cast<int>(point / points_per_pe_);
  }

 private:
  int num_pes_;
  int points_per_pe_;
  double dx_;
  double dt_;
  double alpha_;
  double r_;
};

struct BoundaryConditions {
  double left = 0.0;
  double right = 0.0;
};

/// Synchronous update matrix A (Nn x Nn): identity first/last rows,
/// (r, 1-2r, r) on interior rows.
Eigen::MatrixXd build_sync_matrix(const GridSpec& spec);

/// U(k+1) = A U(k). Throws std::invalid_argument on a dimension mismatch.
StateVector sync_step(const Eigen::MatrixXd& a, const StateVector& u);

/// u_i = cos^2(3 pi i / (2 (Nn - 1))) with 1-based i over all grid points.
StateVector cos2_initial_condition(const GridSpec& spec);

/// Linear ramp between the boundary values; the fixed point of every update.
StateVector steady_state_profile(const GridSpec& spec, const BoundaryConditions& bc);

/// Copy of `u` with the first and last entries replaced by the Dirichlet values.
StateVector with_boundary(StateVector u, const BoundaryConditions& bc);

}  // namespace asyncheat::grid
