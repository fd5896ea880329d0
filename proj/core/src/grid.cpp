#include "asyncheat/grid.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace asyncheat::grid {

namespace {

// alpha*dt/dx^2 for the reference parameters (0.5, 0.01, 0.1) evaluates to
// 0.4999999999999999; ratios this close to the limit are taken as exactly 0.5
// so that the centre weight 1-2r is an exact zero.
constexpr double kRatioLimit = 0.5;
constexpr double kRatioSnap = 1e-14;

}  // namespace

GridSpec::GridSpec(int num_pes, int points_per_pe, double dx, double dt, double alpha)
    : num_pes_(num_pes), points_per_pe_(points_per_pe), dx_(dx), dt_(dt), alpha_(alpha) {
  if (num_pes < 1 || points_per_pe < 1) {
    throw std::invalid_argument("num_pes and points_per_pe must be positive");
  }
  if (static_cast<long long>(num_pes) * points_per_pe < 3) {
    throw std::invalid_argument("grid needs at least 3 points (one interior point)");
  }
  if (!(dx > 0.0) || !(dt > 0.0) || !(alpha > 0.0)) {
    throw std::invalid_argument("dx, dt and alpha must be positive");
  }
  r_ = alpha * dt / (dx * dx);
  if (std::abs(r_ - kRatioLimit) <= kRatioSnap) r_ = kRatioLimit;
  if (!(r_ > 0.0) || r_ > kRatioLimit) {
    throw std::invalid_argument("mesh ratio r = " + std::to_string(r_) +
                                " outside (0, 0.5]");
  }
}

GridSpec GridSpec::with_ratio(int num_pes, int points_per_pe, double r) {
  return GridSpec(num_pes, points_per_pe, 1.0, r, 1.0);
}

Eigen::MatrixXd build_sync_matrix(const GridSpec& spec) {
  const Eigen::Index nn = spec.size();
  const double r = spec.r();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(nn, nn);
  a(0, 0) = 1.0;
  a(nn - 1, nn - 1) = 1.0;
  for (Eigen::Index i = 1; i + 1 < nn; ++i) {
    a(i, i - 1) = r;
    a(i, i) = 1.0 - 2.0 * r;
    a(i, i + 1) = r;
  }
  return a;
}

StateVector sync_step(const Eigen::MatrixXd& a, const StateVector& u) {
  if (a.rows() != a.cols() || a.cols() != u.size()) {
    throw std::invalid_argument("sync_step: matrix is " + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + ", state has " +
                                std::to_string(u.size()) + " entries");
  }
  return a * u;
}

StateVector cos2_initial_condition(const GridSpec& spec) {
  const Eigen::Index nn = spec.size();
  StateVector u(nn);
  const double denom = 2.0 * static_cast<double>(nn - 1);
  for (Eigen::Index j = 0; j < nn; ++j) {
    const double i = static_cast<double>(j + 1);
    const double c = std::cos(3.0 * std::numbers::pi * i / denom);
    u(j) = c * c;
  }
  return u;
}

StateVector steady_state_profile(const GridSpec& spec, const BoundaryConditions& bc) {
  const Eigen::Index nn = spec.size();
  const double span = static_cast<double>(nn - 1);
  StateVector u(nn);
  for (Eigen::Index j = 0; j < nn; ++j) {
    const double t = static_cast<double>(j);
    u(j) = bc.left * ((span - t) / span) + bc.right * (t / span);
  }
  return u;
}

StateVector with_boundary(StateVector u, const BoundaryConditions& bc) {
  if (u.size() < 2) throw std::invalid_argument("with_boundary: state too short");
  u(0) = bc.left;
  u(u.size() - 1) = bc.right;
  return u;
}

}  // namespace asyncheat::grid
