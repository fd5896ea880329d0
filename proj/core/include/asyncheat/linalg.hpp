#pragma once

#include <Eigen/Core>

namespace asyncheat::linalg {

/// Matrices up to this dimension use a dense eigensolver for the spectral radius.
inline constexpr Eigen::Index kDenseEigenLimit = 500;

/// Largest eigenvalue modulus.
///
/// Dense eigensolver below kDenseEigenLimit; above it, Gelfand's formula
/// ||M^(2^j)||^(1/2^j) evaluated by repeated squaring with log-scale
/// renormalization (accurate to roughly 1e-6 relative).
double spectral_radius(const Eigen::MatrixXd& m);

/// Largest singular value (relative accuracy ~1e-12).
double spectral_norm(const Eigen::MatrixXd& m);

/// Smallest singular value.
double min_singular_value(const Eigen::MatrixXd& m);

/// Extreme eigenvalues of a symmetric matrix (only the lower triangle is read).
struct SymmetricExtremes {
  double min = 0.0;
  double max = 0.0;
};
SymmetricExtremes symmetric_extremes(const Eigen::MatrixXd& m);

/// Kronecker product a (x) b.
Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Maximum absolute row sum.
double inf_norm(const Eigen::MatrixXd& m);

}  // namespace asyncheat::linalg
