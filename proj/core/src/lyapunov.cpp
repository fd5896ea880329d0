#include "asyncheat/analysis.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <cmath>

namespace asyncheat::analysis {

using Eigen::Index;
using Eigen::MatrixXd;

std::string to_string(LyapunovMethod method) {
  switch (method) {
    case LyapunovMethod::automatic: return "automatic";
    case LyapunovMethod::kronecker: return "kronecker";
    case LyapunovMethod::schur: return "schur";
    case LyapunovMethod::series: return "series";
  }
  return "unknown";
}

namespace {

MatrixXd solve_kronecker(const MatrixXd& w) {
  const Index n = w.rows();
  const MatrixXd wt = w.transpose();
  // vec(W^T P W) = (W^T (x) W^T) vec(P)
  MatrixXd system = -linalg::kron(wt, wt);
  system.diagonal().array() += 1.0;
  const Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(
      MatrixXd::Identity(n, n).eval().data(), n * n);
  Eigen::PartialPivLU<MatrixXd> lu(system);
  const Eigen::VectorXd x = lu.solve(rhs);
  return Eigen::Map<const MatrixXd>(x.data(), n, n);
}

// W = U T U^*, Y = U^* P U turns the equation into T^* Y T - Y = -I, which is
// solved one column at a time:
//   (T_jj T^* - I) y_j = -e_j - T^* sum_{l<j} y_l T_lj
MatrixXd solve_schur(const MatrixXd& w, const CancellationToken* cancel) {
  const Index n = w.rows();
  Eigen::ComplexSchur<MatrixXd> schur(w);
  if (schur.info() != Eigen::Success) throw LyapunovError("Schur decomposition failed");
  const Eigen::MatrixXcd& t = schur.matrixT();
  const Eigen::MatrixXcd& u = schur.matrixU();
  const Eigen::MatrixXcd t_adj = t.adjoint();

  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
  Eigen::MatrixXcd lhs(n, n);
  for (Index j = 0; j < n; ++j) {
    if ((j & 63) == 0) throw_if_cancelled(cancel);
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(n);
    if (j > 0) rhs.noalias() = -(t_adj * (y.leftCols(j) * t.col(j).head(j)));
    rhs(j) -= 1.0;
    lhs.noalias() = t(j, j) * t_adj;
    lhs.diagonal().array() -= 1.0;
    y.col(j) = lhs.triangularView<Eigen::Lower>().solve(rhs);
  }
  return (u * y * u.adjoint()).real();
}

MatrixXd solve_series(const MatrixXd& w, const CancellationToken* cancel, int& iterations) {
  // After j doublings P holds sum_{k < 2^j} (W^T)^k W^k and A = W^(2^j).
  const Index n = w.rows();
  MatrixXd p = MatrixXd::Identity(n, n);
  MatrixXd a = w;
  MatrixXd increment(n, n);
  for (iterations = 1; iterations <= 80; ++iterations) {
    throw_if_cancelled(cancel);
    increment.noalias() = a.transpose() * p * a;
    p += increment;
    if (increment.norm() <= 1e-14 * p.norm()) return p;
    a = (a * a).eval();
    if (!a.allFinite() || !p.allFinite()) break;
  }
  throw LyapunovError("Lyapunov series did not converge");
}

}  // namespace

LyapunovCertificate solve_discrete_lyapunov(const MatrixXd& w, LyapunovMethod method,
                                            const CancellationToken* cancel) {
  if (w.rows() != w.cols() || w.rows() == 0) {
    throw std::invalid_argument("solve_discrete_lyapunov: matrix must be square and non-empty");
  }
  const double rho = linalg::spectral_radius(w);
  if (!(rho < 1.0)) {
    throw LyapunovError("spectral radius " + std::to_string(rho) +
                        " >= 1: no positive definite solution");
  }
  if (method == LyapunovMethod::automatic) {
    method = w.rows() <= kKroneckerLimit ? LyapunovMethod::kronecker : LyapunovMethod::schur;
  }

  LyapunovCertificate cert;
  cert.method = method;
  MatrixXd p;
  switch (method) {
    case LyapunovMethod::kronecker:
      if (w.rows() > 80) {
        throw std::invalid_argument("kronecker method limited to small dimensions");
      }
      p = solve_kronecker(w);
      break;
    case LyapunovMethod::schur:
      p = solve_schur(w, cancel);
      break;
    case LyapunovMethod::series:
      p = solve_series(w, cancel, cert.iterations);
      break;
    case LyapunovMethod::automatic:
      break;
  }
  cert.p = 0.5 * (p + p.transpose());

  MatrixXd res = w.transpose() * cert.p * w - cert.p;
  res.diagonal().array() += 1.0;
  cert.residual = res.norm() / cert.p.norm();

  const auto ext = linalg::symmetric_extremes(cert.p);
  cert.lambda_min = ext.min;
  cert.lambda_max = ext.max;
  cert.rate = 1.0 - 1.0 / cert.lambda_max;
  cert.k_const = cert.lambda_max / cert.lambda_min;
  return cert;
}

}  // namespace asyncheat::analysis
