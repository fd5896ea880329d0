#include "asyncheat/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <stdexcept>

namespace asyncheat::linalg {

namespace {

double gelfand_radius(const Eigen::MatrixXd& m) {
  // M^(2^j) = exp(log_scale) * S_j with ||S_j||_F = 1, so the Frobenius norm of
  // the power is exp(log_scale) without overflow.
  Eigen::MatrixXd s = m;
  double log_scale = 0.0;
  double estimate = 0.0;
  for (int j = 0; j < 40; ++j) {
    const double f = s.norm();
    if (f == 0.0) return 0.0;
    s /= f;
    log_scale += std::log(f);
    const double next = std::exp(std::ldexp(log_scale, -j));
    if (j > 4 && std::abs(next - estimate) <= 1e-9 * next) return next;
    estimate = next;
    s = s * s;
    log_scale *= 2.0;
  }
  return estimate;
}

}  // namespace

double spectral_radius(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("spectral_radius: matrix not square");
  if (m.size() == 0) return 0.0;
  if (m.rows() <= kDenseEigenLimit) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(m, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success) {
      throw std::runtime_error("spectral_radius: eigensolver did not converge");
    }
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
  return gelfand_radius(m);
}

double spectral_norm(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

double min_singular_value(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  return sv(sv.size() - 1);
}

SymmetricExtremes symmetric_extremes(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("symmetric eigensolver did not converge");
  }
  const auto& ev = es.eigenvalues();
  return {ev(0), ev(ev.size() - 1)};
}

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

double inf_norm(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

}  // namespace asyncheat::linalg
