#include "asyncheat/analysis.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace asyncheat::analysis {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::vector<double> convergence_rate_bound(const LyapunovCertificate& worst_mode, double k_const,
                                           double e0_norm, int steps) {
  if (steps < 0) throw std::invalid_argument("steps must be non-negative");
  std::vector<double> out(static_cast<std::size_t>(steps) + 1);
  const double prefactor = std::sqrt(k_const) * e0_norm;
  const double half_log_rate = 0.5 * std::log(worst_mode.rate);
  out[0] = prefactor;
  for (int k = 1; k <= steps; ++k) {
    out[static_cast<std::size_t>(k)] = prefactor * std::exp(half_log_rate * k);
  }
  return out;
}

MeanCurve exact_mean_curve(const MatrixXd& lambda, const VectorXd& e0, int steps,
                           bool keep_vectors) {
  if (lambda.rows() != lambda.cols() || lambda.cols() != e0.size()) {
    throw std::invalid_argument("exact_mean_curve: dimension mismatch");
  }
  MeanCurve curve;
  curve.norms.reserve(static_cast<std::size_t>(steps) + 1);
  VectorXd e = e0;
  VectorXd next(e.size());
  for (int k = 0; k <= steps; ++k) {
    curve.norms.push_back(e.norm());
    if (keep_vectors) curve.vectors.push_back(e);
    if (k == steps) break;
    next.noalias() = lambda * e;
    e.swap(next);
  }
  return curve;
}

MeanContractionReport verify_mean_contraction(const MatrixXd& lambda,
                                              const LyapunovCertificate& worst_mode,
                                              const CancellationToken* cancel) {
  MeanContractionReport report;
  MatrixXd g = lambda.transpose() * lambda;
  g.diagonal().array() += 1.0 / worst_mode.lambda_max - 1.0;
  report.identity_margin = linalg::symmetric_extremes(g).max;
  report.identity_path_holds = report.identity_margin <= 0.0;
  report.min_singular_value = linalg::min_singular_value(lambda);
  report.lambda_singular = report.min_singular_value < 1e-10;

  if (report.identity_path_holds) {
    report.k_const = 1.0;
    report.rate_dominated = true;
    return report;
  }
  report.solved = solve_discrete_lyapunov(lambda, LyapunovMethod::automatic, cancel);
  report.k_const = report.solved->k_const;
  report.rate_dominated = report.solved->lambda_max <= worst_mode.lambda_max;
  return report;
}

TailHorizonExhausted::TailHorizonExhausted(int horizon, double smallest_norm)
    : std::runtime_error("||W^k|| stayed >= 1 for k <= " + std::to_string(horizon) +
                         " (smallest norm seen " + std::to_string(smallest_norm) + ")"),
      horizon_(horizon),
      smallest_norm_(smallest_norm) {}

namespace {

// Largest singular value by warm-started block subspace iteration on M^T M.
// Successive powers differ little, so the previous basis is a good start and
// only a few sweeps are needed. Rayleigh-Ritz values never exceed the true
// value, so callers confirm threshold crossings with a full SVD.
class SubspaceNormTracker {
 public:
  explicit SubspaceNormTracker(Index n) {
    const Index b = std::min<Index>(n, 8);
    std::mt19937_64 rng(0x5eed);
    std::normal_distribution<double> normal;
    MatrixXd start(n, b);
    for (Index j = 0; j < b; ++j)
      for (Index i = 0; i < n; ++i) start(i, j) = normal(rng);
    basis_ = orthonormalize(start);
  }

  double estimate(const MatrixXd& m) {
    double theta_prev = -1.0;
    double theta = 0.0;
    for (int sweep = 0; sweep < 500; ++sweep) {
      z_.noalias() = m * basis_;
      y_.noalias() = m.transpose() * z_;
      MatrixXd h = basis_.transpose() * y_;
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (h + h.transpose()),
                                                 Eigen::EigenvaluesOnly);
      theta = es.eigenvalues()(es.eigenvalues().size() - 1);
      if (theta <= 0.0) return 0.0;
      basis_ = orthonormalize(y_);
      if (sweep > 0 && std::abs(theta - theta_prev) <= 1e-13 * theta) break;
      theta_prev = theta;
    }
    return std::sqrt(theta);
  }

 private:
  static MatrixXd orthonormalize(const MatrixXd& a) {
    Eigen::HouseholderQR<MatrixXd> qr(a);
    return qr.householderQ() * MatrixXd::Identity(a.rows(), a.cols());
  }

  MatrixXd basis_;
  MatrixXd z_;
  MatrixXd y_;
};

constexpr int kExactPrefix = 8;
constexpr int kRenormalizeEvery = 64;

}  // namespace

TailConstants tail_constants(const MatrixXd& w, int horizon, const CancellationToken* cancel) {
  if (w.rows() != w.cols() || w.rows() == 0) {
    throw std::invalid_argument("tail_constants: matrix must be square and non-empty");
  }
  if (horizon < 1) throw std::invalid_argument("tail_constants: horizon must be >= 1");
  const Index n = w.rows();

  // Deflated mode matrices are a sparse stencil plus two dense columns.
  const Eigen::SparseMatrix<double> ws = w.sparseView();
  const bool use_sparse = ws.nonZeros() * 4 < n * n;

  // W^k = exp(log_scale) * m
  MatrixXd m = MatrixXd::Identity(n, n);
  MatrixXd next(n, n);
  double log_scale = 0.0;
  SubspaceNormTracker tracker(n);

  const double threshold = 1.0 - kTailThreshold;
  double c0 = 1.0;
  MatrixXd argmax_power;
  double argmax_log_scale = 0.0;
  int argmax_k = 0;
  double smallest = std::numeric_limits<double>::infinity();

  for (int k = 1; k <= horizon; ++k) {
    if ((k & 255) == 0) throw_if_cancelled(cancel);
    if (use_sparse) {
      next.noalias() = ws * m;
    } else {
      next.noalias() = w * m;
    }
    m.swap(next);
    if (k % kRenormalizeEvery == 0) {
      const double f = m.norm();
      if (f > 0.0) {
        m /= f;
        log_scale += std::log(f);
      }
    }
    const double scale = std::exp(log_scale);
    double norm = (k <= kExactPrefix ? linalg::spectral_norm(m) : tracker.estimate(m)) * scale;
    double fourth = std::pow(norm, 4);
    if (fourth < threshold && k > kExactPrefix) {
      norm = linalg::spectral_norm(m) * scale;
      fourth = std::pow(norm, 4);
    }
    if (fourth < threshold) {
      if (argmax_k > kExactPrefix) {
        c0 = std::max(1.0, std::pow(linalg::spectral_norm(argmax_power) *
                                        std::exp(argmax_log_scale), 4));
      }
      TailConstants tc;
      tc.k0 = k;
      tc.c0 = c0;
      tc.c1 = fourth;
      const double k0c0 = static_cast<double>(k) * c0;
      tc.second_moment_rate = 1.0 - (1.0 - fourth) / k0c0;
      tc.proposition_bound = k0c0 / (1.0 - fourth);
      tc.lifted_k_const = std::sqrt(tc.proposition_bound);
      return tc;
    }
    if (fourth > c0) {
      c0 = fourth;
      argmax_k = k;
      if (k > kExactPrefix) {
        argmax_power = m;
        argmax_log_scale = log_scale;
      }
    }
    smallest = std::min(smallest, norm);
  }
  throw TailHorizonExhausted(horizon, smallest);
}

std::vector<double> power_norms(const MatrixXd& w, int count) {
  if (count < 0) throw std::invalid_argument("power_norms: count must be non-negative");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count) + 1);
  MatrixXd m = MatrixXd::Identity(w.rows(), w.cols());
  for (int k = 0; k <= count; ++k) {
    out.push_back(linalg::spectral_norm(m));
    if (k < count) m = (w * m).eval();
  }
  return out;
}

SecondMomentReport second_moment_bound_check(const MatrixXd& w, int horizon,
                                             const CancellationToken* cancel) {
  SecondMomentReport report;
  report.constants = tail_constants(w, kDefaultTailHorizon, cancel);
  report.proposition_bound = report.constants.proposition_bound;
  for (double x : power_norms(w, horizon)) report.truncated_sum += std::pow(x, 4);
  report.upper_holds = report.truncated_sum <= report.proposition_bound;
  report.upper_strict = report.truncated_sum < report.proposition_bound;

  if (w.rows() * w.rows() <= kLiftedLimit) {
    const MatrixXd gamma = linalg::kron(w, w);
    const auto cert = solve_discrete_lyapunov(gamma, LyapunovMethod::automatic, cancel);
    report.lifted_lambda_max = cert.lambda_max;
    report.lower_strict = cert.lambda_max < report.truncated_sum;
  }
  return report;
}

ErrorBoundCurve error_probability_bound(const TailConstants& tc, const VectorXd& e0,
                                        double epsilon, int steps, Index d,
                                        std::optional<double> k_const) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (steps < 0) throw std::invalid_argument("steps must be non-negative");
  if (d < 1) throw std::invalid_argument("dimension must be positive");
  const double k = k_const.value_or(tc.lifted_k_const);
  const double y0 = e0.squaredNorm();

  ErrorBoundCurve curve;
  curve.epsilon = epsilon;
  curve.values.resize(static_cast<std::size_t>(steps) + 1);
  curve.beta.resize(curve.values.size());
  if (y0 == 0.0) {
    std::fill(curve.values.begin(), curve.values.end(), 0.0);
    std::fill(curve.beta.begin(), curve.beta.end(), 0.0);
    return curve;
  }
  const double log_prefactor =
      0.5 * std::log(static_cast<double>(d)) + std::log(k) - std::log(epsilon) + std::log(y0);
  // log(1 - (1 - c1) / (k0 c0)) without cancellation near 1
  const double log_rate = std::log1p(-(1.0 - tc.c1) / (tc.k0 * tc.c0));
  for (int s = 0; s <= steps; ++s) {
    const double log_beta = log_prefactor + 0.5 * s * log_rate;
    const double beta = std::exp(log_beta);
    curve.beta[static_cast<std::size_t>(s)] = beta;
    curve.values[static_cast<std::size_t>(s)] = std::min(1.0, beta);
  }
  return curve;
}

KronNormCheck kron_norm_identity_check(const MatrixXd& w, int k) {
  if (k < 0) throw std::invalid_argument("kron_norm_identity_check: k must be non-negative");
  if (w.rows() * w.rows() > kLiftedLimit) {
    throw DimensionGuard("lifted dimension " + std::to_string(w.rows() * w.rows()) +
                         " exceeds " + std::to_string(kLiftedLimit));
  }
  const MatrixXd gamma = linalg::kron(w, w);
  MatrixXd gamma_k = MatrixXd::Identity(gamma.rows(), gamma.cols());
  MatrixXd w_k = MatrixXd::Identity(w.rows(), w.cols());
  for (int i = 0; i < k; ++i) {
    gamma_k = (gamma * gamma_k).eval();
    w_k = (w * w_k).eval();
  }
  KronNormCheck out;
  out.lifted = linalg::spectral_norm(gamma_k);
  const double nk = linalg::spectral_norm(w_k);
  out.squared = nk * nk;
  out.abs_diff = std::abs(out.lifted - out.squared);
  return out;
}

}  // namespace asyncheat::analysis
