#pragma once

#include "asyncheat/cancellation.hpp"
#include "asyncheat/linalg.hpp"

#include <Eigen/Core>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace asyncheat::analysis {

using linalg::spectral_norm;

// ---------------------------------------------------------------------------
// Discrete Lyapunov equation  W^T P W - P = -I
// ---------------------------------------------------------------------------

enum class LyapunovMethod {
  automatic,  ///< kronecker up to kKroneckerLimit, schur above
  kronecker,  ///< vectorized (I - W^T (x) W^T) vec(P) = vec(I), dense LU
  schur,      ///< complex Schur reduction, column-wise triangular solves
  series,     ///< doubling of the series sum_k (W^T)^k W^k
};

std::string to_string(LyapunovMethod method);

/// Largest dimension solved through the vectorized Kronecker system.
inline constexpr Eigen::Index kKroneckerLimit = 50;

/// Relative residual above which a certificate is not trusted.
inline constexpr double kResidualTolerance = 1e-8;

class LyapunovError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// P solving W^T P W - P = -I together with the quantities derived from it.
struct LyapunovCertificate {
  Eigen::MatrixXd p;
  double lambda_max = 0.0;
  double lambda_min = 0.0;
  /// ||W^T P W - P + I||_F / ||P||_F
  double residual = 0.0;
  /// 1 - 1/lambda_max: per-step contraction of the quadratic form.
  double rate = 0.0;
  /// lambda_max / lambda_min: sandwich constant of the quadratic form.
  double k_const = 1.0;
  LyapunovMethod method = LyapunovMethod::automatic;
  int iterations = 0;

  bool trusted() const noexcept { return lambda_min > 0.0 && residual < kResidualTolerance; }
};

/// Solves W^T P W - P = -I. Throws LyapunovError when the spectral radius of
/// W is not below one, or when the series does not settle.
LyapunovCertificate solve_discrete_lyapunov(const Eigen::MatrixXd& w,
                                            LyapunovMethod method = LyapunovMethod::automatic,
                                            const CancellationToken* cancel = nullptr);

// ---------------------------------------------------------------------------
// Mean error
// ---------------------------------------------------------------------------

/// sqrt(K * rate^k) * ||e(0)|| for k = 0..steps, with rate taken from the
/// certificate of the most delayed mode.
std::vector<double> convergence_rate_bound(const LyapunovCertificate& worst_mode, double k_const,
                                           double e0_norm, int steps);

struct MeanCurve {
  std::vector<double> norms;             ///< ||Lambda^k e0||, k = 0..steps
  std::vector<Eigen::VectorXd> vectors;  ///< Lambda^k e0, only when requested
};

MeanCurve exact_mean_curve(const Eigen::MatrixXd& lambda, const Eigen::VectorXd& e0, int steps,
                           bool keep_vectors = false);

struct MeanContractionReport {
  /// lambda_max(Lambda^T Lambda - I + I / lambda_max(P_m)); <= 0 means the
  /// identity certificate P = I works.
  double identity_margin = 0.0;
  bool identity_path_holds = false;
  /// Certificate of Lambda itself, solved when the identity path fails.
  std::optional<LyapunovCertificate> solved;
  /// K used by the mean bound: 1 on the identity path, cond(P_Lambda) otherwise.
  double k_const = 1.0;
  /// True when the worst-mode rate is no faster than the rate certified for
  /// Lambda, so K * rate_m^k is a valid envelope.
  bool rate_dominated = false;
  double min_singular_value = 0.0;
  bool lambda_singular = false;
};

MeanContractionReport verify_mean_contraction(const Eigen::MatrixXd& lambda,
                                              const LyapunovCertificate& worst_mode,
                                              const CancellationToken* cancel = nullptr);

// ---------------------------------------------------------------------------
// Second moment and error probability
// ---------------------------------------------------------------------------

/// A power norm counts as below one when ||W^k||^4 < 1 - kTailThreshold.
inline constexpr double kTailThreshold = 1e-10;

/// Constants controlling ||W^k||^4 for the most delayed deflated mode.
struct TailConstants {
  int k0 = 1;     ///< first k with ||W^k||^4 below one
  double c0 = 1;  ///< max(1, max_{k<k0} ||W^k||^4)
  double c1 = 0;  ///< ||W^k0||^4
  /// 1 - (1 - c1) / (k0 c0)
  double second_moment_rate = 0.0;
  /// k0 c0 / (1 - c1): bounds sum_k ||W^k||^4 and hence lambda_max of the
  /// lifted certificate.
  double proposition_bound = 0.0;
  /// sqrt(proposition_bound): sandwich constant of the lifted certificate
  /// (lambda_min >= 1), used as K in the probability bound.
  double lifted_k_const = 1.0;
};

class TailHorizonExhausted : public std::runtime_error {
 public:
  TailHorizonExhausted(int horizon, double smallest_norm);
  int horizon() const noexcept { return horizon_; }
  double smallest_norm() const noexcept { return smallest_norm_; }

 private:
  int horizon_;
  double smallest_norm_;
};

inline constexpr int kDefaultTailHorizon = 100'000;

/// Scans ||W^k|| for k = 0, 1, ... until the fourth power drops below one.
TailConstants tail_constants(const Eigen::MatrixXd& w, int horizon = kDefaultTailHorizon,
                             const CancellationToken* cancel = nullptr);

/// ||W^k||_2 for k = 0..count by dense SVD.
std::vector<double> power_norms(const Eigen::MatrixXd& w, int count);

/// Largest lifted dimension (dim^2) solved directly.
inline constexpr Eigen::Index kLiftedLimit = 2500;

struct SecondMomentReport {
  TailConstants constants;
  /// lambda_max of P~ solving Gamma^T P~ Gamma - P~ = -I, Gamma = W (x) W;
  /// empty in bound-only mode (dimension guard exceeded).
  std::optional<double> lifted_lambda_max;
  double truncated_sum = 0.0;  ///< sum_{k<=horizon} ||W^k||^4
  double proposition_bound = 0.0;
  bool lower_strict = false;  ///< lifted_lambda_max < truncated_sum
  bool upper_holds = false;   ///< truncated_sum <= proposition_bound
  bool upper_strict = false;  ///< truncated_sum < proposition_bound
};

SecondMomentReport second_moment_bound_check(const Eigen::MatrixXd& w, int horizon = 500,
                                             const CancellationToken* cancel = nullptr);

struct ErrorBoundCurve {
  double epsilon = 0.0;
  std::vector<double> values;  ///< min(1, beta(k)), k = 0..steps
  std::vector<double> beta;    ///< unclamped beta(k) (may be +inf)
};

/// beta(k) = (sqrt(d) K / eps) * second_moment_rate^(k/2) * ||e(0)||^2.
/// K defaults to the lifted sandwich constant of `tc`.
ErrorBoundCurve error_probability_bound(const TailConstants& tc, const Eigen::VectorXd& e0,
                                        double epsilon, int steps, Eigen::Index d,
                                        std::optional<double> k_const = std::nullopt);

struct KronNormCheck {
  double lifted = 0.0;  ///< ||(W (x) W)^k||
  double squared = 0.0; ///< ||W^k||^2
  double abs_diff = 0.0;
};

/// Materializes the Kronecker power; guarded by kLiftedLimit.
KronNormCheck kron_norm_identity_check(const Eigen::MatrixXd& w, int k);

class DimensionGuard : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace asyncheat::analysis
