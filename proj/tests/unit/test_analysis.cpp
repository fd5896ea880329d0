#include "asyncheat/analysis.hpp"
#include "asyncheat/modes.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <random>

using namespace asyncheat;
using analysis::LyapunovMethod;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct System {
  modes::AugmentedSpec aspec;
  modes::SteadyStateProjector proj;
  MatrixXd w_tilde_m;
  MatrixXd lambda;
  VectorXd e0;
};

System make_system(int num_pes, int q) {
  modes::AugmentedSpec aspec(grid::GridSpec(num_pes, 1, 0.1, 0.01, 0.5), q);
  const auto proj = modes::build_projector(aspec);
  const auto wm = modes::build_mode_matrix(aspec, modes::most_delayed_pattern(aspec)).w;
  const auto edges = modes::dependency_edges(aspec.grid()).size();
  const auto lambda = modes::expected_matrix(aspec, modes::SwitchingDistribution::uniform(edges, q));
  const VectorXd x0 =
      grid::with_boundary(grid::cos2_initial_condition(aspec.grid()), {1.0, 0.0}).replicate(q, 1);
  return {aspec, proj, modes::deflate(wm, proj), lambda, x0 - proj.apply(x0)};
}

MatrixXd random_stable(Eigen::Index n, double radius, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = g(rng);
  Eigen::EigenSolver<MatrixXd> es(m, false);
  return m * (radius / es.eigenvalues().cwiseAbs().maxCoeff());
}

}  // namespace

TEST(SpectralNorm, KnownValues) {
  EXPECT_NEAR(analysis::spectral_norm(MatrixXd::Identity(4, 4)), 1.0, 1e-15);
  EXPECT_NEAR(analysis::spectral_norm(Eigen::Vector2d(3, -4).asDiagonal().toDenseMatrix()), 4.0,
              1e-14);
  std::mt19937_64 rng(1);
  const MatrixXd m = random_stable(50, 2.0, rng);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m.transpose() * m);
  EXPECT_NEAR(analysis::spectral_norm(m), std::sqrt(es.eigenvalues().maxCoeff()),
              1e-10 * analysis::spectral_norm(m));
}

TEST(SpectralRadius, LargeMatricesUseRepeatedSquaring) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  const Eigen::Index n = linalg::kDenseEigenLimit + 20;
  MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = g(rng);
  const MatrixXd q = Eigen::HouseholderQR<MatrixXd>(a).householderQ();
  VectorXd d = VectorXd::LinSpaced(n, -0.5, 0.5);
  d(7) = -0.9;
  const MatrixXd m = q * d.asDiagonal() * q.transpose();
  EXPECT_NEAR(linalg::spectral_radius(m), 0.9, 1e-6);
  EXPECT_EQ(linalg::spectral_radius(MatrixXd::Zero(n, n)), 0.0);
}

TEST(Lyapunov, ZeroMatrixGivesIdentity) {
  const auto c = analysis::solve_discrete_lyapunov(MatrixXd::Zero(5, 5));
  EXPECT_LT((c.p - MatrixXd::Identity(5, 5)).norm(), 1e-15);
  EXPECT_DOUBLE_EQ(c.lambda_max, 1.0);
  EXPECT_TRUE(c.trusted());
}

TEST(Lyapunov, DiagonalClosedForm) {
  const Eigen::Vector3d a(0.9, -0.5, 0.1);
  for (auto m : {LyapunovMethod::kronecker, LyapunovMethod::schur, LyapunovMethod::series}) {
    const auto c = analysis::solve_discrete_lyapunov(a.asDiagonal().toDenseMatrix(), m);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(c.p(i, i), 1.0 / (1.0 - a(i) * a(i)), 1e-12);
    EXPECT_NEAR(c.lambda_max, 1.0 / (1 - 0.81), 1e-12);
    EXPECT_NEAR(c.rate, 0.81, 1e-12);
  }
}

TEST(Lyapunov, RejectsUnstableMatrices) {
  EXPECT_THROW(analysis::solve_discrete_lyapunov(MatrixXd::Identity(3, 3)), analysis::LyapunovError);
  EXPECT_THROW(analysis::solve_discrete_lyapunov(MatrixXd::Zero(2, 3)), std::invalid_argument);
}

TEST(Lyapunov, WorstModeSmallSystemMatchesSeriesOracle) {
  const auto s = make_system(3, 2);
  const auto oracle_p = oracle::lyapunov_series(s.w_tilde_m);
  for (auto m : {LyapunovMethod::kronecker, LyapunovMethod::schur, LyapunovMethod::series}) {
    const auto c = analysis::solve_discrete_lyapunov(s.w_tilde_m, m);
    EXPECT_GT(c.lambda_max, 1.0);
    EXPECT_LT(c.residual, 1e-10);
    EXPECT_LT((c.p - oracle_p).norm() / oracle_p.norm(), 1e-12);
  }
  EXPECT_NEAR(analysis::solve_discrete_lyapunov(s.w_tilde_m).lambda_max, 3.5, 1e-12);
}

TEST(Lyapunov, MethodsAgreeOnRandomStableMatrices) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    const auto n = static_cast<Eigen::Index>(2 + t * 2);
    const MatrixXd w = random_stable(n, 0.3 + 0.03 * t, rng);
    const auto k = analysis::solve_discrete_lyapunov(w, LyapunovMethod::kronecker);
    const auto s = analysis::solve_discrete_lyapunov(w, LyapunovMethod::schur);
    const auto ser = analysis::solve_discrete_lyapunov(w, LyapunovMethod::series);
    const auto naive = oracle::lyapunov_series(w);
    for (const auto* c : {&k, &s, &ser}) {
      EXPECT_LT(c->residual, 1e-8);
      EXPECT_LT((c->p - naive).norm() / naive.norm(), 1e-8);
      EXPECT_GT(c->lambda_min, 0.0);
    }
  }
}

TEST(Lyapunov, Cancellation) {
  CancellationToken tok;
  tok.cancel();
  std::mt19937_64 rng(4);
  EXPECT_THROW(analysis::solve_discrete_lyapunov(random_stable(60, 0.5, rng),
                                                 LyapunovMethod::schur, &tok),
               Cancelled);
}

TEST(MeanCurve, TrivialCases) {
  const auto s = make_system(4, 2);
  const auto zero = analysis::exact_mean_curve(s.lambda, VectorXd::Zero(8), 10);
  for (double x : zero.norms) EXPECT_EQ(x, 0.0);
  const auto c = analysis::exact_mean_curve(s.lambda, s.e0, 1, true);
  EXPECT_EQ(c.vectors[1], s.lambda * s.e0);
  EXPECT_EQ(c.norms[0], s.e0.norm());
}

TEST(RateBound, StartsAtScaledInitialError) {
  const auto s = make_system(4, 2);
  const auto cert = analysis::solve_discrete_lyapunov(s.w_tilde_m);
  const auto b = analysis::convergence_rate_bound(cert, 4.0, 2.0, 3);
  EXPECT_DOUBLE_EQ(b[0], 4.0);
  EXPECT_NEAR(b[2], 4.0 * cert.rate, 1e-14);
}

TEST(RateBound, DominatesExactMeanOnSmallSystem) {
  const auto s = make_system(4, 2);
  const auto cert = analysis::solve_discrete_lyapunov(s.w_tilde_m);
  const auto mean = analysis::verify_mean_contraction(s.lambda, cert);
  EXPECT_TRUE(mean.rate_dominated);
  EXPECT_GE(mean.k_const, 1.0);
  const auto bound = analysis::convergence_rate_bound(cert, mean.k_const, s.e0.norm(), 500);
  const auto exact = analysis::exact_mean_curve(s.lambda, s.e0, 500);
  for (std::size_t k = 0; k <= 500; ++k) EXPECT_GE(bound[k], exact.norms[k]);
}

TEST(MeanContraction, SingleModeSolvesTheSameEquation) {
  // q = 1: the expected matrix is the deflated synchronous matrix itself
  const auto s = make_system(10, 1);
  EXPECT_LT((s.lambda - s.w_tilde_m).cwiseAbs().maxCoeff(), 1e-15);
  const auto cert = analysis::solve_discrete_lyapunov(s.w_tilde_m);
  const auto rep = analysis::verify_mean_contraction(s.lambda, cert);
  EXPECT_EQ(rep.identity_path_holds, rep.identity_margin <= 0.0);
  if (!rep.identity_path_holds) {
    ASSERT_TRUE(rep.solved.has_value());
    EXPECT_NEAR(rep.solved->lambda_max, cert.lambda_max, 1e-9 * cert.lambda_max);
  }
}

TEST(MeanContraction, SmallBufferedSystemRecordsMargin) {
  const auto s = make_system(3, 2);
  const auto cert = analysis::solve_discrete_lyapunov(s.w_tilde_m);
  const auto rep = analysis::verify_mean_contraction(s.lambda, cert);
  MatrixXd g = s.lambda.transpose() * s.lambda;
  g.diagonal().array() += 1.0 / cert.lambda_max - 1.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(g);
  EXPECT_NEAR(rep.identity_margin, es.eigenvalues().maxCoeff(), 1e-12);
  EXPECT_EQ(rep.identity_path_holds, rep.identity_margin <= 0.0);
  EXPECT_TRUE(rep.lambda_singular);
  if (!rep.identity_path_holds) {
    ASSERT_TRUE(rep.solved.has_value());
    EXPECT_NEAR(rep.k_const, rep.solved->lambda_max / rep.solved->lambda_min, 1e-12);
  }
}

TEST(TailConstants, ContractiveMatrix) {
  const auto tc = analysis::tail_constants(Eigen::Vector2d(0.9, 0.5).asDiagonal().toDenseMatrix());
  EXPECT_EQ(tc.k0, 1);
  EXPECT_EQ(tc.c0, 1.0);
  EXPECT_NEAR(tc.c1, 0.6561, 1e-14);
  EXPECT_NEAR(tc.second_moment_rate, 0.6561, 1e-14);
}

TEST(TailConstants, SmallSystemByBruteForce) {
  const auto s = make_system(3, 2);
  const auto tc = analysis::tail_constants(s.w_tilde_m);
  const auto norms = analysis::power_norms(s.w_tilde_m, 10);
  int k0 = 0;
  while (std::pow(norms[static_cast<std::size_t>(k0)], 4) >= 1.0 - analysis::kTailThreshold) ++k0;
  double c0 = 1.0;
  for (int k = 0; k < k0; ++k) c0 = std::max(c0, std::pow(norms[static_cast<std::size_t>(k)], 4));
  EXPECT_EQ(tc.k0, k0);
  EXPECT_EQ(tc.k0, 3);
  EXPECT_NEAR(tc.c0, c0, 1e-12);
  EXPECT_NEAR(tc.c1, std::pow(norms[3], 4), 1e-12);
  EXPECT_GT(tc.second_moment_rate, 0.0);
  EXPECT_LT(tc.second_moment_rate, 1.0);
}

TEST(TailConstants, LongHorizonAgreesWithDirectPowers) {
  // ||W^k|| stays above one for a while: a non-normal 2x2 block
  MatrixXd w(2, 2);
  w << 0.97, 3.0, 0.0, 0.97;
  const auto tc = analysis::tail_constants(w);
  const auto norms = analysis::power_norms(w, tc.k0);
  EXPECT_LT(std::pow(norms.back(), 4), 1.0);
  EXPECT_GE(std::pow(norms[norms.size() - 2], 4), 1.0 - analysis::kTailThreshold);
  double c0 = 1.0;
  for (std::size_t k = 0; k + 1 < norms.size(); ++k) c0 = std::max(c0, std::pow(norms[k], 4));
  EXPECT_NEAR(tc.c0, c0, 1e-9 * c0);
  EXPECT_NEAR(tc.c1, std::pow(norms.back(), 4), 1e-9);
}

TEST(TailConstants, HorizonExhausted) {
  MatrixXd w(2, 2);
  w << 0.999, 5.0, 0.0, 0.999;
  try {
    analysis::tail_constants(w, 50);
    FAIL() << "expected TailHorizonExhausted";
  } catch (const analysis::TailHorizonExhausted& e) {
    EXPECT_EQ(e.horizon(), 50);
    EXPECT_GT(e.smallest_norm(), 1.0);
  }
}

TEST(SecondMoment, SmallSystemChainIsStrict) {
  const auto s = make_system(3, 2);
  const auto rep = analysis::second_moment_bound_check(s.w_tilde_m);
  ASSERT_TRUE(rep.lifted_lambda_max.has_value());
  EXPECT_TRUE(rep.lower_strict);
  EXPECT_TRUE(rep.upper_strict);
  EXPECT_LT(*rep.lifted_lambda_max, rep.truncated_sum);
  EXPECT_LT(rep.truncated_sum, rep.proposition_bound);
}

TEST(SecondMoment, ScalarCaseIsTight) {
  MatrixXd w(1, 1);
  w << 0.7;
  const auto rep = analysis::second_moment_bound_check(w);
  const double exact = 1.0 / (1.0 - std::pow(0.7, 4));
  EXPECT_NEAR(*rep.lifted_lambda_max, exact, 1e-12);
  EXPECT_NEAR(rep.truncated_sum, exact, 1e-12);
  EXPECT_NEAR(rep.proposition_bound, exact, 1e-12);
}

TEST(SecondMoment, RandomSmallMatricesSatisfyChain) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 100; ++t) {
    const MatrixXd w = random_stable(4, 0.7, rng);
    const auto rep = analysis::second_moment_bound_check(w);
    ASSERT_TRUE(rep.lifted_lambda_max.has_value());
    EXPECT_LE(*rep.lifted_lambda_max, rep.truncated_sum * (1 + 1e-12));
    EXPECT_TRUE(rep.upper_holds);
  }
}

TEST(SecondMoment, GuardSkipsLiftedSolve) {
  const auto s = make_system(20, 3);
  const auto rep = analysis::second_moment_bound_check(s.w_tilde_m, 5);
  EXPECT_FALSE(rep.lifted_lambda_max.has_value());
}

TEST(ProbabilityBound, ShapeAndMonotonicity) {
  const auto s = make_system(3, 2);
  const auto tc = analysis::tail_constants(s.w_tilde_m);
  const auto d = s.aspec.dim();
  const auto huge = analysis::error_probability_bound(tc, s.e0, 1e12, 5, d);
  EXPECT_LT(huge.values[0], 1e-9);
  const auto a = analysis::error_probability_bound(tc, s.e0, 0.01, 200, d);
  const auto b = analysis::error_probability_bound(tc, s.e0, 0.1, 200, d);
  for (std::size_t k = 0; k < a.values.size(); ++k) {
    EXPECT_GE(a.values[k], 0.0);
    EXPECT_LE(a.values[k], 1.0);
    EXPECT_GE(a.values[k], b.values[k]);
    if (k > 0) {
      EXPECT_LE(a.values[k], a.values[k - 1]);
    }
  }
  const double beta0 = std::sqrt(static_cast<double>(d)) * tc.lifted_k_const / 0.01 *
                       s.e0.squaredNorm();
  EXPECT_NEAR(a.beta[0], beta0, 1e-12 * beta0);
  EXPECT_NEAR(a.beta[10], beta0 * std::pow(tc.second_moment_rate, 5), 1e-10 * beta0);
  EXPECT_THROW(analysis::error_probability_bound(tc, s.e0, 0.0, 5, d), std::invalid_argument);
}

TEST(KronIdentity, KnownAndSmallSystem) {
  const auto id = analysis::kron_norm_identity_check(Eigen::Vector2d(0.5, 0.25).asDiagonal().toDenseMatrix(), 0);
  EXPECT_NEAR(id.lifted, 1.0, 1e-15);
  EXPECT_NEAR(id.squared, 1.0, 1e-15);
  const auto two = analysis::kron_norm_identity_check(Eigen::Vector2d(0.5, 0.25).asDiagonal().toDenseMatrix(), 2);
  EXPECT_NEAR(two.squared, 0.0625, 1e-15);
  EXPECT_NEAR(two.lifted, 0.0625, 1e-15);

  const auto s = make_system(3, 2);
  const auto w1 = modes::deflate(modes::enumerate_modes(s.aspec).front().w, s.proj);
  for (int k : {1, 2, 5}) {
    EXPECT_LT(analysis::kron_norm_identity_check(w1, k).abs_diff, 1e-12);
    EXPECT_LT(analysis::kron_norm_identity_check(s.w_tilde_m, k).abs_diff, 1e-12);
  }
  EXPECT_THROW(analysis::kron_norm_identity_check(MatrixXd::Zero(60, 60), 1), analysis::DimensionGuard);
}
