#include "asyncheat/grid.hpp"
#include "asyncheat/linalg.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace asyncheat;
using grid::GridSpec;

namespace {

Eigen::VectorXd random_vector(Eigen::Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

}  // namespace

TEST(GridSpec, ReferenceParametersGiveHalfRatio) {
  const GridSpec g(100, 1, 0.1, 0.01, 0.5);
  EXPECT_EQ(g.r(), 0.5);
  EXPECT_EQ(g.size(), 100);
}

TEST(GridSpec, RejectsInvalidParameters) {
  EXPECT_THROW(GridSpec(3, 1, 0.1, 0.03, 0.5), std::invalid_argument);  // r = 1.5
  EXPECT_THROW(GridSpec(2, 1, 0.1, 0.01, 0.5), std::invalid_argument);  // Nn = 2
  EXPECT_THROW(GridSpec(0, 3, 0.1, 0.01, 0.5), std::invalid_argument);
  EXPECT_THROW(GridSpec(3, 1, -0.1, 0.01, 0.5), std::invalid_argument);
  EXPECT_THROW(GridSpec::with_ratio(3, 1, 0.0), std::invalid_argument);
  EXPECT_NO_THROW(GridSpec::with_ratio(1, 3, 0.5));
}

TEST(GridSpec, OwnerOfPoint) {
  const auto g = GridSpec::with_ratio(3, 4, 0.25);
  EXPECT_EQ(g.pe_of(0), 0);
  EXPECT_EQ(g.pe_of(3), 0);
  EXPECT_EQ(g.pe_of(4), 1);
  EXPECT_EQ(g.pe_of(11), 2);
}

TEST(SyncMatrix, ThreePointHalfRatio) {
  const auto a = grid::build_sync_matrix(GridSpec::with_ratio(3, 1, 0.5));
  Eigen::Matrix3d expected;
  expected << 1, 0, 0, 0.5, 0, 0.5, 0, 0, 1;
  EXPECT_EQ(a, expected);
}

TEST(SyncMatrix, RowSumsAndInfNorm) {
  for (double r : {0.1, 0.25, 0.5}) {
    const auto a = grid::build_sync_matrix(GridSpec::with_ratio(4, 3, r));
    EXPECT_EQ(linalg::inf_norm(a), 1.0);
    const Eigen::VectorXd c = Eigen::VectorXd::Constant(a.rows(), 2.5);
    EXPECT_LT((a * c - c).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(SyncMatrix, MatchesStencilLoopOnRandomVectors) {
  std::mt19937_64 rng(11);
  for (const auto& g : {GridSpec::with_ratio(4, 1, 0.25), GridSpec::with_ratio(5, 3, 0.4),
                        GridSpec::with_ratio(100, 1, 0.5)}) {
    const auto a = grid::build_sync_matrix(g);
    for (int t = 0; t < 100; ++t) {
      const Eigen::VectorXd u = random_vector(g.size(), rng);
      const Eigen::VectorXd got = grid::sync_step(a, u);
      const auto want = oracle::heat_loop(std::vector<double>(u.data(), u.data() + u.size()),
                                          g.r(), 1);
      for (Eigen::Index i = 0; i < u.size(); ++i) {
        EXPECT_NEAR(got(i), want[static_cast<std::size_t>(i)],
                    1e-14 * std::max(1.0, std::abs(want[static_cast<std::size_t>(i)])));
      }
    }
  }
}

TEST(SyncStep, RejectsDimensionMismatch) {
  const auto a = grid::build_sync_matrix(GridSpec::with_ratio(4, 1, 0.25));
  EXPECT_THROW(grid::sync_step(a, Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST(SyncStep, PreservesBoundsAndBoundary) {
  std::mt19937_64 rng(3);
  const auto g = GridSpec::with_ratio(10, 2, 0.5);
  const auto a = grid::build_sync_matrix(g);
  Eigen::VectorXd u = random_vector(g.size(), rng);
  const double lo = u.minCoeff();
  const double hi = u.maxCoeff();
  for (int k = 0; k < 200; ++k) {
    const Eigen::VectorXd next = grid::sync_step(a, u);
    EXPECT_EQ(next(0), u(0));
    EXPECT_EQ(next(g.size() - 1), u(g.size() - 1));
    EXPECT_GE(next.minCoeff(), lo - 1e-15);
    EXPECT_LE(next.maxCoeff(), hi + 1e-15);
    u = next;
  }
}

TEST(InitialCondition, Cos2MatchesScalarFormula) {
  const auto g = GridSpec::with_ratio(100, 1, 0.5);
  const auto u = grid::cos2_initial_condition(g);
  ASSERT_EQ(u.size(), 100);
  // 1-based i; long double scalar evaluation as the reference
  for (int i : {1, 25, 50, 100}) {
    const long double c = std::cos(3.0L * std::numbers::pi_v<long double> * i / (2.0L * 99.0L));
    EXPECT_NEAR(u(i - 1), static_cast<double>(c * c), 1e-15) << "i = " << i;
  }
  EXPECT_NEAR(u(98), 0.0, 1e-15);  // i = 99: cos(3 pi / 2)
  EXPECT_NEAR(u(0), 0.9977359612865423, 1e-15);
}

TEST(SteadyState, ThreePointRamp) {
  const auto s = grid::steady_state_profile(GridSpec::with_ratio(3, 1, 0.5), {1.0, 0.0});
  EXPECT_EQ(s, Eigen::Vector3d(1.0, 0.5, 0.0));
}

TEST(SteadyState, EqualBoundaryValuesGiveConstant) {
  const auto s = grid::steady_state_profile(GridSpec::with_ratio(7, 2, 0.3), {2.5, 2.5});
  EXPECT_LT((s.array() - 2.5).abs().maxCoeff(), 1e-15);
}

TEST(SteadyState, FixedPointOfSyncStep) {
  for (const auto& g : {GridSpec::with_ratio(100, 1, 0.5), GridSpec::with_ratio(6, 4, 0.2)}) {
    const auto s = grid::steady_state_profile(g, {1.0, 0.0});
    const auto a = grid::build_sync_matrix(g);
    EXPECT_LT((grid::sync_step(a, s) - s).norm() / s.norm(), 1e-14);
  }
}

TEST(SyncStep, ReferenceConfigFlattensToRamp) {
  const GridSpec g(100, 1, 0.1, 0.01, 0.5);
  const grid::BoundaryConditions bc{1.0, 0.0};
  Eigen::VectorXd u = grid::with_boundary(grid::cos2_initial_condition(g), bc);
  const auto a = grid::build_sync_matrix(g);
  for (int k = 0; k < 10000; ++k) u = grid::sync_step(a, u);
  EXPECT_LT((u - grid::steady_state_profile(g, bc)).lpNorm<Eigen::Infinity>(), 1e-3);
}

TEST(WithBoundary, OverwritesEndpointsOnly) {
  const Eigen::Vector4d u(9, 2, 3, 9);
  EXPECT_EQ(grid::with_boundary(u, {1.0, 0.0}), Eigen::Vector4d(1, 2, 3, 0));
}
