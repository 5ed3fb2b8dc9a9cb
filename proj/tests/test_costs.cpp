#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ramiflow/costs.hpp"
#include "ramiflow/errors.hpp"
#include "testing.hpp"

using namespace ramiflow;

namespace {

std::vector<TransportCost> all_families() {
  return {TransportCost::wasserstein(1.5), TransportCost::branched(0.5), TransportCost::branched(0.75),
          TransportCost::urban(2.0, 0.1),  TransportCost::discrete(),      TransportCost::step(0.3),
          TransportCost::tabulated({{0.2, 0.5}, {0.5, 0.8}, {1.0, 1.0}})};
}

// 256 logarithmic points on (0, 2].
std::vector<double> log_grid() {
  std::vector<double> g;
  for (int i = 0; i < 256; ++i) g.push_back(2.0 * std::pow(1e-6, 1.0 - i / 255.0));
  return g;
}

}  // namespace

TEST(EvalTau, ClosedForms) {
  EXPECT_DOUBLE_EQ(TransportCost::branched(0.5)(0.25), 0.5);
  EXPECT_DOUBLE_EQ(TransportCost::urban(2.0, 0.1)(0.05), 0.1);
  EXPECT_DOUBLE_EQ(TransportCost::urban(2.0, 0.1)(0.5), 0.6);
  EXPECT_DOUBLE_EQ(TransportCost::wasserstein(3.0)(0.5), 1.5);
  EXPECT_DOUBLE_EQ(TransportCost::discrete()(0.01), 1.0);
  EXPECT_DOUBLE_EQ(TransportCost::step(0.3)(0.35), 0.6);
  EXPECT_DOUBLE_EQ(TransportCost::step(0.3)(0.6), 0.6);
  EXPECT_DOUBLE_EQ(TransportCost::step(0.45, 1.0)(0.55), 2.0);
}

TEST(EvalTau, ZeroAndNegative) {
  for (const auto& tau : all_families()) {
    EXPECT_EQ(tau(0.0), 0.0) << tau.describe();
    EXPECT_ERROR_CODE(tau(-1e-3), ErrorCode::DomainError);
  }
}

TEST(EvalTau, InvalidParameters) {
  EXPECT_ERROR_CODE(TransportCost::branched(1.0), ErrorCode::InvalidCost);
  EXPECT_ERROR_CODE(TransportCost::branched(0.0), ErrorCode::InvalidCost);
  EXPECT_ERROR_CODE(TransportCost::urban(1.0, 0.1), ErrorCode::InvalidCost);
  EXPECT_ERROR_CODE(TransportCost::step(0.0), ErrorCode::InvalidCost);
  EXPECT_ERROR_CODE(TransportCost::wasserstein(-1.0), ErrorCode::InvalidCost);
}

TEST(EvalTau, TabulatedIsConcaveEnvelope) {
  // (0.5, 0.35) lies below the hull of (0,0), (0.25, 0.3), (1, 1).
  const auto tau = TransportCost::tabulated({{0.25, 0.3}, {0.5, 0.35}, {1.0, 1.0}});
  EXPECT_NEAR(tau(0.25), 0.3, 1e-15);
  EXPECT_NEAR(tau(0.5), 0.3 + 0.25 * (0.7 / 0.75), 1e-15);
  EXPECT_ERROR_CODE(TransportCost::tabulated({{0.5, 0.3}, {1.0, 0.2}}), ErrorCode::InvalidCost);
  EXPECT_NEAR(tau(1.0), 1.0, 1e-15);
}

TEST(EvalTau, MonotoneAndSubadditive) {
  std::mt19937_64 rng(1);
  const auto grid = log_grid();
  for (const auto& tau : all_families()) {
    for (std::size_t i = 1; i < grid.size(); ++i) EXPECT_LE(tau(grid[i - 1]), tau(grid[i])) << tau.describe();
    for (int i = 0; i < 10000; ++i) {
      const double u = ramiflow::testing::uniform(rng, 0, 2);
      const double v = ramiflow::testing::uniform(rng, 0, 2);
      ASSERT_LE(tau(u + v), tau(u) + tau(v) + 1e-12) << tau.describe() << " u=" << u << " v=" << v;
    }
  }
}

TEST(LambdaTau, Examples) {
  EXPECT_DOUBLE_EQ(lambda_tau(TransportCost::wasserstein(1.0), 1.0), 1.0);
  EXPECT_DOUBLE_EQ(lambda_tau(TransportCost::branched(0.5), 1.0), 1.0);
  EXPECT_NEAR(lambda_tau(TransportCost::step(0.3), 1.0), 1.0, 1e-15);
}

TEST(LambdaTau, LinearLowerBound) {
  const auto grid = log_grid();
  for (const auto& tau : all_families())
    for (double m : {0.1, 0.5, 1.0, 1.7}) {
      const double lam = lambda_tau(tau, m);
      // Brute-force infimum over a fine grid of (m/2, m].
      double brute = INFINITY;
      for (int i = 1; i <= 20000; ++i) {
        const double w = m / 2 + m / 2 * i / 20000.0;
        brute = std::min(brute, tau(w) / w);
      }
      EXPECT_LE(lam, brute + 1e-12) << tau.describe();
      EXPECT_GE(lam, brute - 1e-3 * brute) << tau.describe();
      for (double w : grid)
        if (w <= m) EXPECT_GE(tau(w), lam * w - 1e-12) << tau.describe() << " w=" << w;
    }
}

TEST(MarginalCost, Examples) {
  EXPECT_EQ(marginal_cost(TransportCost::wasserstein(3.0), 0.0), ExtendedReal(3.0));
  EXPECT_TRUE(marginal_cost(TransportCost::branched(0.75), 0.0).is_infinite());
  EXPECT_EQ(marginal_cost(TransportCost::urban(2.0, 0.1), 0.0), ExtendedReal(2.0));
  EXPECT_TRUE(marginal_cost(TransportCost::discrete(), 0.0).is_infinite());
  EXPECT_DOUBLE_EQ(marginal_cost(TransportCost::branched(0.5), 0.25).value(), 2.0);
}

TEST(MarginalCost, NonincreasingForConcave) {
  const auto grid = log_grid();
  for (const auto& tau : all_families()) {
    if (!tau.is_concave()) continue;
    for (std::size_t i = 1; i < grid.size(); ++i)
      EXPECT_LE(marginal_cost(tau, grid[i]).value(), marginal_cost(tau, grid[i - 1]).value() + 1e-12)
          << tau.describe();
  }
}

TEST(Supergradient, BoundsChords) {
  // Concavity: tau(v) <= tau(w) + g(w) (v - w).
  const auto grid = log_grid();
  for (const auto& tau : all_families()) {
    if (!tau.is_concave()) continue;
    for (std::size_t i = 0; i < grid.size(); i += 7)
      for (std::size_t j = 0; j < grid.size(); j += 11) {
        const double w = grid[i], v = grid[j];
        EXPECT_LE(tau(v), tau(w) + tau.supergradient(w) * (v - w) + 1e-9) << tau.describe();
      }
  }
}

TEST(Admissibility, BranchedThreeQuarters) {
  const auto r = check_admissible(TransportCost::branched(0.75), 2);
  EXPECT_TRUE(r.admissible());
  EXPECT_TRUE(r.consistent);
  const double exact = 1.0 / (std::sqrt(2.0) - 1.0);
  ASSERT_TRUE(r.series_estimate.is_finite());
  EXPECT_NEAR(r.series_estimate.value(), exact, 1e-6);
  // Independent partial sums: S(2,k) = 2^{-k/2}.
  double s = 0.0;
  for (std::size_t k = 1; k <= r.partial_sums.size(); ++k) {
    s += std::exp2(-0.5 * static_cast<double>(k));
    EXPECT_NEAR(r.partial_sums[k - 1], s, 1e-12);
  }
}

TEST(Admissibility, BranchedHalfIsBoundary) {
  const auto r = check_admissible(TransportCost::branched(0.5), 2);
  EXPECT_EQ(r.verdict, Admissibility::NotAdmissible);
  EXPECT_TRUE(r.consistent);
  for (std::size_t k = 0; k < r.partial_sums.size(); ++k)
    EXPECT_NEAR(r.partial_sums[k], static_cast<double>(k + 1), 1e-9);
}

TEST(Admissibility, DiscreteNotAdmissible) {
  for (int n : {2, 3}) {
    const auto r = check_admissible(TransportCost::discrete(), n);
    EXPECT_EQ(r.verdict, Admissibility::NotAdmissible);
    EXPECT_TRUE(r.consistent);
  }
}

TEST(Admissibility, VerdictsAgreeAcrossFamilies) {
  for (const auto& tau : all_families())
    for (int n : {1, 2, 3}) {
      const auto r = check_admissible(tau, n);
      EXPECT_TRUE(r.consistent) << tau.describe() << " n=" << n;
    }
  // Step cost uses the affine majorant w/delta + delta-height.
  EXPECT_EQ(check_admissible(TransportCost::step(0.3), 2).verdict, Admissibility::NotAdmissible);
  EXPECT_EQ(check_admissible(TransportCost::wasserstein(), 2).verdict, Admissibility::Admissible);
  EXPECT_EQ(check_admissible(TransportCost::wasserstein(), 1).verdict, Admissibility::Admissible);
  EXPECT_EQ(check_admissible(TransportCost::branched(0.75), 4).verdict, Admissibility::NotAdmissible);
}

TEST(MassScale, ComposesWithEvaluation) {
  const auto tau = TransportCost::step(0.3).with_mass_scale(2.0);
  EXPECT_DOUBLE_EQ(tau(0.2), 0.6);  // 0.3 ceil(0.4/0.3)
  const auto nc = tau.nonconcave_points(0.0, 1.0);
  ASSERT_EQ(nc.size(), 6u);
  EXPECT_NEAR(nc[0], 0.15, 1e-15);
}
