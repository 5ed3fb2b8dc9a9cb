#include <gtest/gtest.h>

#include <random>

#include "ramiflow/errors.hpp"
#include "ramiflow/patterns.hpp"
#include "testing.hpp"

using namespace ramiflow;
using ramiflow::testing::P;

namespace {

std::vector<TransportCost> builtin_costs() {
  return {TransportCost::wasserstein(), TransportCost::branched(0.5), TransportCost::branched(0.75),
          TransportCost::urban(2.0, 0.1), TransportCost::discrete(), TransportCost::step(0.3)};
}

// Unit-height step of width 0.45.
TransportCost lsc_cost() { return TransportCost::step(0.45, 1.0); }

IrrigationPlan looping_plan() {
  return IrrigationPlan(2, {{{P(0, 0), P(1, 0), P(0, 0), P(1, 0)}, 0.45}, {{P(0, 0), P(1, 0)}, 0.55}});
}

IrrigationPlan separated_plan(double k) {
  const double h = 1.0 / (3 * k);
  return IrrigationPlan(2, {{{P(0, 0), P(1, h), P(0, -h), P(1, 0)}, 0.45}, {{P(0, 0), P(1, 0)}, 0.55}});
}

}  // namespace

TEST(Plan, Validation) {
  EXPECT_ERROR_CODE(IrrigationPlan(2, {{{P(0, 0), P(1, 0)}, 0.0}}), ErrorCode::InvalidPlan);
  EXPECT_ERROR_CODE(IrrigationPlan(2, {{{}, 1.0}}), ErrorCode::InvalidPlan);
  EXPECT_ERROR_CODE(IrrigationPlan(2, {{{P(0, 0), P(0, 0)}, 1.0}}), ErrorCode::InvalidPlan);
  EXPECT_NO_THROW(IrrigationPlan(2, {{{P(0, 0)}, 1.0}}));
}

TEST(Decompose, SingleEdge) {
  const TransportGraph g({P(0, 0), P(1, 0)}, {{0, 1, 1.0}}, DiscreteMeasure::dirac(P(0, 0)),
                         DiscreteMeasure::dirac(P(1, 0)));
  const auto plan = decompose_paths(g);
  ASSERT_EQ(plan.paths().size(), 1u);
  EXPECT_EQ(plan.paths()[0].weight, 1.0);
  EXPECT_EQ(plan.paths()[0].points.size(), 2u);
}

TEST(Decompose, YGraph) {
  const auto A = P(0, 0), B = P(1, 0), C = P(2, 1), D = P(2, -1);
  const TransportGraph g({A, B, C, D}, {{0, 1, 1.0}, {1, 2, 0.6}, {1, 3, 0.4}}, DiscreteMeasure::dirac(A),
                         DiscreteMeasure(2, {{C, 0.6}, {D, 0.4}}));
  const auto plan = decompose_paths(g);
  ASSERT_EQ(plan.paths().size(), 2u);
  EXPECT_NEAR(plan.paths()[0].weight, 0.6, 1e-15);
  EXPECT_EQ(plan.paths()[0].points, (std::vector<Point>{A, B, C}));
  EXPECT_NEAR(plan.paths()[1].weight, 0.4, 1e-15);
  EXPECT_EQ(plan.paths()[1].points, (std::vector<Point>{A, B, D}));
}

TEST(Decompose, Diamond) {
  const auto A = P(0, 0), B = P(1, 1), C = P(1, -1), D = P(2, 0);
  const TransportGraph g({A, B, C, D}, {{0, 1, 0.5}, {1, 3, 0.5}, {0, 2, 0.5}, {2, 3, 0.5}},
                         DiscreteMeasure::dirac(A), DiscreteMeasure::dirac(D));
  const auto plan = decompose_paths(g);
  ASSERT_EQ(plan.paths().size(), 2u);
  for (const auto& p : plan.paths()) {
    EXPECT_EQ(p.weight, 0.5);
    EXPECT_EQ(p.points.size(), 3u);
  }
  EXPECT_TRUE(check_loop_free(plan));
}

TEST(Decompose, Errors) {
  const TransportGraph tri({P(0, 0), P(1, 0), P(0, 1)}, {{0, 1, 0.3}, {1, 2, 0.3}, {2, 0, 0.3}}, {}, {});
  EXPECT_ERROR_CODE(decompose_paths(tri), ErrorCode::CyclicGraph);
  const TransportGraph bad({P(0, 0), P(1, 0)}, {{0, 1, 0.9}}, DiscreteMeasure::dirac(P(0, 0)),
                           DiscreteMeasure::dirac(P(1, 0)));
  EXPECT_ERROR_CODE(decompose_paths(bad), ErrorCode::ConservationViolation);
}

TEST(Decompose, StationaryMass) {
  // Half the mass stays put at the source.
  const DiscreteMeasure src(2, {{P(0, 0), 1.0}});
  const DiscreteMeasure dst(2, {{P(0, 0), 0.5}, {P(1, 0), 0.5}});
  const TransportGraph g({P(0, 0), P(1, 0)}, {{0, 1, 0.5}}, src, dst);
  const auto plan = decompose_paths(g);
  EXPECT_EQ(plan.irrigating(), src);
  EXPECT_EQ(plan.irrigated(), dst);
}

TEST(Decompose, RandomSolvesWeightSystem) {
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 50; ++trial) {
    // Parallel edges merged so that a vertex pair identifies its edge.
    const auto g = merge_parallel_edges(remove_cycles(ramiflow::testing::random_graph(rng, 8, 16)));
    const auto plan = decompose_paths(g);
    EXPECT_LE(plan.paths().size(), g.edges().size() + g.source().size() + g.sink().size());
    // w(e) = sum of weights of paths through e.
    std::vector<double> through(g.edges().size(), 0.0);
    for (const auto& p : plan.paths())
      for (std::size_t i = 1; i < p.points.size(); ++i) {
        const auto u = *g.find_vertex(p.points[i - 1]);
        const auto v = *g.find_vertex(p.points[i]);
        std::size_t hit = g.edges().size();
        for (std::size_t e = 0; e < g.edges().size(); ++e)
          if (g.edges()[e].tail == u && g.edges()[e].head == v) hit = e;
        ASSERT_LT(hit, g.edges().size());
        through[hit] += p.weight;
      }
    for (std::size_t e = 0; e < g.edges().size(); ++e) EXPECT_NEAR(through[e], g.edges()[e].weight, 1e-12);
    EXPECT_LE(max_abs_difference(SignedDiscreteMeasure::difference(plan.irrigating(), g.source()), {}), 1e-12);
    EXPECT_LE(max_abs_difference(SignedDiscreteMeasure::difference(plan.irrigated(), g.sink()), {}), 1e-12);
  }
}

TEST(PatternCost, SinglePath) {
  const IrrigationPlan plan(2, {{{P(0, 0), P(3, 4)}, 1.0}});
  EXPECT_NEAR(pattern_cost(plan, TransportCost::branched(0.5)).value(), 5.0, 1e-15);
}

TEST(PatternCost, LoopingPlan) {
  const auto tau = lsc_cost();
  EXPECT_EQ(tau(1.0), 3.0);
  EXPECT_NEAR(pattern_cost(looping_plan(), tau).value(), 5.7, 1e-12);
  EXPECT_FALSE(check_loop_free(looping_plan()));
}

TEST(PatternCost, SeparatedPlanApproachesFive) {
  const auto tau = lsc_cost();
  EXPECT_NEAR(pattern_cost(separated_plan(1e6), tau).value(), 5.0, 1e-12);
  EXPECT_TRUE(check_loop_free(separated_plan(1e6)));
  // The excess over 5 is the extra length of the three zigzag legs.
  const double h = 1.0 / 30;
  const double legs = 2 * std::sqrt(1 + h * h) + std::sqrt(1 + 4 * h * h);
  EXPECT_NEAR(pattern_cost(separated_plan(10), tau).value(), legs + 2.0, 1e-12);
}

TEST(PatternCost, AverageLengthLowerBound) {
  std::mt19937_64 rng(72);
  for (int trial = 0; trial < 30; ++trial) {
    const auto g = remove_cycles(ramiflow::testing::random_graph(rng, 7, 12));
    const auto plan = decompose_paths(g);
    double wl = 0.0;
    for (const auto& p : plan.paths()) wl += p.weight * p.length();
    for (const auto& tau : builtin_costs())
      EXPECT_GE(pattern_cost(plan, tau).value(), lambda_tau(tau, plan.total_weight()) * wl - 1e-12)
          << tau.describe();
  }
}

TEST(FluxOfPlan, LoopingPlanNetFlux) {
  const auto f = flux_of_plan(looping_plan());
  ASSERT_EQ(f.segments.size(), 1u);
  EXPECT_NEAR(f.segments[0].theta.norm(), 1.0, 1e-15);
  EXPECT_NEAR(gilbert_energy(f, lsc_cost()).value(), 3.0, 1e-15);
}

TEST(FluxOfPlan, StationaryPathHasNoFlux) {
  EXPECT_TRUE(flux_of_plan(IrrigationPlan(2, {{{P(0.3, 0.2)}, 1.0}})).segments.empty());
}

TEST(FluxOfPlan, DensityBoundsNetFlux) {
  std::mt19937_64 rng(73);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<PlanPath> paths;
    for (int p = 0; p < 4; ++p) {
      PlanPath path;
      path.weight = ramiflow::testing::uniform(rng, 0.1, 1);
      // Points on a coarse lattice so that paths overlap and backtrack.
      for (int i = 0; i < 4; ++i)
        path.points.push_back(P(std::floor(ramiflow::testing::uniform(rng, 0, 3)), std::floor(ramiflow::testing::uniform(rng, 0, 3))));
      path.points.erase(std::unique(path.points.begin(), path.points.end()), path.points.end());
      paths.push_back(path);
    }
    const IrrigationPlan plan(2, paths);
    for (const auto& s : flux_density(plan).segments) EXPECT_LE(s.theta.norm(), s.multiplicity + 1e-12);
    for (const auto& tau : builtin_costs())
      EXPECT_LE(gilbert_energy(flux_of_plan(plan), tau).value(), pattern_cost(plan, tau).value() + 1e-12);
  }
}

TEST(ModelEquivalence, DisjointInteriors) {
  std::mt19937_64 rng(74);
  for (int trial = 0; trial < 50; ++trial) {
    const auto g = ramiflow::testing::random_planar_dag(rng, 9, 12);
    const auto plan = decompose_paths(g);
    EXPECT_TRUE(check_loop_free(plan));
    for (const auto& tau : builtin_costs()) {
      const double gc = graph_cost(g, tau).total;
      EXPECT_NEAR(pattern_cost(plan, tau).value(), gc, 1e-9) << tau.describe();
      EXPECT_NEAR(gilbert_energy(flux_of_plan(plan), tau).value(), gc, 1e-9) << tau.describe();
    }
  }
}

TEST(LoopFree, Examples) {
  EXPECT_TRUE(check_loop_free(IrrigationPlan(2, {{{P(0, 0), P(1, 0)}, 1.0}})));
  EXPECT_FALSE(check_loop_free(IrrigationPlan(2, {{{P(0, 0), P(1, 0), P(1, 1), P(0.5, -1)}, 1.0}})));
  EXPECT_TRUE(check_loop_free(IrrigationPlan(2, {{{P(0, 0), P(1, 0), P(1, 1), P(2, 1)}, 1.0}})));
}
