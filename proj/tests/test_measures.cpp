#include <gtest/gtest.h>

#include <random>

#include "ramiflow/errors.hpp"
#include "ramiflow/measures.hpp"
#include "testing.hpp"

using namespace ramiflow;
using ramiflow::testing::P;

TEST(ValidateMeasure, MergesCoincidentAtoms) {
  const auto m = validate_measure(2, {{P(0, 0), 0.5}, {P(0, 0), 0.5}});
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m.atoms()[0].position, P(0, 0));
  EXPECT_DOUBLE_EQ(m.atoms()[0].mass, 1.0);
}

TEST(ValidateMeasure, MergesWithinSnapTolerance) {
  const auto m = validate_measure(2, {{P(1, 1), 0.25}, {P(1 + 1e-11, 1), 0.75}});
  ASSERT_EQ(m.size(), 1u);
  EXPECT_DOUBLE_EQ(m.total_mass(), 1.0);
}

TEST(ValidateMeasure, IdentityOnCanonicalInput) {
  const auto m = validate_measure(2, {{P(1, 0), 1.0}});
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m.atoms()[0].position, P(1, 0));
  EXPECT_EQ(m.atoms()[0].mass, 1.0);
}

TEST(ValidateMeasure, DropsZeroMass) {
  const auto m = validate_measure(2, {{P(1, 0), 1.0}, {P(2, 0), 0.0}});
  EXPECT_EQ(m.size(), 1u);
}

TEST(ValidateMeasure, RejectsBadInput) {
  EXPECT_ERROR_CODE(validate_measure(2, {{P(0, 0), -0.1}}), ErrorCode::InvalidMeasure);
  EXPECT_ERROR_CODE(validate_measure(2, {{P(0, NAN), 1.0}}), ErrorCode::InvalidMeasure);
  EXPECT_ERROR_CODE(validate_measure(3, {{P(0, 0), 1.0}}), ErrorCode::InvalidMeasure);
}

TEST(ValidateMeasure, Idempotent) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 20; ++i) {
    const auto m = ramiflow::testing::random_measure(rng, 6);
    EXPECT_EQ(validate_measure(2, m.atoms()), m);
  }
}

TEST(Rescale, MassAndCostSubstitution) {
  const DiscreteMeasure m(2, {{P(0, 0), 2.0}});
  const auto r = rescale(m, m, TransportCost::branched(0.5), 1.0);
  ASSERT_EQ(r.plus.size(), 1u);
  EXPECT_DOUBLE_EQ(r.plus.atoms()[0].mass, 1.0);
  EXPECT_DOUBLE_EQ(r.mass, 2.0);
  EXPECT_DOUBLE_EQ(r.scale, 1.0);
  for (double w : {0.1, 0.3, 0.7, 1.0}) EXPECT_NEAR(r.cost(w), std::sqrt(2 * w), 1e-15);
}

TEST(Rescale, IdentityOnProbabilityMeasures) {
  const DiscreteMeasure a(2, {{P(1, 0), 0.5}, {P(-1, 0.5), 0.5}});
  const DiscreteMeasure b(2, {{P(0, 1), 1.0}});
  const auto r = rescale(a, b, TransportCost::wasserstein(), 1.0);
  EXPECT_EQ(r.plus, a);
  EXPECT_EQ(r.minus, b);
  EXPECT_EQ(r.mass, 1.0);
  EXPECT_EQ(r.cost_factor(), 1.0);
}

TEST(Rescale, CostFactorRecoversOriginalCost) {
  // Single edge from (0,0) to (4,0) carrying mass 3 under sqrt.
  const DiscreteMeasure a(2, {{P(0, 0), 3.0}});
  const DiscreteMeasure b(2, {{P(4, 0), 3.0}});
  const auto tau = TransportCost::branched(0.5);
  const auto r = rescale(a, b, tau);
  EXPECT_DOUBLE_EQ(r.scale, 4.0);
  const double original = tau(3.0) * 4.0;
  const double normalized = r.cost(1.0) * distance(r.plus.atoms()[0].position, r.minus.atoms()[0].position);
  EXPECT_NEAR(r.cost_factor() * normalized, original, 1e-12);
}

TEST(Rescale, MassImbalance) {
  const DiscreteMeasure a(2, {{P(0, 0), 1.0}});
  const DiscreteMeasure b(2, {{P(1, 0), 1.1}});
  EXPECT_ERROR_CODE(rescale(a, b, TransportCost::wasserstein()), ErrorCode::MassImbalance);
}

TEST(Rescale, ExplicitScaleMustContainSupport) {
  const DiscreteMeasure a(2, {{P(3, 0), 1.0}});
  EXPECT_ERROR_CODE(rescale(a, a, TransportCost::wasserstein(), 1.0), ErrorCode::OutOfDomain);
}

TEST(ProjectKLevel, UniformSquareLevelOne) {
  std::vector<Atom> atoms;
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j) atoms.push_back({P(-1 + (i + 0.5) / 8, -1 + (j + 0.5) / 8), 1.0 / 256});
  const auto p = project_klevel(DiscreteMeasure(2, atoms), 1);
  ASSERT_EQ(p.size(), 4u);
  for (const Atom& a : p.atoms()) {
    EXPECT_DOUBLE_EQ(std::abs(a.position[0]), 1.0);
    EXPECT_DOUBLE_EQ(std::abs(a.position[1]), 1.0);
    EXPECT_NEAR(a.mass, 0.25, 1e-15);
  }
}

TEST(ProjectKLevel, CellMembership) {
  const auto p = project_klevel(DiscreteMeasure::dirac(P(0.5, 0.5)), 1);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p.atoms()[0].position, P(1, 1));
}

TEST(ProjectKLevel, HalfOpenCellsUpperClosed) {
  // 0 lies on the boundary between (-2,0] and (0,2]; it belongs to the lower cell.
  const auto p = project_klevel(DiscreteMeasure::dirac(P(0, 2)), 1);
  EXPECT_EQ(p.atoms()[0].position, P(-1, 1));
  EXPECT_ERROR_CODE(project_klevel(DiscreteMeasure::dirac(P(-2, 0)), 1), ErrorCode::OutOfDomain);
}

TEST(ProjectKLevel, OutOfDomain) {
  EXPECT_ERROR_CODE(project_klevel(DiscreteMeasure::dirac(P(3, 0)), 1), ErrorCode::OutOfDomain);
}

TEST(ProjectKLevel, MassPreservedAndW1Bound) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = ramiflow::testing::random_measure(rng, 12);
    for (int k = 1; k <= 5; ++k) {
      const auto p = project_klevel(m, k);
      EXPECT_NEAR(p.total_mass(), m.total_mass(), 1e-15);
      EXPECT_LE(wasserstein1(m, p), m.total_mass() * std::exp2(1 - k) * std::sqrt(2.0) + 1e-12);
    }
  }
}

TEST(Wasserstein1, DiracToDirac) {
  EXPECT_NEAR(wasserstein1(DiscreteMeasure::dirac(P(0, 0)), DiscreteMeasure::dirac(P(3, 4))), 5.0, 1e-15);
}

TEST(Wasserstein1, SplitSource) {
  const DiscreteMeasure a(2, {{P(0, 0), 0.5}, {P(2, 0), 0.5}});
  const DiscreteMeasure b(2, {{P(1, 0), 1.0}});
  EXPECT_NEAR(wasserstein1(a, b), 1.0, 1e-15);
}

TEST(Wasserstein1, MassImbalance) {
  EXPECT_ERROR_CODE(wasserstein1(DiscreteMeasure::dirac(P(0, 0)), DiscreteMeasure::dirac(P(0, 0), 2.0)),
                    ErrorCode::MassImbalance);
}

TEST(Wasserstein1, MatchesVertexEnumeration) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t na = 1 + trial % 4;
    const std::size_t nb = 1 + (trial / 4) % 4;
    const auto a = ramiflow::testing::random_measure(rng, na);
    const auto b = ramiflow::testing::random_measure(rng, nb);
    EXPECT_NEAR(wasserstein1(a, b), ramiflow::testing::w1_by_vertex_enumeration(a, b), 1e-12)
        << "trial " << trial;
  }
}

TEST(Wasserstein1, PlanIsFeasible) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = ramiflow::testing::random_measure(rng, 7);
    const auto b = ramiflow::testing::random_measure(rng, 9);
    const auto plan = optimal_transport_plan(a, b);
    std::vector<double> out(a.size(), 0.0), in(b.size(), 0.0);
    for (const auto& e : plan.entries) {
      EXPECT_GT(e.mass, 0.0);
      out[e.from] += e.mass;
      in[e.to] += e.mass;
    }
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(out[i], a.atoms()[i].mass, 1e-12);
    for (std::size_t j = 0; j < b.size(); ++j) EXPECT_NEAR(in[j], b.atoms()[j].mass, 1e-12);
  }
}

TEST(Wasserstein1, MetricProperties) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const auto a = ramiflow::testing::random_measure(rng, 5);
    const auto b = ramiflow::testing::random_measure(rng, 4);
    const auto c = ramiflow::testing::random_measure(rng, 6);
    EXPECT_NEAR(wasserstein1(a, b), wasserstein1(b, a), 1e-13);
    EXPECT_LE(wasserstein1(a, c), wasserstein1(a, b) + wasserstein1(b, c) + 1e-9);
    EXPECT_NEAR(wasserstein1(a, a), 0.0, 1e-15);
    EXPECT_GT(wasserstein1(a, b), 0.0);
  }
}

TEST(DyadicGrid, CellsNestAcrossLevels) {
  const DyadicGrid grid;
  std::mt19937_64 rng(2);
  for (int i = 0; i < 200; ++i) {
    const Point x = P(ramiflow::testing::uniform(rng, -2, 2), ramiflow::testing::uniform(rng, -2, 2));
    for (int k = 1; k < 10; ++k) {
      const auto c = grid.cell(x, k);
      const auto f = grid.cell(x, k + 1);
      for (std::size_t d = 0; d < 2; ++d) EXPECT_EQ(f[d] / 2, c[d]);
      EXPECT_LE((grid.leaf(x, k) - x).max_abs(), std::exp2(1 - k) + 1e-15);
    }
  }
}
