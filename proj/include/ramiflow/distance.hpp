#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ramiflow/costs.hpp"
#include "ramiflow/graph.hpp"
#include "ramiflow/measures.hpp"
#include "ramiflow/optimizer.hpp"

namespace ramiflow {

struct DistanceBudget {
  int max_level = 6;               // deepest n-adic witness tried
  bool use_optimizer = true;
  std::size_t optimizer_max_atoms = 12;  // skip the optimizer above this size
  OptimizerConfig optimizer;
};

/// Certified two-sided bounds on the cost distance. The lower bound is
/// lambda^tau(m) W1 with m the common mass; the upper bound is the cost of a
/// concrete witness graph.
struct DistanceBounds {
  double lower = 0.0;
  double lambda = 0.0;  // lambda^tau(m)
  double w1 = 0.0;
  double upper = 0.0;
  TransportGraph witness;
  std::string witness_kind;  // "plan", "origin-star", "nadic-k", "optimizer", "empty"

  double gap() const { return upper - lower; }
};

/// Bounds for (plus, minus). Symmetric: swapping the arguments gives the same
/// numbers and the reversed witness. Throws MassImbalance.
DistanceBounds dtau_bounds(const DiscreteMeasure& plus, const DiscreteMeasure& minus, const TransportCost& tau,
                           const DistanceBudget& budget = {});

struct RefinementStep {
  int level = 0;
  double upper = 0.0;      // upper bound on the distance from P^k(mu) to mu
  double reference = 0.0;  // 4 sqrt(n) s sum_{j>k} S^beta(n,j)
  bool holds = false;
};

struct MetricProbeReport {
  std::size_t symmetry_checks = 0;
  std::size_t symmetry_failures = 0;
  std::size_t triangle_checks = 0;
  std::size_t triangle_failures = 0;  // upper(a,c) > (1 + slack)(upper(a,b) + upper(b,c))
  std::size_t validity_failures = 0;  // upper(a,b) + upper(b,c) < lower(a,c)
  double worst_triangle_ratio = 0.0;  // max upper(a,c) / (upper(a,b) + upper(b,c))
  std::vector<std::vector<RefinementStep>> refinement;  // per sample
  std::size_t refinement_failures = 0;

  bool passed() const {
    return symmetry_failures == 0 && triangle_failures == 0 && validity_failures == 0 && refinement_failures == 0;
  }
};

inline constexpr double kTriangleSlack = 0.05;

/// Empirical metric checks over a sample of probability measures: symmetry,
/// triangle inequality of upper bounds (relative slack), and decay of the
/// upper bound between P^k(mu) and mu for k = 1..refine_levels. Refinement
/// needs supports in [-1,1]^n and a known concave majorant of tau; it is
/// skipped otherwise.
MetricProbeReport metric_probe(const std::vector<DiscreteMeasure>& samples, const TransportCost& tau,
                               const DistanceBudget& budget = {}, int refine_levels = 4);

}  // namespace ramiflow
