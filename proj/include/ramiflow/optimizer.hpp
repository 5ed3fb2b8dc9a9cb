#pragma once

#include <cstddef>
#include <cstdint>

#include "ramiflow/costs.hpp"
#include "ramiflow/graph.hpp"
#include "ramiflow/measures.hpp"

namespace ramiflow {

/// One straight edge per entry of an optimal W1 plan.
TransportGraph optimal_plan_graph(const DiscreteMeasure& plus, const DiscreteMeasure& minus);

struct OptimizerConfig {
  int restarts = 6;
  int max_rounds = 60;          // local-search rounds per restart
  int descent_sweeps = 3000;    // Gauss-Seidel Weiszfeld sweeps per descent
  double step_tolerance = 1e-13;  // relative to the terminal diameter
  double merge_radius = 1e-7;     // relative to the terminal diameter
  bool steiner_moves = true;
  bool merge_moves = true;
  bool reroute_moves = true;
  bool loop_moves = true;
  bool position_descent = true;
  std::uint64_t seed = 0;
  // Worker threads for restarts; 0 means hardware concurrency. The
  // environment variable RAMIFLOW_THREADS caps either value.
  unsigned threads = 0;

  // Throws InvalidArgument for nonpositive caps or tolerances.
  void validate() const;
};

/// Local search for a cheap transport graph from plus to minus. Restart r
/// starts from one of the baseline graphs (optimal-plan edges, star through
/// the source barycentre, star through the grid centre, level-1 n-adic
/// witness), perturbed with mt19937_64(seed + r) once the baselines are used
/// up. The result is acyclic, tree-reduced for concave tau, and never costlier
/// than any baseline. Throws MassImbalance.
TransportGraph optimize(const DiscreteMeasure& plus, const DiscreteMeasure& minus, const TransportCost& tau,
                        const OptimizerConfig& config = {});

struct OracleResult {
  TransportGraph graph;
  double cost = 0.0;
  std::size_t topologies = 0;  // topologies whose geometry was optimized
};

/// Exhaustive search over trees (Pruefer sequences) on the terminals plus up
/// to max_steiner free vertices of degree >= 3, and for non-concave tau over
/// the graphs with one extra edge. Free positions by multistart gradient
/// descent with central differences; loop flows by exact search over the
/// breakpoints of the one-dimensional shift. Throws TooLarge for more than 5
/// atoms in total or max_steiner > 2.
OracleResult brute_force_oracle(const DiscreteMeasure& plus, const DiscreteMeasure& minus,
                                const TransportCost& tau, int max_steiner = 2);

}  // namespace ramiflow
