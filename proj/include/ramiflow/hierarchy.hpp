#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ramiflow/costs.hpp"
#include "ramiflow/graph.hpp"
#include "ramiflow/measures.hpp"

namespace ramiflow {

/// k-level n-adic tree of a measure on the dyadic grid: level j joins every
/// level-(j-1) cell centre to the centres of its 2^n children, weighted by the
/// child cell mass. Transports mu((-2,2]^n) delta_centre to P^k(mu).
struct NadicGraph {
  TransportGraph graph;
  std::vector<int> edge_level;  // level of graph.edges()[i], in 1..levels
  int levels = 0;
  DyadicGrid grid;

  std::size_t dim() const { return graph.dim(); }
  // Edge length of level j: sqrt(n) 2^{1-j} s.
  double edge_length(int j) const;
  // Combinatorial number of level-j edges, 2^{nj}, including pruned ones.
  double edge_count(int j) const;
  // Level j alone (F^j), between P^{j-1} and P^j.
  TransportGraph level(int j) const;
  // Levels from..to stacked, between P^{from-1} and P^{to}.
  TransportGraph levels_between(int from, int to) const;
};

NadicGraph nadic_graph(const DiscreteMeasure& m, int k, const DyadicGrid& grid = {});

/// Cell masses of every level 1..k at once (level 0 is the whole box).
std::vector<std::vector<double>> nadic_level_masses(const DiscreteMeasure& m, int k,
                                                    const DyadicGrid& grid = {});

struct LevelCost {
  int level = 0;
  double actual = 0.0;  // graph cost of F^k
  double bound = 0.0;   // 2 sqrt(n) S^beta(n,k) s
  bool holds = false;
};

/// Cost of the k-th level of the n-adic tree of a probability measure against
/// its Jensen bound. Computed from cell masses; no graph is built.
LevelCost nadic_cost_bound(const DiscreteMeasure& m, int k, const TransportCost& tau,
                           const ConcaveMajorant& beta, const DyadicGrid& grid = {});
// All levels 1..k.
std::vector<LevelCost> nadic_cost_bounds(const DiscreteMeasure& m, int k, const TransportCost& tau,
                                         const ConcaveMajorant& beta, const DyadicGrid& grid = {});

/// The standard box (-2,2]^n when both supports lie in [-1,1]^n, otherwise
/// the box centred on the joint bounding box with scale equal to its largest
/// half-extent.
DyadicGrid enclosing_grid(const DiscreteMeasure& a, const DiscreteMeasure& b);

/// Reversed tree of plus unioned with the tree of minus: a graph from
/// P^k(plus) to P^k(minus) through the grid centre.
TransportGraph connect_nadic(const DiscreteMeasure& plus, const DiscreteMeasure& minus, int k,
                             const DyadicGrid& grid = {});

/// Full k-level witness from plus to minus: projection stars onto the leaf
/// grid on both sides joined by connect_nadic, with cancelling flow removed.
TransportGraph nadic_witness(const DiscreteMeasure& plus, const DiscreteMeasure& minus, int k,
                             const DyadicGrid& grid = {});

/// A bridge graph with its exact cost and two upper bounds: `bound` is a
/// per-edge estimate that always holds; `nominal_bound` is the closed-form
/// estimate in terms of tau(1) (or of the total mass), which may fail for
/// costs where sum tau(w_e) exceeds tau(sum w_e).
struct Bridge {
  TransportGraph graph;
  double cost = 0.0;
  double bound = 0.0;
  double nominal_bound = 0.0;
  bool holds() const { return cost <= bound * (1 + 1e-12) + 1e-15; }
};

/// Levels k+1..m of the n-adic tree, from P^k(mu) to P^m(mu).
Bridge bridge_stacked(const DiscreteMeasure& mu, int k, int m, const TransportCost& tau,
                      const ConcaveMajorant& beta, const DyadicGrid& grid = {});

/// Stand-in for the convolution K_delta * mu: each atom split evenly over the
/// 3^n points of a centred grid of pitch min(delta/6, delta/(3 sqrt n)), all
/// inside the ball of radius delta/3.
DiscreteMeasure mollify(const DiscreteMeasure& mu, double delta);

/// Grid-to-grid matching from P^k(mu) to P^k(mollify(mu, delta)): each
/// particle moves from its projected position to the projection of its
/// mollified position.
Bridge bridge_mollified(const DiscreteMeasure& mu, int k, double delta, const TransportCost& tau,
                        const DyadicGrid& grid = {});

/// Star from every atom of mu to its k-level grid position, mu to P^k(mu).
Bridge bridge_projection(const DiscreteMeasure& mu, int k, const TransportCost& tau,
                         const DyadicGrid& grid = {});

/// Star through the grid centre moving the excess of mu over nu in and the
/// excess of nu over mu out.
Bridge bridge_origin_star(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const TransportCost& tau,
                          const DyadicGrid& grid = {});

}  // namespace ramiflow
