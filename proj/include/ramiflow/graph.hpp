#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "ramiflow/costs.hpp"
#include "ramiflow/geometry.hpp"
#include "ramiflow/measures.hpp"

namespace ramiflow {

struct Edge {
  std::size_t tail = 0;
  std::size_t head = 0;
  double weight = 0.0;
};

/// Discrete transport path: a weighted directed geometric multigraph with
/// straight edges together with its source and sink measures.
///
/// Canonical form, enforced on construction: coincident vertices merged, every
/// source/sink atom location is a vertex, zero-weight edges pruned. Negative
/// or non-finite weights, self-loops and zero-length edges are rejected with
/// InvalidGraph. Parallel edges are kept; see merge_parallel_edges.
class TransportGraph {
 public:
  TransportGraph() = default;
  TransportGraph(std::vector<Point> vertices, std::vector<Edge> edges, DiscreteMeasure source,
                 DiscreteMeasure sink);
  // Empty graph on the atom locations of source and sink.
  TransportGraph(DiscreteMeasure source, DiscreteMeasure sink);

  std::size_t dim() const noexcept { return dim_; }
  const std::vector<Point>& vertices() const noexcept { return vertices_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const DiscreteMeasure& source() const noexcept { return source_; }
  const DiscreteMeasure& sink() const noexcept { return sink_; }

  double length(const Edge& e) const { return distance(vertices_[e.tail], vertices_[e.head]); }
  std::optional<std::size_t> find_vertex(const Point& p) const;
  // Source/sink mass sitting at vertex v.
  double source_mass(std::size_t v) const { return source_at_[v]; }
  double sink_mass(std::size_t v) const { return sink_at_[v]; }
  double total_mass() const { return source_.total_mass(); }

  // Same graph with every edge reversed and source/sink swapped.
  TransportGraph reversed() const;
  // Same vertices and measures, different edge set.
  TransportGraph with_edges(std::vector<Edge> edges) const;

 private:
  std::size_t dim_ = 0;
  std::vector<Point> vertices_;
  std::vector<Edge> edges_;
  DiscreteMeasure source_;
  DiscreteMeasure sink_;
  std::vector<double> source_at_;
  std::vector<double> sink_at_;
  PointIndex index_;
};

/// Union of two graphs (vertices identified by position, edges concatenated)
/// with the given end measures.
TransportGraph graph_union(const TransportGraph& a, const TransportGraph& b,
                           DiscreteMeasure source, DiscreteMeasure sink);

/// Merges parallel and antiparallel edges into one edge per vertex pair with
/// the net weight. Never increases cost for a nondecreasing subadditive tau.
TransportGraph merge_parallel_edges(const TransportGraph& g);

struct ConservationViolation {
  Point position;
  double residual = 0.0;  // mu+({v}) + inflow - mu-({v}) - outflow
};

// Relative vertex residual tolerance (times total mass).
inline constexpr double kConservationTolerance = 1e-9;

std::vector<ConservationViolation> check_conservation(const TransportGraph& g);

/// Net outflow per vertex; equals mu+ - mu- iff conservation holds.
SignedDiscreteMeasure divergence(const TransportGraph& g);

struct CostBreakdown {
  std::vector<double> parts;  // tau(w(e)) l(e), per edge or per segment
  double total = 0.0;
};

CostBreakdown graph_cost(const TransportGraph& g, const TransportCost& tau);

bool has_directed_cycle(const TransportGraph& g);
// Number of independent undirected loops (|E| - |V| + components).
std::size_t cycle_rank(const TransportGraph& g);

/// Repeatedly drains a directed cycle by its minimum weight until the graph is
/// acyclic. Divergence is unchanged and cost never increases.
TransportGraph remove_cycles(const TransportGraph& g);

/// For concave tau: repeatedly shifts flow around an undirected loop so that
/// the loop opens, choosing the direction by supergradients. The result has
/// no undirected loop; cost never increases. Throws NonConcaveCost otherwise.
TransportGraph tree_reduce(const TransportGraph& g, const TransportCost& tau);

struct MaxFlux {
  double max_weight = 0.0;
  bool holds = false;  // max_weight <= total source mass (+1e-9)
};

MaxFlux max_flux_bound(const TransportGraph& g);

/// Normalized latest-arrival times of an acyclic graph: t_v = a / (a + b),
/// where a and b are the longest path lengths into and out of v.
std::vector<double> arrival_times(const TransportGraph& g);

struct SplitResult {
  TransportGraph before;  // mu+ -> mid
  TransportGraph after;   // mid -> mu-
  DiscreteMeasure mid;
};

SplitResult split_at_time(const TransportGraph& g, double t);

struct MidpointSplit {
  double t = 0.0;
  SplitResult split;
  double w1_to_mid = 0.0;  // W1(mu+, mid)
  double w1_total = 0.0;   // W1(mu+, mu-)
};

/// Bisection on t for W1(mu+, mid(t)) = W1(mu+, mu-) / 2.
MidpointSplit find_midpoint_split(const TransportGraph& g, double tolerance = 1e-9);

struct FluxSegment {
  Point a;
  Point b;
  Point theta;  // vector weight, parallel to b - a
};

/// Polyhedral flux theta H^1 restricted to S (+ a diffuse part, always zero
/// for graph fluxes).
struct ConsolidatedFlux {
  std::size_t dim = 0;
  std::vector<FluxSegment> segments;
  double diffuse_mass = 0.0;
};

ConsolidatedFlux consolidate_flux(const TransportGraph& g);

/// Vector sum of weighted oriented segments over their arrangement; the
/// building block of consolidate_flux.
ConsolidatedFlux consolidate_segments(std::size_t dim, const std::vector<std::pair<Point, Point>>& segments,
                                      const std::vector<double>& weights);

/// sum over segments of tau(|theta|) length + tau'(0) * diffuse mass.
ExtendedReal gilbert_energy(const ConsolidatedFlux& flux, const TransportCost& tau);

}  // namespace ramiflow
