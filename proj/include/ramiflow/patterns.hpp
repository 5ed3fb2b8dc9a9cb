#pragma once

#include <cstddef>
#include <vector>

#include "ramiflow/costs.hpp"
#include "ramiflow/graph.hpp"
#include "ramiflow/measures.hpp"

namespace ramiflow {

/// A weighted polygonal particle trajectory. A single point is a stationary
/// path.
struct PlanPath {
  std::vector<Point> points;
  double weight = 0.0;

  double length() const;
};

/// Finitely many weighted polygonal paths: a discrete irrigation pattern.
class IrrigationPlan {
 public:
  IrrigationPlan() = default;
  // Throws InvalidPlan for empty or non-finite paths, nonpositive weights,
  // mixed dimensions, or a multi-point path of zero total length.
  IrrigationPlan(std::size_t dim, std::vector<PlanPath> paths);

  std::size_t dim() const noexcept { return dim_; }
  const std::vector<PlanPath>& paths() const noexcept { return paths_; }
  double total_weight() const;
  // Start points (irrigating measure) and end points (irrigated measure).
  DiscreteMeasure irrigating() const;
  DiscreteMeasure irrigated() const;

 private:
  std::size_t dim_ = 0;
  std::vector<PlanPath> paths_;
};

/// Path decomposition of an acyclic conservative graph: from each source atom
/// (index order) follow the out-edge of largest remaining weight until no
/// out-edge remains, then subtract the bottleneck. Throws CyclicGraph or
/// ConservationViolation.
IrrigationPlan decompose_paths(const TransportGraph& g);

/// Lagrangian cost: over the arrangement of all path segments, each traversal
/// of a piece by a path of weight w pays w tau(m)/m per unit length, where the
/// multiplicity m is the total weight of the distinct paths covering it. For
/// loop-free plans this is sum tau(m) length.
ExtendedReal pattern_cost(const IrrigationPlan& plan, const TransportCost& tau);

/// Net vector flux of all traversals.
ConsolidatedFlux flux_of_plan(const IrrigationPlan& plan);

struct DensitySegment {
  Point a;
  Point b;
  double multiplicity = 0.0;  // total weight of distinct paths through the piece
  Point theta;                // net vector weight; |theta| <= multiplicity
};

struct FluxDensityField {
  std::size_t dim = 0;
  std::vector<DensitySegment> segments;
};

FluxDensityField flux_density(const IrrigationPlan& plan);

/// True iff every path is injective (no point visited twice, up to the snap
/// tolerance).
bool check_loop_free(const IrrigationPlan& plan);

}  // namespace ramiflow
