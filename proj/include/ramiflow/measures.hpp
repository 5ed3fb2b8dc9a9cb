#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <optional>
#include <vector>

#include "ramiflow/costs.hpp"
#include "ramiflow/geometry.hpp"

namespace ramiflow {

struct Atom {
  Point position;
  double mass = 0.0;
  friend bool operator==(const Atom&, const Atom&) = default;
};

/// Finite nonnegative combination of Dirac masses in R^n, kept in canonical
/// form: positive masses, pairwise distinct positions (within the snap
/// tolerance), atoms sorted lexicographically by position.
class DiscreteMeasure {
 public:
  DiscreteMeasure() = default;
  // Canonicalizes; see validate_measure.
  DiscreteMeasure(std::size_t dim, std::vector<Atom> atoms);

  static DiscreteMeasure dirac(const Point& x, double mass = 1.0);

  std::size_t dim() const noexcept { return dim_; }
  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  std::size_t size() const noexcept { return atoms_.size(); }
  bool empty() const noexcept { return atoms_.empty(); }
  double total_mass() const;
  // Mass of the atom at x (within tolerance), 0 if none.
  double mass_at(const Point& x) const;
  // Largest |coordinate| over the support, 0 for the empty measure.
  double support_radius() const;

  DiscreteMeasure scaled(double factor) const;
  DiscreteMeasure pushed_forward(double spatial_factor) const;

  friend bool operator==(const DiscreteMeasure&, const DiscreteMeasure&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<Atom> atoms_;
};

/// Signed atomic measure, e.g. a divergence mu+ - mu-. Same canonical form as
/// DiscreteMeasure with nonzero signed masses.
class SignedDiscreteMeasure {
 public:
  SignedDiscreteMeasure() = default;
  // Coincident atoms are merged; atoms with |mass| <= drop_below are removed.
  SignedDiscreteMeasure(std::size_t dim, std::vector<Atom> atoms, double drop_below = 0.0);

  static SignedDiscreteMeasure difference(const DiscreteMeasure& plus, const DiscreteMeasure& minus,
                                          double drop_below = 0.0);

  std::size_t dim() const noexcept { return dim_; }
  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  bool empty() const noexcept { return atoms_.empty(); }
  double mass_at(const Point& x) const;
  double total_variation() const;

 private:
  std::size_t dim_ = 0;
  std::vector<Atom> atoms_;
};

// Largest per-atom mass difference between two signed measures (atoms
// matched by position within tolerance).
double max_abs_difference(const SignedDiscreteMeasure& a, const SignedDiscreteMeasure& b);

/// Canonical form of a raw atom list: coincident atoms merged, zero-mass atoms
/// dropped. Throws InvalidMeasure for negative or non-finite data.
DiscreteMeasure validate_measure(std::size_t dim, const std::vector<Atom>& raw);

// Relative tolerance for equal-total-mass preconditions.
inline constexpr double kMassTolerance = 1e-9;

void require_equal_mass(const DiscreteMeasure& a, const DiscreteMeasure& b);

struct RescaledProblem {
  DiscreteMeasure plus;
  DiscreteMeasure minus;
  TransportCost cost;  // w -> tau(mass * w)
  double mass = 1.0;   // common total mass m
  double scale = 1.0;  // spatial scale s
  // Original graph cost = cost_factor() * normalized graph cost.
  double cost_factor() const { return scale; }
};

/// Maps (mu+, mu-, tau) to the normalized problem: unit total mass, support in
/// [-1,1]^n, rescaled cost w -> tau(m w). A graph cost computed in normalized
/// coordinates with the rescaled cost, times cost_factor(), is the original
/// cost. `scale` defaults to the support radius (1 for a measure at the
/// origin); an explicit scale must contain the support.
RescaledProblem rescale(const DiscreteMeasure& plus, const DiscreteMeasure& minus,
                        const TransportCost& tau, std::optional<double> scale = std::nullopt);

/// k-level grid projection: every atom moves to the centre of its cell
/// v + (-2^{1-k}, 2^{1-k}]^n on the leaf grid {2^{1-k} v : v odd}.
/// Requires support in (-2,2]^n.
DiscreteMeasure project_klevel(const DiscreteMeasure& m, int k);

/// Nested dyadic cells of the box c + (-2s, 2s]^n. Level k has 2^k half-open
/// cells (upper end closed) per axis, centred on c + s 2^{1-k} v with v odd.
struct DyadicGrid {
  double scale = 1.0;
  Point center;  // empty point means the origin

  bool contains(const Point& x) const;
  // Per-axis cell index in [0, 2^k); throws OutOfDomain outside the box.
  std::vector<std::int64_t> cell(const Point& x, int k) const;
  Point cell_center(std::span<const std::int64_t> index, int k) const;
  Point leaf(const Point& x, int k) const { return cell_center(cell(x, k), k); }
  Point origin(std::size_t dim) const;
};

/// Exact Wasserstein-1 distance (Euclidean ground cost) between equal-mass
/// atomic measures, via min-cost flow on the complete bipartite atom graph.
double wasserstein1(const DiscreteMeasure& plus, const DiscreteMeasure& minus);

struct TransportPlanEntry {
  std::size_t from;  // atom index in plus
  std::size_t to;    // atom index in minus
  double mass;
};

struct OptimalPlan {
  double cost = 0.0;
  std::vector<TransportPlanEntry> entries;
};

OptimalPlan optimal_transport_plan(const DiscreteMeasure& plus, const DiscreteMeasure& minus);

}  // namespace ramiflow
