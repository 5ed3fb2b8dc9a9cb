#include "ramiflow/distance.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "ramiflow/errors.hpp"
#include "ramiflow/hierarchy.hpp"

namespace ramiflow {

namespace {

bool atom_less(const Atom& a, const Atom& b) {
  if (a.position != b.position) return a.position < b.position;
  return a.mass < b.mass;
}

bool measure_less(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  return std::lexicographical_compare(a.atoms().begin(), a.atoms().end(), b.atoms().begin(), b.atoms().end(),
                                      atom_less);
}

DistanceBounds ordered_bounds(const DiscreteMeasure& plus, const DiscreteMeasure& minus, const TransportCost& tau,
                              const DistanceBudget& budget) {
  DistanceBounds b;
  const double mass = plus.total_mass();
  b.witness = TransportGraph(plus, minus);
  b.witness_kind = "empty";
  if (plus.empty() || SignedDiscreteMeasure::difference(plus, minus, 1e-15 * mass).empty()) return b;

  // Probability measures whose atoms sum to 1 up to rounding use lambda(1).
  b.lambda = lambda_tau(tau, std::abs(mass - 1.0) <= kMassTolerance ? 1.0 : mass);
  b.w1 = wasserstein1(plus, minus);
  b.lower = b.lambda * b.w1;

  b.upper = std::numeric_limits<double>::infinity();
  const auto consider = [&](const TransportGraph& g, std::string kind) {
    const double c = graph_cost(g, tau).total;
    if (c < b.upper) {
      b.upper = c;
      b.witness = g;
      b.witness_kind = std::move(kind);
    }
  };
  consider(optimal_plan_graph(plus, minus), "plan");
  const DyadicGrid grid = enclosing_grid(plus, minus);
  consider(bridge_origin_star(plus, minus, tau, grid).graph, "origin-star");
  for (int k = 1; k <= budget.max_level; ++k) consider(nadic_witness(plus, minus, k, grid), "nadic-" + std::to_string(k));
  if (budget.use_optimizer && plus.size() + minus.size() <= budget.optimizer_max_atoms)
    consider(optimize(plus, minus, tau, budget.optimizer), "optimizer");
  return b;
}

}  // namespace

DistanceBounds dtau_bounds(const DiscreteMeasure& plus, const DiscreteMeasure& minus, const TransportCost& tau,
                           const DistanceBudget& budget) {
  require_equal_mass(plus, minus);
  if (!measure_less(minus, plus)) return ordered_bounds(plus, minus, tau, budget);
  DistanceBounds b = ordered_bounds(minus, plus, tau, budget);
  b.witness = b.witness.reversed();
  return b;
}

namespace {

// P^k(mu) -> P^m(mu) down the n-adic tree, then out to the atoms of mu.
double refinement_upper(const DiscreteMeasure& mu, int k, int m, const TransportCost& tau,
                        const ConcaveMajorant& beta) {
  const Bridge down = bridge_stacked(mu, k, m, tau, beta);
  const Bridge out = bridge_projection(mu, m, tau);
  const TransportGraph g = graph_union(down.graph, out.graph.reversed(), down.graph.source(), mu);
  return graph_cost(g, tau).total;
}

}  // namespace

MetricProbeReport metric_probe(const std::vector<DiscreteMeasure>& samples, const TransportCost& tau,
                               const DistanceBudget& budget, int refine_levels) {
  MetricProbeReport r;
  const std::size_t n = samples.size();
  std::map<std::pair<std::size_t, std::size_t>, DistanceBounds> cache;
  const auto bounds = [&](std::size_t i, std::size_t j) -> const DistanceBounds& {
    auto it = cache.find({i, j});
    if (it == cache.end()) it = cache.emplace(std::make_pair(i, j), dtau_bounds(samples[i], samples[j], tau, budget)).first;
    return it->second;
  };

  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const DistanceBounds& a = bounds(i, j);
      const DistanceBounds& b = bounds(j, i);
      ++r.symmetry_checks;
      const double tol = 1e-12 * std::max(1.0, a.upper);
      if (std::abs(a.lower - b.lower) > tol || std::abs(a.upper - b.upper) > tol) ++r.symmetry_failures;
    }

  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t c = a + 1; c < n; ++c)
      for (std::size_t b = 0; b < n; ++b) {
        if (b == a || b == c) continue;
        ++r.triangle_checks;
        const double direct = bounds(a, c).upper;
        const double via = bounds(a, b).upper + bounds(b, c).upper;
        if (via < bounds(a, c).lower - 1e-12 * std::max(1.0, via)) ++r.validity_failures;
        if (direct > (1 + kTriangleSlack) * via + 1e-15) ++r.triangle_failures;
        if (via > 0) r.worst_triangle_ratio = std::max(r.worst_triangle_ratio, direct / via);
      }

  const auto beta = ConcaveMajorant::of(tau);
  for (const DiscreteMeasure& mu : samples) {
    std::vector<RefinementStep> steps;
    const std::size_t dim = mu.dim();
    if (beta && !mu.empty() && mu.support_radius() <= 1.0 &&
        std::abs(mu.total_mass() - 1.0) <= kMassTolerance) {
      const double lead = 4 * std::sqrt(static_cast<double>(dim));
      for (int k = 1; k <= refine_levels; ++k) {
        RefinementStep s;
        s.level = k;
        s.upper = refinement_upper(mu, k, k + 12, tau, *beta);
        s.reference = lead * series_sum(*beta, static_cast<int>(dim), k + 1, k + 80);
        s.holds = s.upper <= s.reference;
        if (!s.holds) ++r.refinement_failures;
        steps.push_back(s);
      }
    }
    r.refinement.push_back(std::move(steps));
  }
  return r;
}

}  // namespace ramiflow
