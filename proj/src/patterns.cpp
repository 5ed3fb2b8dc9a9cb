#include "ramiflow/patterns.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ramiflow/arrangement.hpp"
#include "ramiflow/errors.hpp"

namespace ramiflow {

double PlanPath::length() const {
  CompensatedSum s;
  for (std::size_t i = 1; i < points.size(); ++i) s += distance(points[i - 1], points[i]);
  return s.value();
}

IrrigationPlan::IrrigationPlan(std::size_t dim, std::vector<PlanPath> paths) : dim_(dim), paths_(std::move(paths)) {
  if (dim == 0) throw Error(ErrorCode::InvalidPlan, "dimension must be >= 1");
  for (const PlanPath& p : paths_) {
    if (p.points.empty()) throw Error(ErrorCode::InvalidPlan, "path without points");
    if (!(p.weight > 0) || !std::isfinite(p.weight)) throw Error(ErrorCode::InvalidPlan, "path weight must be positive");
    for (const Point& x : p.points) {
      if (x.dim() != dim) throw Error(ErrorCode::InvalidPlan, "path point dimension mismatch");
      if (!x.finite()) throw Error(ErrorCode::InvalidPlan, "non-finite path point");
    }
    if (p.points.size() > 1 && !(p.length() > kSnapTolerance))
      throw Error(ErrorCode::InvalidPlan, "multi-point path of zero length");
  }
}

double IrrigationPlan::total_weight() const {
  CompensatedSum s;
  for (const PlanPath& p : paths_) s += p.weight;
  return s.value();
}

DiscreteMeasure IrrigationPlan::irrigating() const {
  std::vector<Atom> atoms;
  for (const PlanPath& p : paths_) atoms.push_back({p.points.front(), p.weight});
  return atoms.empty() ? DiscreteMeasure() : DiscreteMeasure(dim_, std::move(atoms));
}

DiscreteMeasure IrrigationPlan::irrigated() const {
  std::vector<Atom> atoms;
  for (const PlanPath& p : paths_) atoms.push_back({p.points.back(), p.weight});
  return atoms.empty() ? DiscreteMeasure() : DiscreteMeasure(dim_, std::move(atoms));
}

IrrigationPlan decompose_paths(const TransportGraph& g) {
  if (has_directed_cycle(g)) throw Error(ErrorCode::CyclicGraph, "path decomposition needs an acyclic graph");
  if (const auto v = check_conservation(g); !v.empty())
    throw Error(ErrorCode::ConservationViolation,
                "mass not conserved (residual " + std::to_string(v.front().residual) + ")");

  const std::size_t n = g.vertices().size();
  const auto& edges = g.edges();
  std::vector<std::vector<std::size_t>> out(n);
  for (std::size_t i = 0; i < edges.size(); ++i) out[edges[i].tail].push_back(i);
  std::vector<double> remaining(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) remaining[i] = edges[i].weight;
  std::vector<double> supply(n), demand(n);
  for (std::size_t v = 0; v < n; ++v) {
    supply[v] = g.source_mass(v);
    demand[v] = g.sink_mass(v);
  }
  const double eps = 1e-12 * g.total_mass();

  std::vector<PlanPath> paths;
  for (std::size_t s = 0; s < n; ++s) {
    while (supply[s] > eps) {
      std::vector<std::size_t> route;
      std::size_t u = s;
      for (;;) {
        std::size_t best = edges.size();
        for (std::size_t e : out[u])
          if (remaining[e] > eps && (best == edges.size() || remaining[e] > remaining[best])) best = e;
        if (best == edges.size()) break;
        route.push_back(best);
        u = edges[best].head;
      }
      double w = supply[s];
      for (std::size_t e : route) w = std::min(w, remaining[e]);
      // A sink short of the path mass by more than rounding cannot occur under
      // conservation; a residual within tolerance is absorbed.
      if (demand[u] > eps) w = std::min(w, demand[u]);
      supply[s] -= w;
      demand[u] -= w;
      for (std::size_t e : route) remaining[e] -= w;
      PlanPath p;
      p.weight = w;
      p.points.push_back(g.vertices()[s]);
      for (std::size_t e : route) p.points.push_back(g.vertices()[edges[e].head]);
      paths.push_back(std::move(p));
    }
  }
  return IrrigationPlan(std::max<std::size_t>(g.dim(), 1), std::move(paths));
}

namespace {

struct PlanSegments {
  std::vector<std::pair<Point, Point>> segments;
  std::vector<std::size_t> owner;  // path index of each segment
};

PlanSegments plan_segments(const IrrigationPlan& plan) {
  PlanSegments r;
  for (std::size_t p = 0; p < plan.paths().size(); ++p) {
    const auto& pts = plan.paths()[p].points;
    for (std::size_t i = 1; i < pts.size(); ++i) {
      if (near(pts[i - 1], pts[i])) continue;
      r.segments.emplace_back(pts[i - 1], pts[i]);
      r.owner.push_back(p);
    }
  }
  return r;
}

}  // namespace

ExtendedReal pattern_cost(const IrrigationPlan& plan, const TransportCost& tau) {
  const PlanSegments ps = plan_segments(plan);
  const Arrangement arr(ps.segments);
  CompensatedSum total;
  for (const auto& piece : arr.pieces()) {
    std::set<std::size_t> through;
    CompensatedSum traversed;
    for (const auto& c : piece.covers) {
      through.insert(ps.owner[c.input]);
      traversed += plan.paths()[ps.owner[c.input]].weight;
    }
    CompensatedSum m;
    for (std::size_t p : through) m += plan.paths()[p].weight;
    const double mass = m.value();
    total += tau(mass) / mass * traversed.value() * arr.length(piece);
  }
  return total.value();
}

ConsolidatedFlux flux_of_plan(const IrrigationPlan& plan) {
  const PlanSegments ps = plan_segments(plan);
  std::vector<double> weights;
  weights.reserve(ps.owner.size());
  for (std::size_t p : ps.owner) weights.push_back(plan.paths()[p].weight);
  return consolidate_segments(plan.dim(), ps.segments, weights);
}

FluxDensityField flux_density(const IrrigationPlan& plan) {
  const PlanSegments ps = plan_segments(plan);
  const Arrangement arr(ps.segments);
  FluxDensityField f;
  f.dim = plan.dim();
  for (const auto& piece : arr.pieces()) {
    std::set<std::size_t> through;
    CompensatedSum net;
    for (const auto& c : piece.covers) {
      through.insert(ps.owner[c.input]);
      net += c.sign * plan.paths()[ps.owner[c.input]].weight;
    }
    CompensatedSum m;
    for (std::size_t p : through) m += plan.paths()[p].weight;
    const Point& a = arr.points()[piece.a];
    const Point& b = arr.points()[piece.b];
    f.segments.push_back({a, b, m.value(), (b - a) * (net.value() / distance(a, b))});
  }
  return f;
}

bool check_loop_free(const IrrigationPlan& plan) {
  for (const PlanPath& path : plan.paths()) {
    std::vector<std::pair<Point, Point>> segs;
    for (std::size_t i = 1; i < path.points.size(); ++i)
      if (!near(path.points[i - 1], path.points[i])) segs.emplace_back(path.points[i - 1], path.points[i]);
    for (std::size_t i = 0; i < segs.size(); ++i)
      for (std::size_t j = i + 1; j < segs.size(); ++j) {
        const Point di = segs[i].second - segs[i].first;
        const Point dj = segs[j].second - segs[j].first;
        if (j == i + 1) {
          // Consecutive segments share a vertex; they overlap only when the
          // path turns straight back.
          if (parallel(di, dj) && di.dot(dj) < 0) return false;
          continue;
        }
        if (closest_approach(segs[i].first, segs[i].second, segs[j].first, segs[j].second).dist <= kSnapTolerance)
          return false;
      }
  }
  return true;
}

}  // namespace ramiflow
