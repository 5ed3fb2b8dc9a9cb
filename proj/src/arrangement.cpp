#include "ramiflow/arrangement.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace ramiflow {

bool parallel(const Point& d1, const Point& d2) {
  const double a = d1.dot(d1);
  const double e = d2.dot(d2);
  const double b = d1.dot(d2);
  const double cross2 = std::max(0.0, a * e - b * b);
  return cross2 < kCollinearTolerance * kCollinearTolerance * a * e;
}

SegmentApproach closest_approach(const Point& a1, const Point& b1, const Point& a2, const Point& b2) {
  const Point d1 = b1 - a1;
  const Point d2 = b2 - a2;
  const Point r = a1 - a2;
  const double a = d1.dot(d1);
  const double e = d2.dot(d2);
  const double f = d2.dot(r);
  const double c = d1.dot(r);
  const double b = d1.dot(d2);
  const double denom = a * e - b * b;
  double s = denom > 0 ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
  double t = (b * s + f) / e;
  if (t < 0) {
    t = 0;
    s = std::clamp(-c / a, 0.0, 1.0);
  } else if (t > 1) {
    t = 1;
    s = std::clamp((b - c) / a, 0.0, 1.0);
  }
  return {s, t, distance(a1 + d1 * s, a2 + d2 * t)};
}

namespace {

double project_param(const Point& a, const Point& b, const Point& p) {
  const Point d = b - a;
  return (p - a).dot(d) / d.dot(d);
}

bool collinear(const Point& a1, const Point& b1, const Point& a2) {
  const Point d = b1 - a1;
  const Point r = a2 - a1;
  const double t = r.dot(d) / d.dot(d);
  return (r - d * t).norm() <= kSnapTolerance;
}

bool boxes_meet(const Point& a1, const Point& b1, const Point& a2, const Point& b2) {
  for (std::size_t d = 0; d < a1.dim(); ++d) {
    if (std::max(a1[d], b1[d]) + kSnapTolerance < std::min(a2[d], b2[d])) return false;
    if (std::max(a2[d], b2[d]) + kSnapTolerance < std::min(a1[d], b1[d])) return false;
  }
  return true;
}

}  // namespace

Arrangement::Arrangement(const std::vector<std::pair<Point, Point>>& segments) {
  const std::size_t m = segments.size();
  PointIndex registry;
  for (const auto& [a, b] : segments) {
    registry.insert(a);
    registry.insert(b);
  }

  std::vector<std::vector<double>> cuts(m, std::vector<double>{0.0, 1.0});
  if (m > 0) {
    // Sweep on the first coordinate to prune pairs with disjoint extents.
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    const auto lo = [&](std::size_t i) { return std::min(segments[i].first[0], segments[i].second[0]); };
    const auto hi = [&](std::size_t i) { return std::max(segments[i].first[0], segments[i].second[0]); };
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      return lo(x) < lo(y) || (lo(x) == lo(y) && x < y);
    });
    for (std::size_t oi = 0; oi < m; ++oi) {
      const std::size_t i = order[oi];
      const auto& [ai, bi] = segments[i];
      for (std::size_t oj = oi + 1; oj < m && lo(order[oj]) <= hi(i) + kSnapTolerance; ++oj) {
        const std::size_t j = order[oj];
        const auto& [aj, bj] = segments[j];
        if (!boxes_meet(ai, bi, aj, bj)) continue;
        if (parallel(bi - ai, bj - aj)) {
          if (!collinear(ai, bi, aj)) continue;
          cuts[i].push_back(project_param(ai, bi, aj));
          cuts[i].push_back(project_param(ai, bi, bj));
          cuts[j].push_back(project_param(aj, bj, ai));
          cuts[j].push_back(project_param(aj, bj, bi));
        } else {
          const SegmentApproach c = closest_approach(ai, bi, aj, bj);
          if (c.dist > kSnapTolerance) continue;
          cuts[i].push_back(c.s);
          cuts[j].push_back(c.t);
        }
      }
    }
  }

  std::map<std::pair<std::size_t, std::size_t>, std::vector<Cover>> by_key;
  for (std::size_t i = 0; i < m; ++i) {
    const auto& [a, b] = segments[i];
    const double len = distance(a, b);
    auto& c = cuts[i];
    std::sort(c.begin(), c.end());
    std::vector<std::size_t> ids;
    double last = -1.0;
    for (double t : c) {
      if (t < 0.0 || t > 1.0) continue;
      if (last >= 0.0 && (t - last) * len <= kSnapTolerance) continue;
      const Point p = t == 0.0 ? a : (t == 1.0 ? b : lerp(a, b, t));
      const std::size_t id = registry.insert(p);
      if (ids.empty() || ids.back() != id) ids.push_back(id);
      last = t;
    }
    // The far endpoint must close the chain even if an interior cut snapped onto it.
    const std::size_t end_id = registry.insert(b);
    if (!ids.empty() && ids.back() != end_id) {
      if (distance(registry.points()[ids.back()], b) <= kSnapTolerance) ids.back() = end_id;
      else ids.push_back(end_id);
    }
    for (std::size_t k = 0; k + 1 < ids.size(); ++k) {
      const std::size_t p = ids[k];
      const std::size_t q = ids[k + 1];
      if (p == q) continue;
      const auto key = std::minmax(p, q);
      by_key[{key.first, key.second}].push_back({i, p < q ? 1 : -1});
    }
  }

  points_ = registry.points();
  pieces_.reserve(by_key.size());
  for (auto& [key, covers] : by_key) pieces_.push_back({key.first, key.second, std::move(covers)});
}

}  // namespace ramiflow
