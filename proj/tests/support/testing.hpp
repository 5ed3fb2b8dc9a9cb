#pragma once

// Shared fixtures and independent reference computations for the unit tests.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "ramiflow/graph.hpp"
#include "ramiflow/measures.hpp"

namespace ramiflow::testing {

inline Point P(double x, double y) { return Point{x, y}; }

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// n atoms in [-1,1]^dim with masses summing to total.
inline DiscreteMeasure random_measure(std::mt19937_64& rng, std::size_t n, std::size_t dim = 2,
                                      double total = 1.0) {
  std::vector<Atom> atoms;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Point p(dim);
    for (std::size_t d = 0; d < dim; ++d) p[d] = uniform(rng, -1, 1);
    const double m = uniform(rng, 0.1, 1.0);
    atoms.push_back({p, m});
    sum += m;
  }
  for (Atom& a : atoms) a.mass *= total / sum;
  return DiscreteMeasure(dim, atoms);
}

// Attaches source/sink equal to the positive/negative parts of the edge
// divergence, so the result satisfies conservation by construction.
inline TransportGraph close_graph(std::vector<Point> vertices, std::vector<Edge> edges) {
  std::vector<double> div(vertices.size(), 0.0);
  for (const Edge& e : edges) {
    div[e.tail] += e.weight;
    div[e.head] -= e.weight;
  }
  std::vector<Atom> plus;
  std::vector<Atom> minus;
  for (std::size_t v = 0; v < vertices.size(); ++v) {
    if (div[v] > 1e-14) plus.push_back({vertices[v], div[v]});
    if (div[v] < -1e-14) minus.push_back({vertices[v], -div[v]});
  }
  const std::size_t dim = vertices.front().dim();
  return TransportGraph(std::move(vertices), std::move(edges), DiscreteMeasure(dim, plus),
                        DiscreteMeasure(dim, minus));
}

// Random graph on up to `nv` points with `ne` random edges (cycles allowed).
inline TransportGraph random_graph(std::mt19937_64& rng, std::size_t nv, std::size_t ne) {
  std::vector<Point> v;
  for (std::size_t i = 0; i < nv; ++i) v.push_back(P(uniform(rng, -1, 1), uniform(rng, -1, 1)));
  std::uniform_int_distribution<std::size_t> pick(0, nv - 1);
  std::vector<Edge> e;
  while (e.size() < ne) {
    const std::size_t a = pick(rng);
    const std::size_t b = pick(rng);
    if (a == b) continue;
    e.push_back({a, b, uniform(rng, 0.05, 1.0)});
  }
  return close_graph(std::move(v), std::move(e));
}

inline double orient(const Point& a, const Point& b, const Point& c) {
  return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
}

// Planar segments [a,b], [c,d] meet somewhere other than a shared endpoint.
inline bool bad_crossing(const Point& a, const Point& b, const Point& c, const Point& d) {
  const bool shared = a == c || a == d || b == c || b == d;
  const double o1 = orient(a, b, c), o2 = orient(a, b, d), o3 = orient(c, d, a), o4 = orient(c, d, b);
  if (shared) {
    // Touching at the shared endpoint only, unless collinear and overlapping.
    if (std::abs(o1) < 1e-12 && std::abs(o2) < 1e-12) {
      const Point& s = (a == c || a == d) ? a : b;
      const Point& u = (s == a) ? b : a;
      const Point& w = (s == c) ? d : c;
      return (u - s).dot(w - s) > 0;
    }
    return false;
  }
  return ((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0));
}

// Acyclic planar graph whose edges have pairwise disjoint relative interiors.
// Edges point in increasing x, so the graph is a DAG.
inline TransportGraph random_planar_dag(std::mt19937_64& rng, std::size_t nv, std::size_t ne) {
  std::vector<Point> v;
  for (std::size_t i = 0; i < nv; ++i) v.push_back(P(uniform(rng, -1, 1), uniform(rng, -1, 1)));
  std::uniform_int_distribution<std::size_t> pick(0, nv - 1);
  std::vector<Edge> e;
  for (int attempt = 0; attempt < 2000 && e.size() < ne; ++attempt) {
    std::size_t a = pick(rng);
    std::size_t b = pick(rng);
    if (a == b) continue;
    if (v[a][0] > v[b][0]) std::swap(a, b);
    bool ok = true;
    for (const Edge& f : e)
      if ((f.tail == a && f.head == b) || bad_crossing(v[a], v[b], v[f.tail], v[f.head])) ok = false;
    if (ok) e.push_back({a, b, uniform(rng, 0.05, 1.0)});
  }
  return close_graph(std::move(v), std::move(e));
}

// Exact W1 by enumerating the basic feasible solutions of the transportation
// LP: every vertex of the polytope is supported on a spanning tree of the
// complete bipartite graph. Only for tiny instances.
inline double w1_by_vertex_enumeration(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  const std::size_t na = a.size(), nb = b.size(), m = na * nb, k = na + nb - 1;
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> pick(m, 0);
  std::fill(pick.end() - static_cast<std::ptrdiff_t>(k), pick.end(), 1);
  do {
    // Leaf peeling on the chosen tree.
    std::vector<double> ra(na), rb(nb);
    for (std::size_t i = 0; i < na; ++i) ra[i] = a.atoms()[i].mass;
    for (std::size_t j = 0; j < nb; ++j) rb[j] = b.atoms()[j].mass;
    std::vector<bool> used(m, false);
    std::vector<double> x(m, 0.0);
    bool ok = true;
    for (std::size_t step = 0; step < k && ok; ++step) {
      bool found = false;
      for (std::size_t node = 0; node < na + nb && !found; ++node) {
        std::size_t deg = 0, only = 0;
        for (std::size_t c = 0; c < m; ++c) {
          if (!pick[c] || used[c]) continue;
          if ((node < na && c / nb == node) || (node >= na && c % nb == node - na)) {
            ++deg;
            only = c;
          }
        }
        if (deg != 1) continue;
        found = true;
        used[only] = true;
        const double val = node < na ? ra[node] : rb[node - na];
        x[only] = val;
        ra[only / nb] -= val;
        rb[only % nb] -= val;
      }
      if (!found) ok = false;  // chosen edges contain a cycle
    }
    if (!ok) continue;
    bool feasible = true;
    for (double r : ra) feasible = feasible && std::abs(r) < 1e-12;
    for (double r : rb) feasible = feasible && std::abs(r) < 1e-12;
    for (double xv : x) feasible = feasible && xv > -1e-12;
    if (!feasible) continue;
    double cost = 0.0;
    for (std::size_t c = 0; c < m; ++c)
      cost += x[c] * distance(a.atoms()[c / nb].position, b.atoms()[c % nb].position);
    best = std::min(best, cost);
  } while (std::next_permutation(pick.begin(), pick.end()));
  return best;
}

inline double direct_cost(const TransportGraph& g, const TransportCost& tau) {
  double s = 0.0;
  for (const Edge& e : g.edges()) s += tau(e.weight) * distance(g.vertices()[e.tail], g.vertices()[e.head]);
  return s;
}

// The four-vertex counterexample graphs with a = 0.35, connector mass 0.1,
// length 3: G1 carries a and 1 - a on two parallel horizontals; G3 routes
// 0.1 down the left connector and back up the right one.
inline TransportGraph counterexample_g1() {
  const DiscreteMeasure src(2, {{P(0, 0), 0.35}, {P(0, 1), 0.65}});
  const DiscreteMeasure dst(2, {{P(3, 0), 0.35}, {P(3, 1), 0.65}});
  return TransportGraph({P(0, 0), P(3, 0), P(0, 1), P(3, 1)}, {{0, 1, 0.35}, {2, 3, 0.65}}, src, dst);
}

inline TransportGraph counterexample_g3() {
  const DiscreteMeasure src(2, {{P(0, 0), 0.35}, {P(0, 1), 0.65}});
  const DiscreteMeasure dst(2, {{P(3, 0), 0.35}, {P(3, 1), 0.65}});
  return TransportGraph({P(0, 0), P(3, 0), P(0, 1), P(3, 1)},
                        {{2, 0, 0.1}, {0, 1, 0.45}, {2, 3, 0.55}, {1, 3, 0.1}}, src, dst);
}

}  // namespace ramiflow::testing

#define EXPECT_ERROR_CODE(stmt, expected)                                 \
  do {                                                                    \
    try {                                                                 \
      stmt;                                                               \
      ADD_FAILURE() << "no exception from " #stmt;                        \
    } catch (const ::ramiflow::Error& err_) {                             \
      EXPECT_EQ(err_.code(), expected) << err_.what();                    \
    }                                                                     \
  } while (0)

namespace ramiflow::testing {

// Unit mass spread evenly over the centres of a 2^level x 2^level grid of
// [-1,1]^2 (odd multiples of 2^{-level}).
inline DiscreteMeasure uniform_square(int level, double half_width = 1.0) {
  const int cells = 1 << level;
  std::vector<Atom> atoms;
  const double mass = 1.0 / (static_cast<double>(cells) * cells);
  for (int i = 0; i < cells; ++i)
    for (int j = 0; j < cells; ++j)
      atoms.push_back({P(half_width * (-1 + (2.0 * i + 1) / cells), half_width * (-1 + (2.0 * j + 1) / cells)), mass});
  return DiscreteMeasure(2, atoms);
}

}  // namespace ramiflow::testing
