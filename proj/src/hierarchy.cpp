#include "ramiflow/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "ramiflow/errors.hpp"

namespace ramiflow {

namespace {

using CellIndex = std::vector<std::int64_t>;

void require_level(int k) {
  if (k < 1 || k > 40) throw Error(ErrorCode::InvalidArgument, "level must lie in [1, 40]");
}

CellIndex parent_of(const CellIndex& c) {
  CellIndex p = c;
  for (auto& x : p) x >>= 1;
  return p;
}

// Per level j = 1..k: cell index -> mass, for the cells holding mass.
std::vector<std::map<CellIndex, CompensatedSum>> cell_masses(const DiscreteMeasure& m, int k,
                                                             const DyadicGrid& grid) {
  std::vector<std::map<CellIndex, CompensatedSum>> levels(static_cast<std::size_t>(k) + 1);
  for (const Atom& a : m.atoms()) {
    CellIndex c = grid.cell(a.position, k);
    for (int j = k; j >= 1; --j) {
      levels[static_cast<std::size_t>(j)][c] += a.mass;
      c = parent_of(c);
    }
  }
  return levels;
}

// Measure at the tails (or heads) of a set of edges.
DiscreteMeasure endpoint_measure(const TransportGraph& g, const std::vector<Edge>& edges, bool heads) {
  std::vector<Atom> atoms;
  atoms.reserve(edges.size());
  for (const Edge& e : edges) atoms.push_back({g.vertices()[heads ? e.head : e.tail], e.weight});
  if (atoms.empty()) return {};
  return DiscreteMeasure(g.dim(), std::move(atoms));
}

double sum_tau(const TransportGraph& g, const TransportCost& tau) {
  CompensatedSum s;
  for (const Edge& e : g.edges()) s += tau(e.weight);
  return s.value();
}

DiscreteMeasure leaf_projection(const DiscreteMeasure& m, int k, const DyadicGrid& grid) {
  if (m.empty()) return m;
  std::map<CellIndex, CompensatedSum> cells;
  for (const Atom& a : m.atoms()) cells[grid.cell(a.position, k)] += a.mass;
  std::vector<Atom> atoms;
  for (const auto& [c, w] : cells) atoms.push_back({grid.cell_center(c, k), w.value()});
  return DiscreteMeasure(m.dim(), std::move(atoms));
}

}  // namespace

double NadicGraph::edge_length(int j) const {
  return std::sqrt(static_cast<double>(dim())) * std::exp2(1 - j) * grid.scale;
}

double NadicGraph::edge_count(int j) const { return std::exp2(static_cast<double>(dim()) * j); }

TransportGraph NadicGraph::level(int j) const { return levels_between(j, j); }

TransportGraph NadicGraph::levels_between(int from, int to) const {
  if (from < 1 || to > levels || from > to) throw Error(ErrorCode::InvalidArgument, "level range out of bounds");
  std::vector<Edge> edges;
  std::vector<Edge> first;
  std::vector<Edge> last;
  for (std::size_t i = 0; i < graph.edges().size(); ++i) {
    const int l = edge_level[i];
    if (l < from || l > to) continue;
    edges.push_back(graph.edges()[i]);
    if (l == from) first.push_back(graph.edges()[i]);
    if (l == to) last.push_back(graph.edges()[i]);
  }
  return TransportGraph(graph.vertices(), std::move(edges), endpoint_measure(graph, first, false),
                        endpoint_measure(graph, last, true));
}

NadicGraph nadic_graph(const DiscreteMeasure& m, int k, const DyadicGrid& grid) {
  require_level(k);
  NadicGraph r;
  r.levels = k;
  r.grid = grid;
  const std::size_t n = m.dim();
  const auto masses = cell_masses(m, k, grid);

  std::vector<Point> vertices{grid.origin(n)};
  std::vector<Edge> edges;
  std::map<CellIndex, std::size_t> previous{{CellIndex(n, 0), 0}};
  for (int j = 1; j <= k; ++j) {
    std::map<CellIndex, std::size_t> current;
    for (const auto& [c, w] : masses[static_cast<std::size_t>(j)]) {
      const double weight = w.value();
      if (weight <= 0) continue;
      const std::size_t v = vertices.size();
      vertices.push_back(grid.cell_center(c, j));
      current.emplace(c, v);
      edges.push_back({previous.at(parent_of(c)), v, weight});
      r.edge_level.push_back(j);
    }
    previous = std::move(current);
  }

  std::vector<Atom> leaves;
  for (const auto& [c, w] : masses[static_cast<std::size_t>(k)]) leaves.push_back({grid.cell_center(c, k), w.value()});
  const DiscreteMeasure source =
      m.empty() ? DiscreteMeasure() : DiscreteMeasure::dirac(grid.origin(n), m.total_mass());
  const DiscreteMeasure sink = leaves.empty() ? DiscreteMeasure() : DiscreteMeasure(n, std::move(leaves));
  r.graph = TransportGraph(std::move(vertices), std::move(edges), source, sink);
  return r;
}

std::vector<std::vector<double>> nadic_level_masses(const DiscreteMeasure& m, int k, const DyadicGrid& grid) {
  require_level(k);
  const auto masses = cell_masses(m, k, grid);
  std::vector<std::vector<double>> out(static_cast<std::size_t>(k) + 1);
  out[0].push_back(m.total_mass());
  for (int j = 1; j <= k; ++j)
    for (const auto& [c, w] : masses[static_cast<std::size_t>(j)]) out[static_cast<std::size_t>(j)].push_back(w.value());
  return out;
}

std::vector<LevelCost> nadic_cost_bounds(const DiscreteMeasure& m, int k, const TransportCost& tau,
                                         const ConcaveMajorant& beta, const DyadicGrid& grid) {
  const auto masses = nadic_level_masses(m, k, grid);
  const double n = static_cast<double>(m.dim());
  const double total = m.total_mass();
  std::vector<LevelCost> out;
  for (int j = 1; j <= k; ++j) {
    CompensatedSum s;
    for (double w : masses[static_cast<std::size_t>(j)]) s += tau(w);
    LevelCost c;
    c.level = j;
    const double length = std::sqrt(n) * std::exp2(1 - j) * grid.scale;
    c.actual = length * s.value();
    // Jensen over the 2^{nj} cells of level j.
    const double cells = std::exp2(n * j);
    c.bound = 2 * std::sqrt(n) * grid.scale * std::exp2((n - 1) * j) * beta(total / cells);
    c.holds = c.actual <= c.bound + 1e-9;
    out.push_back(c);
  }
  return out;
}

LevelCost nadic_cost_bound(const DiscreteMeasure& m, int k, const TransportCost& tau, const ConcaveMajorant& beta,
                           const DyadicGrid& grid) {
  return nadic_cost_bounds(m, k, tau, beta, grid).back();
}

TransportGraph connect_nadic(const DiscreteMeasure& plus, const DiscreteMeasure& minus, int k,
                             const DyadicGrid& grid) {
  require_equal_mass(plus, minus);
  const NadicGraph a = nadic_graph(plus, k, grid);
  const NadicGraph b = nadic_graph(minus, k, grid);
  return graph_union(a.graph.reversed(), b.graph, a.graph.sink(), b.graph.sink());
}

Bridge bridge_stacked(const DiscreteMeasure& mu, int k, int m, const TransportCost& tau,
                      const ConcaveMajorant& beta, const DyadicGrid& grid) {
  if (k < 0 || m <= k) throw Error(ErrorCode::InvalidArgument, "stacked bridge needs 0 <= k < m");
  const NadicGraph g = nadic_graph(mu, m, grid);
  Bridge b;
  b.graph = g.levels_between(k + 1, m);
  b.cost = graph_cost(b.graph, tau).total;
  const auto levels = nadic_cost_bounds(mu, m, tau, beta, grid);
  CompensatedSum bound;
  for (int j = k + 1; j <= m; ++j) bound += levels[static_cast<std::size_t>(j - 1)].bound;
  b.bound = bound.value();
  b.nominal_bound = b.bound;
  return b;
}

DiscreteMeasure mollify(const DiscreteMeasure& mu, double delta) {
  if (!(delta > 0 && delta < 1)) throw Error(ErrorCode::InvalidArgument, "smoothing radius must lie in (0, 1)");
  const std::size_t n = mu.dim();
  const double pitch = std::min(delta / 6, delta / (3 * std::sqrt(static_cast<double>(n))));
  const std::size_t count = static_cast<std::size_t>(std::pow(3, n));
  std::vector<Atom> atoms;
  atoms.reserve(mu.size() * count);
  for (const Atom& a : mu.atoms())
    for (std::size_t code = 0; code < count; ++code) {
      Point p = a.position;
      std::size_t c = code;
      for (std::size_t d = 0; d < n; ++d, c /= 3) p[d] += (static_cast<double>(c % 3) - 1.0) * pitch;
      atoms.push_back({p, a.mass / static_cast<double>(count)});
    }
  return DiscreteMeasure(n, std::move(atoms));
}

Bridge bridge_mollified(const DiscreteMeasure& mu, int k, double delta, const TransportCost& tau,
                        const DyadicGrid& grid) {
  require_level(k);
  const std::size_t n = mu.dim();
  const DiscreteMeasure smooth = mollify(mu, delta);
  // Track particles: atom a at x sends mass/3^n from leaf(x) to leaf(x + offset).
  const double pitch = std::min(delta / 6, delta / (3 * std::sqrt(static_cast<double>(n))));
  const std::size_t count = static_cast<std::size_t>(std::pow(3, n));
  PointIndex index;
  std::map<std::pair<std::size_t, std::size_t>, CompensatedSum> flow;
  for (const Atom& a : mu.atoms()) {
    const std::size_t from = index.insert(grid.leaf(a.position, k));
    for (std::size_t code = 0; code < count; ++code) {
      Point p = a.position;
      std::size_t c = code;
      for (std::size_t d = 0; d < n; ++d, c /= 3) p[d] += (static_cast<double>(c % 3) - 1.0) * pitch;
      const std::size_t to = index.insert(grid.leaf(p, k));
      if (to != from) flow[{from, to}] += a.mass / static_cast<double>(count);
    }
  }
  std::vector<Edge> edges;
  for (const auto& [key, w] : flow) edges.push_back({key.first, key.second, w.value()});
  Bridge b;
  b.graph = TransportGraph(index.points(), std::move(edges), leaf_projection(mu, k, grid),
                           leaf_projection(smooth, k, grid));
  b.cost = graph_cost(b.graph, tau).total;
  const double reach = delta + std::exp2(2 - k) * std::sqrt(static_cast<double>(n)) * grid.scale;
  b.bound = reach * sum_tau(b.graph, tau);
  b.nominal_bound = reach * tau(mu.total_mass());
  return b;
}

Bridge bridge_projection(const DiscreteMeasure& mu, int k, const TransportCost& tau, const DyadicGrid& grid) {
  require_level(k);
  std::vector<Point> vertices;
  std::vector<Edge> edges;
  for (const Atom& a : mu.atoms()) {
    const Point leaf = grid.leaf(a.position, k);
    if (near(leaf, a.position)) continue;
    edges.push_back({vertices.size(), vertices.size() + 1, a.mass});
    vertices.push_back(a.position);
    vertices.push_back(leaf);
  }
  Bridge b;
  b.graph = TransportGraph(std::move(vertices), std::move(edges), mu, leaf_projection(mu, k, grid));
  b.cost = graph_cost(b.graph, tau).total;
  const double reach = std::sqrt(static_cast<double>(mu.dim())) * std::exp2(1 - k) * grid.scale;
  CompensatedSum s;
  for (const Atom& a : mu.atoms()) s += tau(a.mass);
  b.bound = reach * s.value();
  b.nominal_bound = reach * tau(mu.total_mass());
  return b;
}

Bridge bridge_origin_star(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const TransportCost& tau,
                          const DyadicGrid& grid) {
  require_equal_mass(mu, nu);
  const std::size_t n = mu.empty() ? nu.dim() : mu.dim();
  for (const auto* m : {&mu, &nu})
    for (const Atom& a : m->atoms())
      if (!grid.contains(a.position)) throw Error(ErrorCode::OutOfDomain, "atom outside the grid box");
  const Point c = grid.origin(n);
  const auto diff = SignedDiscreteMeasure::difference(mu, nu);
  std::vector<Point> vertices{c};
  std::vector<Edge> edges;
  CompensatedSum s;
  CompensatedSum tv;
  for (const Atom& a : diff.atoms()) {
    s += tau(std::abs(a.mass));
    tv += std::abs(a.mass);
    if (near(a.position, c)) continue;
    const std::size_t v = vertices.size();
    vertices.push_back(a.position);
    if (a.mass > 0)
      edges.push_back({v, 0, a.mass});
    else
      edges.push_back({0, v, -a.mass});
  }
  Bridge b;
  b.graph = TransportGraph(std::move(vertices), std::move(edges), mu, nu);
  b.cost = graph_cost(b.graph, tau).total;
  const double reach = 2 * std::sqrt(static_cast<double>(n)) * grid.scale;
  b.bound = reach * s.value();
  b.nominal_bound = reach * tau(tv.value());
  return b;
}

DyadicGrid enclosing_grid(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  const std::size_t n = a.empty() ? b.dim() : a.dim();
  if (a.support_radius() <= 1.0 && b.support_radius() <= 1.0) return {};
  std::vector<double> lo(n, std::numeric_limits<double>::infinity());
  std::vector<double> hi(n, -std::numeric_limits<double>::infinity());
  for (const auto* m : {&a, &b})
    for (const Atom& at : m->atoms())
      for (std::size_t i = 0; i < n; ++i) {
        lo[i] = std::min(lo[i], at.position[i]);
        hi[i] = std::max(hi[i], at.position[i]);
      }
  std::vector<double> c(n);
  double half = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    c[i] = 0.5 * (lo[i] + hi[i]);
    half = std::max(half, 0.5 * (hi[i] - lo[i]));
  }
  DyadicGrid g;
  g.center = Point(std::move(c));
  g.scale = half > 0 ? half : 1.0;
  return g;
}

TransportGraph nadic_witness(const DiscreteMeasure& plus, const DiscreteMeasure& minus, int k,
                             const DyadicGrid& grid) {
  require_equal_mass(plus, minus);
  const TransportCost unit = TransportCost::wasserstein();
  const TransportGraph in = bridge_projection(plus, k, unit, grid).graph;
  const TransportGraph out = bridge_projection(minus, k, unit, grid).graph.reversed();
  const TransportGraph mid = connect_nadic(plus, minus, k, grid);
  const TransportGraph g = graph_union(graph_union(in, mid, plus, mid.sink()), out, plus, minus);
  return remove_cycles(merge_parallel_edges(g));
}

}  // namespace ramiflow
