#include "ramiflow/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "ramiflow/arrangement.hpp"
#include "ramiflow/errors.hpp"

namespace ramiflow {

namespace {

std::size_t infer_dim(const std::vector<Point>& vertices, const DiscreteMeasure& source,
                      const DiscreteMeasure& sink) {
  std::size_t dim = 0;
  const auto take = [&](std::size_t d) {
    if (d == 0) return;
    if (dim != 0 && d != dim) throw Error(ErrorCode::InvalidGraph, "inconsistent dimensions");
    dim = d;
  };
  for (const Point& p : vertices) take(p.dim());
  if (!source.empty()) take(source.dim());
  if (!sink.empty()) take(sink.dim());
  return dim;
}

// Directed adjacency in edge-index order.
std::vector<std::vector<std::size_t>> out_lists(const TransportGraph& g) {
  std::vector<std::vector<std::size_t>> out(g.vertices().size());
  for (std::size_t i = 0; i < g.edges().size(); ++i) out[g.edges()[i].tail].push_back(i);
  return out;
}

// Kahn order; empty optional if the graph has a directed cycle.
std::optional<std::vector<std::size_t>> topological_order(const TransportGraph& g) {
  const std::size_t n = g.vertices().size();
  std::vector<std::size_t> indeg(n, 0);
  for (const Edge& e : g.edges()) ++indeg[e.head];
  const auto out = out_lists(g);
  std::vector<std::size_t> order;
  order.reserve(n);
  for (std::size_t v = 0; v < n; ++v)
    if (indeg[v] == 0) order.push_back(v);
  for (std::size_t i = 0; i < order.size(); ++i)
    for (std::size_t e : out[order[i]])
      if (--indeg[g.edges()[e].head] == 0) order.push_back(g.edges()[e].head);
  if (order.size() != n) return std::nullopt;
  return order;
}

// Edge indices of the first directed cycle found by DFS from vertices in index
// order, following out-edges in index order.
std::optional<std::vector<std::size_t>> find_directed_cycle(const TransportGraph& g) {
  const std::size_t n = g.vertices().size();
  const auto out = out_lists(g);
  enum : char { White, Grey, Black };
  std::vector<char> colour(n, White);
  std::vector<std::size_t> via(n, 0);  // edge by which a grey vertex was entered
  for (std::size_t root = 0; root < n; ++root) {
    if (colour[root] != White) continue;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
    colour[root] = Grey;
    while (!stack.empty()) {
      auto& [v, next] = stack.back();
      if (next == out[v].size()) {
        colour[v] = Black;
        stack.pop_back();
        continue;
      }
      const std::size_t e = out[v][next++];
      const std::size_t h = g.edges()[e].head;
      if (colour[h] == Grey) {
        std::vector<std::size_t> cycle{e};
        for (std::size_t u = v; u != h; u = g.edges()[via[u]].tail) cycle.push_back(via[u]);
        std::reverse(cycle.begin(), cycle.end());
        return cycle;
      }
      if (colour[h] == White) {
        colour[h] = Grey;
        via[h] = e;
        stack.push_back({h, 0});
      }
    }
  }
  return std::nullopt;
}

struct UndirectedLoop {
  std::vector<std::size_t> edges;
  std::vector<int> signs;  // +1 if the edge runs along the loop orientation
};

// First undirected loop closed by an edge (in index order) whose endpoints are
// already joined by earlier edges.
std::optional<UndirectedLoop> find_undirected_loop(const TransportGraph& g) {
  const std::size_t n = g.vertices().size();
  const auto& edges = g.edges();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  const auto root = [&](std::size_t v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  std::vector<std::vector<std::size_t>> forest(n);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const Edge& e = edges[i];
    const std::size_t a = root(e.tail);
    const std::size_t b = root(e.head);
    if (a != b) {
      parent[a] = b;
      forest[e.tail].push_back(i);
      forest[e.head].push_back(i);
      continue;
    }
    // Forest path head -> tail, then edge i closes it (oriented tail -> head).
    std::vector<std::size_t> from(n, std::numeric_limits<std::size_t>::max());
    std::vector<std::size_t> queue{e.head};
    from[e.head] = i;
    for (std::size_t q = 0; q < queue.size() && from[e.tail] == std::numeric_limits<std::size_t>::max(); ++q) {
      const std::size_t v = queue[q];
      for (std::size_t f : forest[v]) {
        const std::size_t u = edges[f].tail == v ? edges[f].head : edges[f].tail;
        if (from[u] != std::numeric_limits<std::size_t>::max()) continue;
        from[u] = f;
        queue.push_back(u);
      }
    }
    UndirectedLoop loop;
    loop.edges.push_back(i);
    loop.signs.push_back(1);
    // Walk back from tail to head; each step traverses f from u towards v.
    for (std::size_t v = e.tail; v != e.head;) {
      const std::size_t f = from[v];
      const std::size_t u = edges[f].tail == v ? edges[f].head : edges[f].tail;
      loop.edges.push_back(f);
      loop.signs.push_back(edges[f].tail == u ? 1 : -1);
      v = u;
    }
    return loop;
  }
  return std::nullopt;
}

std::vector<Edge> drop_empty(std::vector<Edge> edges) {
  std::erase_if(edges, [](const Edge& e) { return e.weight <= 0.0; });
  return edges;
}

}  // namespace

TransportGraph::TransportGraph(std::vector<Point> vertices, std::vector<Edge> edges,
                               DiscreteMeasure source, DiscreteMeasure sink)
    : dim_(infer_dim(vertices, source, sink)), source_(std::move(source)), sink_(std::move(sink)) {
  std::vector<std::size_t> id(vertices.size());
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    if (!vertices[i].finite()) throw Error(ErrorCode::InvalidGraph, "non-finite vertex coordinate");
    id[i] = index_.insert(vertices[i]);
  }
  source_at_.assign(index_.size(), 0.0);
  const auto attach = [&](const DiscreteMeasure& m, std::vector<double>& at) {
    for (const Atom& a : m.atoms()) {
      const std::size_t v = index_.insert(a.position);
      if (v >= at.size()) at.resize(v + 1, 0.0);
      at[v] += a.mass;
    }
  };
  attach(source_, source_at_);
  attach(sink_, sink_at_);
  vertices_ = index_.points();
  source_at_.resize(vertices_.size(), 0.0);
  sink_at_.resize(vertices_.size(), 0.0);

  edges_.reserve(edges.size());
  for (const Edge& e : edges) {
    if (e.tail >= id.size() || e.head >= id.size())
      throw Error(ErrorCode::InvalidGraph, "edge endpoint out of range");
    if (!std::isfinite(e.weight) || e.weight < 0)
      throw Error(ErrorCode::InvalidGraph, "edge weight must be finite and nonnegative");
    if (e.weight == 0.0) continue;
    const Edge c{id[e.tail], id[e.head], e.weight};
    if (c.tail == c.head) throw Error(ErrorCode::InvalidGraph, "self-loop or zero-length edge");
    edges_.push_back(c);
  }
}

TransportGraph::TransportGraph(DiscreteMeasure source, DiscreteMeasure sink)
    : TransportGraph({}, {}, std::move(source), std::move(sink)) {}

std::optional<std::size_t> TransportGraph::find_vertex(const Point& p) const { return index_.find(p); }

TransportGraph TransportGraph::reversed() const {
  std::vector<Edge> edges = edges_;
  for (Edge& e : edges) std::swap(e.tail, e.head);
  return TransportGraph(vertices_, std::move(edges), sink_, source_);
}

TransportGraph TransportGraph::with_edges(std::vector<Edge> edges) const {
  return TransportGraph(vertices_, std::move(edges), source_, sink_);
}

TransportGraph graph_union(const TransportGraph& a, const TransportGraph& b, DiscreteMeasure source,
                           DiscreteMeasure sink) {
  std::vector<Point> vertices = a.vertices();
  vertices.insert(vertices.end(), b.vertices().begin(), b.vertices().end());
  std::vector<Edge> edges = a.edges();
  const std::size_t off = a.vertices().size();
  for (const Edge& e : b.edges()) edges.push_back({e.tail + off, e.head + off, e.weight});
  return TransportGraph(std::move(vertices), std::move(edges), std::move(source), std::move(sink));
}

TransportGraph merge_parallel_edges(const TransportGraph& g) {
  std::map<std::pair<std::size_t, std::size_t>, CompensatedSum> net;
  double scale = 0.0;
  for (const Edge& e : g.edges()) {
    const bool fwd = e.tail < e.head;
    net[fwd ? std::pair{e.tail, e.head} : std::pair{e.head, e.tail}] += fwd ? e.weight : -e.weight;
    scale = std::max(scale, e.weight);
  }
  std::vector<Edge> edges;
  for (const auto& [key, sum] : net) {
    const double w = sum.value();
    if (std::abs(w) <= 1e-15 * scale) continue;
    if (w > 0)
      edges.push_back({key.first, key.second, w});
    else
      edges.push_back({key.second, key.first, -w});
  }
  return g.with_edges(std::move(edges));
}

namespace {

std::vector<CompensatedSum> net_outflow(const TransportGraph& g) {
  std::vector<CompensatedSum> out(g.vertices().size());
  for (const Edge& e : g.edges()) {
    out[e.tail] += e.weight;
    out[e.head] += -e.weight;
  }
  return out;
}

}  // namespace

std::vector<ConservationViolation> check_conservation(const TransportGraph& g) {
  const double tol = kConservationTolerance * g.total_mass();
  const auto out = net_outflow(g);
  std::vector<ConservationViolation> violations;
  for (std::size_t v = 0; v < g.vertices().size(); ++v) {
    CompensatedSum r = out[v];
    r += -g.source_mass(v);
    r += g.sink_mass(v);
    const double residual = -r.value();
    if (std::abs(residual) > tol) violations.push_back({g.vertices()[v], residual});
  }
  return violations;
}

SignedDiscreteMeasure divergence(const TransportGraph& g) {
  const auto out = net_outflow(g);
  std::vector<Atom> atoms;
  for (std::size_t v = 0; v < out.size(); ++v) {
    const double d = out[v].value();
    if (d != 0.0) atoms.push_back({g.vertices()[v], d});
  }
  return SignedDiscreteMeasure(std::max<std::size_t>(g.dim(), 1), std::move(atoms));
}

CostBreakdown graph_cost(const TransportGraph& g, const TransportCost& tau) {
  CostBreakdown c;
  c.parts.reserve(g.edges().size());
  CompensatedSum total;
  for (const Edge& e : g.edges()) {
    const double part = tau(e.weight) * g.length(e);
    c.parts.push_back(part);
    total += part;
  }
  c.total = total.value();
  return c;
}

bool has_directed_cycle(const TransportGraph& g) { return !topological_order(g).has_value(); }

std::size_t cycle_rank(const TransportGraph& g) {
  const std::size_t n = g.vertices().size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  const auto root = [&](std::size_t v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  std::size_t rank = 0;
  for (const Edge& e : g.edges()) {
    const std::size_t a = root(e.tail);
    const std::size_t b = root(e.head);
    if (a == b)
      ++rank;
    else
      parent[a] = b;
  }
  return rank;
}

TransportGraph remove_cycles(const TransportGraph& g) {
  TransportGraph cur = g;
  while (auto cycle = find_directed_cycle(cur)) {
    std::vector<Edge> edges = cur.edges();
    double lambda = std::numeric_limits<double>::infinity();
    for (std::size_t e : *cycle) lambda = std::min(lambda, edges[e].weight);
    for (std::size_t e : *cycle) edges[e].weight = edges[e].weight == lambda ? 0.0 : edges[e].weight - lambda;
    cur = cur.with_edges(drop_empty(std::move(edges)));
  }
  return cur;
}

TransportGraph tree_reduce(const TransportGraph& g, const TransportCost& tau) {
  if (!tau.is_concave())
    throw Error(ErrorCode::NonConcaveCost, "tree reduction requires a concave cost, got " + tau.describe());
  TransportGraph cur = g;
  while (auto loop = find_undirected_loop(cur)) {
    std::vector<Edge> edges = cur.edges();
    double plus = 0.0;
    double minus = 0.0;
    for (std::size_t k = 0; k < loop->edges.size(); ++k) {
      const Edge& e = edges[loop->edges[k]];
      const double d = tau.supergradient(e.weight) * cur.length(e);
      (loop->signs[k] > 0 ? plus : minus) += d;
    }
    const bool none_minus = std::none_of(loop->signs.begin(), loop->signs.end(), [](int s) { return s < 0; });
    if (plus > minus || (plus == minus && none_minus))
      for (int& s : loop->signs) s = -s;
    double lambda = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < loop->edges.size(); ++k)
      if (loop->signs[k] < 0) lambda = std::min(lambda, edges[loop->edges[k]].weight);
    for (std::size_t k = 0; k < loop->edges.size(); ++k) {
      Edge& e = edges[loop->edges[k]];
      if (loop->signs[k] > 0)
        e.weight += lambda;
      else
        e.weight = e.weight == lambda ? 0.0 : e.weight - lambda;
    }
    cur = cur.with_edges(drop_empty(std::move(edges)));
  }
  return cur;
}

MaxFlux max_flux_bound(const TransportGraph& g) {
  if (has_directed_cycle(g)) throw Error(ErrorCode::CyclicGraph, "maximal flux bound needs an acyclic graph");
  MaxFlux r;
  for (const Edge& e : g.edges()) r.max_weight = std::max(r.max_weight, e.weight);
  r.holds = r.max_weight <= g.total_mass() + 1e-9;
  return r;
}

std::vector<double> arrival_times(const TransportGraph& g) {
  const auto order = topological_order(g);
  if (!order) throw Error(ErrorCode::CyclicGraph, "arrival times need an acyclic graph");
  const std::size_t n = g.vertices().size();
  const auto out = out_lists(g);
  std::vector<double> before(n, 0.0);
  std::vector<double> after(n, 0.0);
  for (std::size_t v : *order)
    for (std::size_t e : out[v]) {
      const Edge& ed = g.edges()[e];
      before[ed.head] = std::max(before[ed.head], before[v] + g.length(ed));
    }
  for (auto it = order->rbegin(); it != order->rend(); ++it)
    for (std::size_t e : out[*it]) {
      const Edge& ed = g.edges()[e];
      after[*it] = std::max(after[*it], after[ed.head] + g.length(ed));
    }
  std::vector<double> t(n, 0.0);
  for (std::size_t v = 0; v < n; ++v) {
    const double span = before[v] + after[v];
    t[v] = span > 0 ? before[v] / span : 0.0;
  }
  return t;
}

SplitResult split_at_time(const TransportGraph& g, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw Error(ErrorCode::InvalidArgument, "split time must lie in [0, 1]");
  const std::vector<double> tv = arrival_times(g);
  const auto& V = g.vertices();

  std::vector<Point> pv;
  std::vector<Edge> pe;
  std::vector<Point> mv;
  std::vector<Edge> me;
  const auto add = [](std::vector<Point>& vs, std::vector<Edge>& es, const Point& a, const Point& b,
                      double w) {
    es.push_back({vs.size(), vs.size() + 1, w});
    vs.push_back(a);
    vs.push_back(b);
  };
  for (const Edge& e : g.edges()) {
    const double t0 = tv[e.tail];
    const double t1 = tv[e.head];
    const Point& a = V[e.tail];
    const Point& b = V[e.head];
    if (t1 <= t) {
      add(pv, pe, a, b, e.weight);
    } else if (t0 >= t) {
      add(mv, me, a, b, e.weight);
    } else {
      const Point p = lerp(a, b, (t - t0) / (t1 - t0));
      if (near(p, a))
        add(mv, me, a, b, e.weight);
      else if (near(p, b))
        add(pv, pe, a, b, e.weight);
      else {
        add(pv, pe, a, p, e.weight);
        add(mv, me, p, b, e.weight);
      }
    }
  }

  const std::size_t dim = g.dim();
  // mid = mu+ - div(G+), accumulated per position.
  PointIndex index;
  std::vector<CompensatedSum> mass;
  const auto put = [&](const Point& x, double m) {
    const std::size_t id = index.insert(x);
    if (id == mass.size()) mass.emplace_back();
    mass[id] += m;
  };
  for (const Atom& a : g.source().atoms()) put(a.position, a.mass);
  for (const Edge& e : pe) {
    put(pv[e.tail], -e.weight);
    put(pv[e.head], e.weight);
  }
  const double drop = 1e-13 * g.total_mass();
  std::vector<Atom> atoms;
  for (std::size_t i = 0; i < mass.size(); ++i) {
    const double m = mass[i].value();
    if (m > drop) atoms.push_back({index.points()[i], m});
  }
  DiscreteMeasure mid = atoms.empty() ? DiscreteMeasure() : DiscreteMeasure(dim, std::move(atoms));

  SplitResult r;
  r.before = TransportGraph(std::move(pv), std::move(pe), g.source(), mid);
  r.after = TransportGraph(std::move(mv), std::move(me), mid, g.sink());
  r.mid = std::move(mid);
  return r;
}

MidpointSplit find_midpoint_split(const TransportGraph& g, double tolerance) {
  MidpointSplit r;
  r.w1_total = wasserstein1(g.source(), g.sink());
  const double target = r.w1_total / 2;
  const auto eval = [&](double t) {
    SplitResult s = split_at_time(g, t);
    const double w = s.mid.empty() ? 0.0 : wasserstein1(g.source(), s.mid);
    return std::pair{w, std::move(s)};
  };
  double lo = 0.0;
  double hi = 1.0;
  auto [w_hi, s_hi] = eval(hi);
  r.t = hi;
  r.w1_to_mid = w_hi;
  r.split = std::move(s_hi);
  while (hi - lo > tolerance) {
    const double t = 0.5 * (lo + hi);
    auto [w, s] = eval(t);
    const bool below = w < target;
    if (std::abs(w - target) < std::abs(r.w1_to_mid - target)) {
      r.t = t;
      r.w1_to_mid = w;
      r.split = std::move(s);
    }
    if (below)
      lo = t;
    else
      hi = t;
  }
  return r;
}

ConsolidatedFlux consolidate_segments(std::size_t dim, const std::vector<std::pair<Point, Point>>& segments,
                                      const std::vector<double>& weights) {
  ConsolidatedFlux f;
  f.dim = dim;
  double scale = 0.0;
  for (double w : weights) scale = std::max(scale, std::abs(w));
  const Arrangement arr(segments);
  for (const auto& piece : arr.pieces()) {
    CompensatedSum s;
    for (const auto& c : piece.covers) s += c.sign * weights[c.input];
    double w = s.value();
    if (std::abs(w) <= 1e-14 * scale) continue;
    Point a = arr.points()[piece.a];
    Point b = arr.points()[piece.b];
    if (w < 0) {
      std::swap(a, b);
      w = -w;
    }
    const Point dir = (b - a) * (1.0 / distance(a, b));
    f.segments.push_back({std::move(a), std::move(b), dir * w});
  }
  return f;
}

ConsolidatedFlux consolidate_flux(const TransportGraph& g) {
  std::vector<std::pair<Point, Point>> segs;
  std::vector<double> weights;
  segs.reserve(g.edges().size());
  for (const Edge& e : g.edges()) {
    segs.emplace_back(g.vertices()[e.tail], g.vertices()[e.head]);
    weights.push_back(e.weight);
  }
  return consolidate_segments(g.dim(), segs, weights);
}

ExtendedReal gilbert_energy(const ConsolidatedFlux& flux, const TransportCost& tau) {
  CompensatedSum s;
  for (const FluxSegment& seg : flux.segments) s += tau(seg.theta.norm()) * distance(seg.a, seg.b);
  return ExtendedReal(s.value()) + marginal_cost(tau, 0.0) * flux.diffuse_mass;
}

}  // namespace ramiflow
