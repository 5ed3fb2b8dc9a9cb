#include "ramiflow/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <thread>
#include <tuple>

#include "ramiflow/errors.hpp"
#include "ramiflow/hierarchy.hpp"

namespace ramiflow {

void OptimizerConfig::validate() const {
  if (restarts < 1 || max_rounds < 1 || descent_sweeps < 1)
    throw Error(ErrorCode::InvalidArgument, "optimizer caps must be positive");
  if (!(step_tolerance > 0) || !(merge_radius > 0))
    throw Error(ErrorCode::InvalidArgument, "optimizer tolerances must be positive");
}

namespace {

constexpr double kHysteresis = 1e-12;

bool improves(double candidate, double current) { return candidate < current - kHysteresis * std::abs(current); }

// Signed flow f on (u, v): f > 0 moves mass from u to v.
struct NetEdge {
  std::size_t u;
  std::size_t v;
  double f;
};

struct Net {
  std::vector<Point> pos;
  std::vector<char> fixed;
  std::vector<double> div;  // prescribed net outflow; zero at free vertices
  std::vector<NetEdge> edges;

  std::size_t add_vertex(const Point& p, bool is_fixed, double d) {
    pos.push_back(p);
    fixed.push_back(is_fixed);
    div.push_back(d);
    return pos.size() - 1;
  }
};

struct Context {
  const TransportCost& tau;
  double mass = 0.0;
  double diameter = 1.0;
  double flow_eps = 0.0;
  std::vector<double> snaps;  // 0 and the jumps of tau
  bool concave = true;
  OptimizerConfig config;
};

double snap_flow(const Context& cx, double f) {
  const double a = std::abs(f);
  for (double q : cx.snaps)
    if (std::abs(a - q) <= 1e-12 * cx.mass) return f < 0 ? -q : q;
  return f;
}

double edge_cost(const Context& cx, const Net& n, const NetEdge& e) {
  return cx.tau(std::abs(e.f)) * distance(n.pos[e.u], n.pos[e.v]);
}

double net_cost(const Context& cx, const Net& n) {
  CompensatedSum s;
  for (const NetEdge& e : n.edges) s += edge_cost(cx, n, e);
  return s.value();
}

std::vector<std::vector<std::size_t>> incidence(const Net& n) {
  std::vector<std::vector<std::size_t>> inc(n.pos.size());
  for (std::size_t i = 0; i < n.edges.size(); ++i) {
    inc[n.edges[i].u].push_back(i);
    inc[n.edges[i].v].push_back(i);
  }
  return inc;
}

std::size_t other(const NetEdge& e, std::size_t x) { return e.u == x ? e.v : e.u; }

// Flow leaving x along e.
double outflow(const NetEdge& e, std::size_t x) { return e.u == x ? e.f : -e.f; }

// Drops empty edges, merges parallel edges, splices out free vertices of
// degree <= 2 and removes isolated free vertices. Never increases the cost.
void normalize(const Context& cx, Net& n) {
  for (bool changed = true; changed;) {
    changed = false;
    std::map<std::pair<std::size_t, std::size_t>, double> merged;
    for (const NetEdge& e : n.edges) {
      if (e.u == e.v) continue;
      const auto key = std::minmax(e.u, e.v);
      merged[{key.first, key.second}] += e.u < e.v ? e.f : -e.f;
    }
    n.edges.clear();
    for (const auto& [key, f] : merged)
      if (std::abs(f) > cx.flow_eps) n.edges.push_back({key.first, key.second, snap_flow(cx, f)});

    const auto inc = incidence(n);
    std::vector<char> dead(n.pos.size(), 0);
    std::vector<char> dead_edge(n.edges.size(), 0);
    for (std::size_t x = 0; x < n.pos.size(); ++x) {
      if (n.fixed[x]) continue;
      std::vector<std::size_t> live;
      for (std::size_t e : inc[x])
        if (!dead_edge[e]) live.push_back(e);
      if (live.size() > 2) continue;
      if (live.size() == 2) {
        const NetEdge a = n.edges[live[0]];
        const NetEdge b = n.edges[live[1]];
        const std::size_t p = other(a, x);
        const std::size_t q = other(b, x);
        if (dead[p] || dead[q]) continue;
        // Flow arriving at x from p continues to q.
        const double through = -outflow(a, x);
        dead_edge[live[0]] = dead_edge[live[1]] = 1;
        if (p != q) n.edges.push_back({p, q, through});
      } else {
        for (std::size_t e : live) dead_edge[e] = 1;
      }
      dead[x] = 1;
      changed = true;
      break;  // incidence is stale after a splice
    }
    if (!changed) break;
    std::vector<std::size_t> remap(n.pos.size());
    Net m;
    for (std::size_t x = 0; x < n.pos.size(); ++x)
      if (!dead[x]) remap[x] = m.add_vertex(n.pos[x], n.fixed[x], n.div[x]);
    for (std::size_t i = 0; i < n.edges.size(); ++i)
      if (i >= dead_edge.size() || !dead_edge[i]) {
        const NetEdge& e = n.edges[i];
        m.edges.push_back({remap[e.u], remap[e.v], e.f});
      }
    n = std::move(m);
  }
}

// One Weiszfeld update of a free vertex against its neighbours, with the
// optimality test at coinciding neighbours. Returns the new position.
Point fermat_step(const Context& cx, const Net& n, std::size_t x, const std::vector<std::size_t>& inc) {
  const Point& s = n.pos[x];
  const double tiny = 1e-15 * cx.diameter;
  std::vector<std::pair<Point, double>> nb;
  for (std::size_t e : inc) {
    const double c = cx.tau(std::abs(n.edges[e].f));
    if (c > 0) nb.emplace_back(n.pos[other(n.edges[e], x)], c);
  }
  if (nb.empty()) return s;
  // Neighbour at the current position: stay if it is optimal, else step off.
  double c_here = 0.0;
  Point pull(s.dim());
  for (const auto& [p, c] : nb) {
    const double d = distance(p, s);
    if (d <= tiny)
      c_here += c;
    else
      pull += (p - s) * (c / d);
  }
  if (c_here > 0) {
    const double r = pull.norm();
    if (r <= c_here) return s;
    // Step along the pull, sized so the linearization stays valid.
    double dmin = std::numeric_limits<double>::infinity();
    for (const auto& [p, c] : nb)
      if (distance(p, s) > tiny) dmin = std::min(dmin, distance(p, s));
    return s + pull * (0.5 * dmin * (r - c_here) / (r * (r + c_here)));
  }
  Point num(s.dim());
  double den = 0.0;
  for (const auto& [p, c] : nb) {
    const double w = c / distance(p, s);
    num += p * w;
    den += w;
  }
  return num * (1.0 / den);
}

// Checks each neighbour of a free vertex for optimality of the weighted
// Fermat-Weber problem; returns the optimal neighbour if there is one.
std::optional<Point> optimal_neighbour(const Context& cx, const Net& n, std::size_t x,
                                       const std::vector<std::size_t>& inc) {
  std::vector<std::pair<Point, double>> nb;
  for (std::size_t e : inc) {
    const double c = cx.tau(std::abs(n.edges[e].f));
    if (c > 0) nb.emplace_back(n.pos[other(n.edges[e], x)], c);
  }
  for (const auto& [q, cq] : nb) {
    double here = 0.0;
    Point pull(q.dim());
    for (const auto& [p, c] : nb) {
      const double d = distance(p, q);
      if (d <= 1e-15 * cx.diameter)
        here += c;
      else
        pull += (p - q) * (c / d);
    }
    if (pull.norm() <= here) return q;
  }
  return std::nullopt;
}

// Gauss-Seidel Weiszfeld over the free vertices (or only `only`).
void descend(const Context& cx, Net& n, int sweeps, std::optional<std::size_t> only = std::nullopt) {
  if (!cx.config.position_descent) return;
  const auto inc = incidence(n);
  const double tol = cx.config.step_tolerance * cx.diameter;
  std::vector<std::size_t> free;
  for (std::size_t x = 0; x < n.pos.size(); ++x)
    if (!n.fixed[x] && (!only || *only == x)) free.push_back(x);
  if (free.empty()) return;
  for (std::size_t x : free)
    if (const auto q = optimal_neighbour(cx, n, x, inc[x])) n.pos[x] = *q;
  for (int it = 0; it < sweeps; ++it) {
    double moved = 0.0;
    for (std::size_t x : free) {
      const Point next = fermat_step(cx, n, x, inc[x]);
      moved = std::max(moved, distance(next, n.pos[x]));
      n.pos[x] = next;
    }
    if (moved <= tol) break;
    // Periodically jump to a neighbour that has become optimal; Weiszfeld
    // approaches such points only sublinearly.
    if (it % 16 == 15)
      for (std::size_t x : free)
        if (const auto q = optimal_neighbour(cx, n, x, inc[x])) n.pos[x] = *q;
  }
}

void settle(const Context& cx, Net& n) {
  normalize(cx, n);
  descend(cx, n, cx.config.descent_sweeps);
  normalize(cx, n);
}

// Undirected path from a to b avoiding edge `skip`, as (edge, +1 if traversed
// from u to v). Empty if b is unreachable.
std::vector<std::pair<std::size_t, int>> tree_path(const Net& n, const std::vector<std::vector<std::size_t>>& inc,
                                                   std::size_t a, std::size_t b, std::size_t skip) {
  std::vector<std::size_t> via(n.pos.size(), SIZE_MAX);
  std::vector<char> seen(n.pos.size(), 0);
  std::vector<std::size_t> queue{a};
  seen[a] = 1;
  for (std::size_t h = 0; h < queue.size() && !seen[b]; ++h) {
    const std::size_t x = queue[h];
    for (std::size_t e : inc[x]) {
      if (e == skip) continue;
      const std::size_t y = other(n.edges[e], x);
      if (seen[y]) continue;
      seen[y] = 1;
      via[y] = e;
      queue.push_back(y);
    }
  }
  std::vector<std::pair<std::size_t, int>> path;
  if (!seen[b]) return path;
  for (std::size_t y = b; y != a;) {
    const NetEdge& e = n.edges[via[y]];
    const std::size_t x = other(e, y);
    path.emplace_back(via[y], e.u == x ? 1 : -1);
    y = x;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

// Exact minimization of the cost along a cycle over the shift lambda: the
// cost is piecewise concave and lower semicontinuous in lambda, so the
// minimum sits at a point where some flow crosses zero or a jump of tau.
bool shift_cycle(const Context& cx, Net& n, const std::vector<std::pair<std::size_t, int>>& cycle) {
  std::vector<double> len(cycle.size());
  for (std::size_t i = 0; i < cycle.size(); ++i) {
    const NetEdge& e = n.edges[cycle[i].first];
    len[i] = distance(n.pos[e.u], n.pos[e.v]);
  }
  const auto eval = [&](double lambda) {
    CompensatedSum s;
    for (std::size_t i = 0; i < cycle.size(); ++i) {
      const double f = snap_flow(cx, n.edges[cycle[i].first].f + cycle[i].second * lambda);
      s += cx.tau(std::abs(f)) * len[i];
    }
    return s.value();
  };
  std::vector<double> cand;
  for (const auto& [e, sign] : cycle) {
    const double f = n.edges[e].f;
    for (double q : cx.snaps) {
      cand.push_back(sign * (q - f));
      cand.push_back(sign * (-q - f));
    }
  }
  const double base = eval(0.0);
  double best = base;
  double best_lambda = 0.0;
  for (double lambda : cand) {
    if (lambda == 0.0) continue;
    const double c = eval(lambda);
    if (improves(c, best) || (c == best && best_lambda != 0.0 && std::abs(lambda) < std::abs(best_lambda))) {
      best = c;
      best_lambda = lambda;
    }
  }
  if (best_lambda == 0.0 || !improves(best, base)) return false;
  for (const auto& [e, sign] : cycle) n.edges[e].f = snap_flow(cx, n.edges[e].f + sign * best_lambda);
  return true;
}

// Shifts along every fundamental cycle.
bool cycle_pass(const Context& cx, Net& n) {
  bool any = false;
  for (std::size_t e = 0; e < n.edges.size(); ++e) {
    const auto inc = incidence(n);
    auto path = tree_path(n, inc, n.edges[e].v, n.edges[e].u, e);
    if (path.empty()) continue;
    path.emplace_back(e, 1);
    if (shift_cycle(cx, n, path)) {
      settle(cx, n);
      any = true;
      e = SIZE_MAX;  // restart; edge indices changed
      if (n.edges.empty()) break;
    }
  }
  return any;
}

// Zero-flow connectors that close a loop (one edge inside a component, two
// between components), each followed by an exact shift. Loops only pay off
// for non-concave costs.
bool connector_pass(const Context& cx, Net& n) {
  const std::size_t nv = n.pos.size();
  if (cx.concave || nv > 16) return false;
  const double before = net_cost(cx, n);
  const auto inc = incidence(n);
  std::set<std::pair<std::size_t, std::size_t>> adjacent;
  for (const NetEdge& e : n.edges) adjacent.insert(std::minmax(e.u, e.v));
  std::vector<std::size_t> comp(nv, SIZE_MAX);
  for (std::size_t s = 0; s < nv; ++s) {
    if (comp[s] != SIZE_MAX) continue;
    std::vector<std::size_t> stack{s};
    comp[s] = s;
    while (!stack.empty()) {
      const std::size_t x = stack.back();
      stack.pop_back();
      for (std::size_t e : inc[x])
        if (const std::size_t y = other(n.edges[e], x); comp[y] == SIZE_MAX) {
          comp[y] = s;
          stack.push_back(y);
        }
    }
  }
  const auto try_with = [&](const std::vector<std::pair<std::size_t, std::size_t>>& links) {
    Net trial = n;
    const std::size_t first = trial.edges.size();
    for (const auto& [a, b] : links) trial.edges.push_back({a, b, 0.0});
    const auto tinc = incidence(trial);
    // Cycle: link 0 (a0 -> b0), path b0 ~> a1 (or a0), optional link 1 reversed, path back.
    std::vector<std::pair<std::size_t, int>> cycle{{first, 1}};
    if (links.size() == 1) {
      const auto p = tree_path(trial, tinc, links[0].second, links[0].first, first);
      if (p.empty()) return false;
      cycle.insert(cycle.end(), p.begin(), p.end());
    } else {
      const auto p = tree_path(trial, tinc, links[0].second, links[1].second, first);
      const auto q = tree_path(trial, tinc, links[1].first, links[0].first, first + 1);
      if (p.empty() && links[0].second != links[1].second) return false;
      if (q.empty() && links[1].first != links[0].first) return false;
      cycle.insert(cycle.end(), p.begin(), p.end());
      cycle.emplace_back(first + 1, -1);
      cycle.insert(cycle.end(), q.begin(), q.end());
    }
    if (!shift_cycle(cx, trial, cycle)) return false;
    settle(cx, trial);
    if (!improves(net_cost(cx, trial), before)) return false;
    n = std::move(trial);
    return true;
  };
  for (std::size_t a = 0; a < nv; ++a)
    for (std::size_t b = a + 1; b < nv; ++b) {
      if (adjacent.count({a, b})) continue;
      if (comp[a] == comp[b]) {
        if (try_with({{a, b}})) return true;
        continue;
      }
      for (std::size_t c = 0; c < nv; ++c)
        for (std::size_t d = 0; d < nv; ++d) {
          if (comp[c] != comp[a] || comp[d] != comp[b] || (c == a && d == b)) continue;
          if (adjacent.count(std::minmax(c, d))) continue;
          if (try_with({{a, b}, {c, d}})) return true;
        }
    }
  return false;
}

// Pulls two co-directed edges at a vertex apart through a new free vertex.
bool steiner_pass(const Context& cx, Net& n) {
  const double before = net_cost(cx, n);
  const auto inc = incidence(n);
  for (std::size_t x = 0; x < n.pos.size(); ++x)
    for (std::size_t i = 0; i < inc[x].size(); ++i)
      for (std::size_t j = i + 1; j < inc[x].size(); ++j) {
        const std::size_t ei = inc[x][i];
        const std::size_t ej = inc[x][j];
        const double fi = outflow(n.edges[ei], x);
        const double fj = outflow(n.edges[ej], x);
        if ((fi > 0) != (fj > 0)) continue;
        const std::size_t a = other(n.edges[ei], x);
        const std::size_t b = other(n.edges[ej], x);
        Net trial = n;
        const std::size_t s = trial.add_vertex((n.pos[x] + n.pos[a] + n.pos[b]) * (1.0 / 3.0), false, 0.0);
        trial.edges[ei] = {s, a, fi};
        trial.edges[ej] = {s, b, fj};
        trial.edges.push_back({x, s, fi + fj});
        descend(cx, trial, cx.config.descent_sweeps, s);
        if (!improves(net_cost(cx, trial), before)) continue;
        settle(cx, trial);
        if (!improves(net_cost(cx, trial), before)) continue;
        n = std::move(trial);
        return true;
      }
  return false;
}

// Flows of a forest from the prescribed divergences; false if some component
// is unbalanced or the edges contain a loop.
bool forest_flows(const Context& cx, Net& n) {
  const std::size_t nv = n.pos.size();
  if (n.edges.size() >= nv) return false;
  const auto inc = incidence(n);
  std::vector<char> seen(nv, 0);
  std::vector<std::size_t> parent_edge(nv, SIZE_MAX);
  for (std::size_t r = 0; r < nv; ++r) {
    if (seen[r]) continue;
    std::vector<std::size_t> order{r};
    seen[r] = 1;
    for (std::size_t h = 0; h < order.size(); ++h) {
      const std::size_t x = order[h];
      for (std::size_t e : inc[x]) {
        if (e == parent_edge[x]) continue;
        const std::size_t y = other(n.edges[e], x);
        if (seen[y]) return false;
        seen[y] = 1;
        parent_edge[y] = e;
        order.push_back(y);
      }
    }
    std::vector<double> sub(nv, 0.0);
    for (std::size_t h = order.size(); h-- > 0;) {
      const std::size_t x = order[h];
      sub[x] += n.div[x];
      if (x == r) {
        if (std::abs(sub[x]) > 1e-12 * std::max(cx.mass, 1e-300)) return false;
        continue;
      }
      NetEdge& e = n.edges[parent_edge[x]];
      e.f = e.u == x ? sub[x] : -sub[x];
      sub[other(e, x)] += sub[x];
    }
  }
  return true;
}

// Moves a leaf's only edge to another attachment vertex (forests only).
bool reroute_pass(const Context& cx, Net& n) {
  if (n.edges.size() >= n.pos.size()) return false;
  const double before = net_cost(cx, n);
  const auto inc = incidence(n);
  for (std::size_t t = 0; t < n.pos.size(); ++t) {
    if (inc[t].size() != 1) continue;
    const std::size_t e = inc[t][0];
    const std::size_t u = other(n.edges[e], t);
    for (std::size_t w = 0; w < n.pos.size(); ++w) {
      if (w == t || w == u) continue;
      Net trial = n;
      trial.edges[e] = {t, w, 0.0};
      if (!forest_flows(cx, trial)) continue;
      normalize(cx, trial);
      descend(cx, trial, std::min(cx.config.descent_sweeps, 200));
      if (!improves(net_cost(cx, trial), before)) continue;
      settle(cx, trial);
      if (!improves(net_cost(cx, trial), before)) continue;
      n = std::move(trial);
      return true;
    }
  }
  return false;
}

// Contracts a free vertex into a vertex within the merge radius.
bool merge_pass(const Context& cx, Net& n) {
  const double before = net_cost(cx, n);
  const double r = cx.config.merge_radius * cx.diameter;
  for (std::size_t s = 0; s < n.pos.size(); ++s) {
    if (n.fixed[s]) continue;
    for (std::size_t t = 0; t < n.pos.size(); ++t) {
      if (t == s || distance(n.pos[s], n.pos[t]) > r) continue;
      Net trial = n;
      for (NetEdge& e : trial.edges) {
        if (e.u == s) e.u = t;
        if (e.v == s) e.v = t;
      }
      settle(cx, trial);
      if (net_cost(cx, trial) > before * (1 + kHysteresis)) continue;
      n = std::move(trial);
      return true;
    }
  }
  return false;
}

void local_search(const Context& cx, Net& n) {
  settle(cx, n);
  const auto& c = cx.config;
  for (int round = 0; round < c.max_rounds; ++round) {
    bool improved = false;
    if (c.loop_moves) improved = cycle_pass(cx, n) || improved;
    if (c.loop_moves) improved = connector_pass(cx, n) || improved;
    if (c.steiner_moves) improved = steiner_pass(cx, n) || improved;
    if (c.reroute_moves) improved = reroute_pass(cx, n) || improved;
    if (c.merge_moves) improved = merge_pass(cx, n) || improved;
    if (!improved) break;
  }
}

// Random jitter of free vertices and one random co-directed split.
void perturb(const Context& cx, Net& n, std::mt19937_64& rng) {
  std::normal_distribution<double> jitter(0.0, 0.1 * cx.diameter);
  for (std::size_t x = 0; x < n.pos.size(); ++x)
    if (!n.fixed[x])
      for (std::size_t i = 0; i < n.pos[x].dim(); ++i) n.pos[x][i] += jitter(rng);
  const auto inc = incidence(n);
  std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> splits;
  for (std::size_t x = 0; x < n.pos.size(); ++x)
    for (std::size_t i = 0; i < inc[x].size(); ++i)
      for (std::size_t j = i + 1; j < inc[x].size(); ++j)
        if ((outflow(n.edges[inc[x][i]], x) > 0) == (outflow(n.edges[inc[x][j]], x) > 0))
          splits.emplace_back(x, inc[x][i], inc[x][j]);
  if (splits.empty()) return;
  const auto [x, ei, ej] = splits[std::uniform_int_distribution<std::size_t>(0, splits.size() - 1)(rng)];
  const double fi = outflow(n.edges[ei], x);
  const double fj = outflow(n.edges[ej], x);
  const std::size_t a = other(n.edges[ei], x);
  const std::size_t b = other(n.edges[ej], x);
  std::uniform_real_distribution<double> unit(0.1, 0.9);
  const double t = unit(rng);
  const std::size_t s = n.add_vertex(lerp(n.pos[x], (n.pos[a] + n.pos[b]) * 0.5, t), false, 0.0);
  n.edges[ei] = {s, a, fi};
  n.edges[ej] = {s, b, fj};
  n.edges.push_back({x, s, fi + fj});
}

Net from_graph(const TransportGraph& g) {
  Net n;
  for (std::size_t v = 0; v < g.vertices().size(); ++v) {
    const double in = g.source_mass(v);
    const double out = g.sink_mass(v);
    n.add_vertex(g.vertices()[v], in > 0 || out > 0, in - out);
  }
  for (const Edge& e : g.edges()) n.edges.push_back({e.tail, e.head, e.weight});
  return n;
}

TransportGraph to_graph(const Net& n, const DiscreteMeasure& plus, const DiscreteMeasure& minus) {
  PointIndex index;
  std::vector<std::size_t> id(n.pos.size());
  for (const Atom& a : plus.atoms()) index.insert(a.position);
  for (const Atom& a : minus.atoms()) index.insert(a.position);
  for (std::size_t x = 0; x < n.pos.size(); ++x) id[x] = index.insert(n.pos[x]);
  std::vector<Edge> edges;
  for (const NetEdge& e : n.edges) {
    if (id[e.u] == id[e.v] || e.f == 0.0) continue;
    if (e.f > 0)
      edges.push_back({id[e.u], id[e.v], e.f});
    else
      edges.push_back({id[e.v], id[e.u], -e.f});
  }
  return merge_parallel_edges(TransportGraph(index.points(), std::move(edges), plus, minus));
}

}  // namespace

TransportGraph optimal_plan_graph(const DiscreteMeasure& plus, const DiscreteMeasure& minus) {
  const OptimalPlan plan = optimal_transport_plan(plus, minus);
  std::vector<Point> vertices;
  std::vector<Edge> edges;
  for (const Atom& a : plus.atoms()) vertices.push_back(a.position);
  for (const Atom& a : minus.atoms()) vertices.push_back(a.position);
  for (const TransportPlanEntry& e : plan.entries)
    if (e.mass > 0 && !near(plus.atoms()[e.from].position, minus.atoms()[e.to].position))
      edges.push_back({e.from, plus.size() + e.to, e.mass});
  return merge_parallel_edges(TransportGraph(std::move(vertices), std::move(edges), plus, minus));
}

namespace {

TransportGraph star_graph(const DiscreteMeasure& plus, const DiscreteMeasure& minus, const Point& c) {
  std::vector<Point> vertices{c};
  std::vector<Edge> edges;
  const auto diff = SignedDiscreteMeasure::difference(plus, minus);
  for (const Atom& a : diff.atoms()) {
    if (near(a.position, c)) continue;
    vertices.push_back(a.position);
    if (a.mass > 0)
      edges.push_back({vertices.size() - 1, 0, a.mass});
    else
      edges.push_back({0, vertices.size() - 1, -a.mass});
  }
  return TransportGraph(std::move(vertices), std::move(edges), plus, minus);
}

Point barycenter(const DiscreteMeasure& m) {
  Point c(m.dim());
  for (const Atom& a : m.atoms()) c += a.position * a.mass;
  return c * (1.0 / m.total_mass());
}

std::vector<TransportGraph> baselines(const DiscreteMeasure& plus, const DiscreteMeasure& minus) {
  std::vector<TransportGraph> out;
  out.push_back(optimal_plan_graph(plus, minus));
  out.push_back(star_graph(plus, minus, barycenter(plus)));
  const DyadicGrid grid = enclosing_grid(plus, minus);
  out.push_back(star_graph(plus, minus, grid.origin(plus.dim())));
  out.push_back(nadic_witness(plus, minus, 1, grid));
  return out;
}

// Acyclic, and tree-shaped for concave tau.
TransportGraph finish(const TransportGraph& g, const TransportCost& tau) {
  TransportGraph r = remove_cycles(g);
  if (tau.is_concave()) r = tree_reduce(r, tau);
  return r;
}

unsigned worker_count(const OptimizerConfig& c) {
  unsigned n = c.threads ? c.threads : std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("RAMIFLOW_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return std::max(1u, std::min<unsigned>(n, static_cast<unsigned>(c.restarts)));
}

Context make_context(const TransportCost& tau, const DiscreteMeasure& plus, const DiscreteMeasure& minus,
                     const OptimizerConfig& config) {
  Context cx{tau, 0.0, 1.0, 0.0, {}, true, config};
  cx.mass = plus.total_mass();
  cx.flow_eps = 1e-14 * cx.mass;
  cx.concave = tau.is_concave();
  cx.config = config;
  double diam = 0.0;
  std::vector<Point> pts;
  for (const auto* m : {&plus, &minus})
    for (const Atom& a : m->atoms()) pts.push_back(a.position);
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) diam = std::max(diam, distance(pts[i], pts[j]));
  cx.diameter = diam > 0 ? diam : 1.0;
  cx.snaps.push_back(0.0);
  for (double q : tau.nonconcave_points(0.0, 2 * cx.mass + 1e-9)) cx.snaps.push_back(q);
  return cx;
}

}  // namespace

TransportGraph optimize(const DiscreteMeasure& plus, const DiscreteMeasure& minus, const TransportCost& tau,
                        const OptimizerConfig& config) {
  config.validate();
  require_equal_mass(plus, minus);
  if (plus.empty() || SignedDiscreteMeasure::difference(plus, minus, 1e-15 * plus.total_mass()).empty())
    return TransportGraph(plus, minus);
  const Context cx = make_context(tau, plus, minus, config);
  const std::vector<TransportGraph> starts = baselines(plus, minus);

  const int runs = config.restarts;
  std::vector<TransportGraph> results(runs);
  std::vector<double> costs(runs, std::numeric_limits<double>::infinity());
  const auto run = [&](int r) {
    Net n = from_graph(starts[r % starts.size()]);
    if (r >= static_cast<int>(starts.size())) {
      std::mt19937_64 rng(config.seed + static_cast<std::uint64_t>(r));
      perturb(cx, n, rng);
    }
    local_search(cx, n);
    results[r] = finish(to_graph(n, plus, minus), tau);
    costs[r] = graph_cost(results[r], tau).total;
  };
  const unsigned workers = worker_count(config);
  if (workers <= 1) {
    for (int r = 0; r < runs; ++r) run(r);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          for (int r = static_cast<int>(w); r < runs; r += static_cast<int>(workers)) run(r);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  std::size_t best = 0;
  for (std::size_t r = 1; r < results.size(); ++r)
    if (costs[r] < costs[best]) best = r;
  TransportGraph out = results[best];
  double out_cost = costs[best];
  for (const TransportGraph& b : starts) {
    const TransportGraph g = finish(b, tau);
    const double c = graph_cost(g, tau).total;
    if (c < out_cost) {
      out = g;
      out_cost = c;
    }
  }
  return out;
}

namespace {

// Oracle geometry: terminals fixed, free points packed in one vector.
struct Topology {
  std::size_t terminals = 0;
  std::size_t free = 0;
  std::vector<std::pair<std::size_t, std::size_t>> links;
  std::vector<double> flow;  // signed, along links
};

class OracleEval {
 public:
  OracleEval(const TransportCost& tau, std::vector<Point> terminals, std::size_t dim)
      : tau_(tau), terminals_(std::move(terminals)), dim_(dim) {}

  Point at(const Topology& t, const std::vector<double>& x, std::size_t v) const {
    if (v < t.terminals) return terminals_[v];
    std::vector<double> c(x.begin() + (v - t.terminals) * dim_, x.begin() + (v - t.terminals + 1) * dim_);
    return Point(std::move(c));
  }

  double cost(const Topology& t, const std::vector<double>& x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < t.links.size(); ++i)
      if (t.flow[i] != 0.0)
        s += tau_(std::abs(t.flow[i])) * distance(at(t, x, t.links[i].first), at(t, x, t.links[i].second));
    return s;
  }

  // Gradient descent with central differences and Armijo backtracking.
  double descend(const Topology& t, std::vector<double>& x, double scale) const {
    double fx = cost(t, x);
    if (x.empty()) return fx;
    const double h = 1e-7 * scale;
    double step = 0.1 * scale;
    std::vector<double> g(x.size()), y(x.size());
    for (int it = 0; it < 4000; ++it) {
      double gg = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = cost(t, x);
        x[i] = keep - h;
        const double down = cost(t, x);
        x[i] = keep;
        g[i] = (up - down) / (2 * h);
        gg += g[i] * g[i];
      }
      if (gg == 0.0) break;
      bool moved = false;
      for (double a = step / std::sqrt(gg); a * std::sqrt(gg) > 1e-15 * scale; a *= 0.5) {
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] - a * g[i];
        const double fy = cost(t, y);
        if (fy <= fx - 1e-4 * a * gg) {
          x.swap(y);
          fx = fy;
          step = 2 * a * std::sqrt(gg);
          moved = true;
          break;
        }
      }
      if (!moved) break;
    }
    return fx;
  }

 private:
  const TransportCost& tau_;
  std::vector<Point> terminals_;
  std::size_t dim_;
};

// Tree flows from divergences, rooted at vertex 0.
std::vector<double> tree_flows(std::size_t nv, const std::vector<std::pair<std::size_t, std::size_t>>& links,
                               const std::vector<double>& div) {
  std::vector<std::vector<std::size_t>> inc(nv);
  for (std::size_t i = 0; i < links.size(); ++i) {
    inc[links[i].first].push_back(i);
    inc[links[i].second].push_back(i);
  }
  std::vector<std::size_t> order{0}, up(nv, SIZE_MAX);
  std::vector<char> seen(nv, 0);
  seen[0] = 1;
  for (std::size_t h = 0; h < order.size(); ++h)
    for (std::size_t e : inc[order[h]]) {
      const std::size_t y = links[e].first == order[h] ? links[e].second : links[e].first;
      if (seen[y]) continue;
      seen[y] = 1;
      up[y] = e;
      order.push_back(y);
    }
  std::vector<double> sub(div.begin(), div.end()), flow(links.size(), 0.0);
  sub.resize(nv, 0.0);
  for (std::size_t h = order.size(); h-- > 1;) {
    const std::size_t x = order[h];
    const auto [a, b] = links[up[x]];
    flow[up[x]] = a == x ? sub[x] : -sub[x];
    sub[a == x ? b : a] += sub[x];
  }
  return flow;
}

std::vector<std::pair<std::size_t, std::size_t>> pruefer_tree(const std::vector<std::size_t>& seq, std::size_t n) {
  std::vector<std::size_t> degree(n, 1);
  for (std::size_t s : seq) ++degree[s];
  std::vector<std::pair<std::size_t, std::size_t>> links;
  for (std::size_t s : seq)
    for (std::size_t leaf = 0; leaf < n; ++leaf)
      if (degree[leaf] == 1) {
        links.emplace_back(leaf, s);
        --degree[leaf];
        --degree[s];
        break;
      }
  std::size_t a = SIZE_MAX;
  for (std::size_t v = 0; v < n; ++v)
    if (degree[v] == 1) {
      if (a == SIZE_MAX)
        a = v;
      else
        links.emplace_back(a, v);
    }
  return links;
}

// Undirected cycle through the extra link (last) as (link, sign) pairs.
std::vector<std::pair<std::size_t, int>> unique_cycle(std::size_t nv,
                                                      const std::vector<std::pair<std::size_t, std::size_t>>& links) {
  const std::size_t extra = links.size() - 1;
  const auto [s, t] = links[extra];
  std::vector<std::size_t> via(nv, SIZE_MAX);
  std::vector<char> seen(nv, 0);
  std::vector<std::size_t> queue{t};
  seen[t] = 1;
  for (std::size_t h = 0; h < queue.size(); ++h)
    for (std::size_t e = 0; e < extra; ++e) {
      const auto [a, b] = links[e];
      const std::size_t x = queue[h];
      if (a != x && b != x) continue;
      const std::size_t y = a == x ? b : a;
      if (seen[y]) continue;
      seen[y] = 1;
      via[y] = e;
      queue.push_back(y);
    }
  std::vector<std::pair<std::size_t, int>> cycle{{extra, 1}};
  std::vector<std::pair<std::size_t, int>> back;
  for (std::size_t y = s; y != t;) {
    const auto [a, b] = links[via[y]];
    const std::size_t x = a == y ? b : a;
    back.emplace_back(via[y], a == x ? 1 : -1);
    y = x;
  }
  cycle.insert(cycle.end(), back.rbegin(), back.rend());
  return cycle;
}

}  // namespace

OracleResult brute_force_oracle(const DiscreteMeasure& plus, const DiscreteMeasure& minus,
                                const TransportCost& tau, int max_steiner) {
  require_equal_mass(plus, minus);
  if (max_steiner < 0) throw Error(ErrorCode::InvalidArgument, "max_steiner must be >= 0");
  if (max_steiner > 2 || plus.size() + minus.size() > 5)
    throw Error(ErrorCode::TooLarge, "oracle limited to 5 atoms and 2 free vertices");
  OracleResult result;
  result.graph = TransportGraph(plus, minus);
  const auto diff = SignedDiscreteMeasure::difference(plus, minus, 1e-15 * plus.total_mass());
  if (diff.atoms().size() < 2) return result;

  const std::size_t dim = plus.dim();
  std::vector<Point> terminals;
  std::vector<double> div;
  for (const Atom& a : diff.atoms()) {
    terminals.push_back(a.position);
    div.push_back(a.mass);
  }
  const std::size_t nt = terminals.size();
  double scale = 0.0;
  Point lo = terminals[0], hi = terminals[0];
  for (const Point& p : terminals)
    for (std::size_t i = 0; i < dim; ++i) {
      lo[i] = std::min(lo[i], p[i]);
      hi[i] = std::max(hi[i], p[i]);
    }
  scale = std::max(distance(lo, hi), 1e-300);
  Point centroid(dim);
  for (const Point& p : terminals) centroid += p * (1.0 / nt);

  const OracleEval eval(tau, terminals, dim);
  std::mt19937_64 rng(0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> jumps{0.0};
  for (double q : tau.nonconcave_points(0.0, 2 * plus.total_mass() + 1e-9)) jumps.push_back(q);

  double best = std::numeric_limits<double>::infinity();
  Topology best_t;
  std::vector<double> best_x;

  const auto optimize_geometry = [&](Topology& t) {
    std::vector<std::vector<double>> starts;
    std::vector<double> c;
    for (std::size_t k = 0; k < t.free; ++k)
      for (std::size_t i = 0; i < dim; ++i) c.push_back(centroid[i]);
    starts.push_back(c);
    for (int r = 0; r < 3 && t.free > 0; ++r) {
      std::vector<double> x;
      for (std::size_t k = 0; k < t.free; ++k)
        for (std::size_t i = 0; i < dim; ++i) x.push_back(lo[i] + (hi[i] - lo[i]) * unit(rng));
      starts.push_back(x);
    }
    for (auto& x : starts) {
      const double f = eval.descend(t, x, scale);
      if (f < best) {
        best = f;
        best_t = t;
        best_x = x;
      }
    }
    ++result.topologies;
  };

  // Exact loop shift alternated with geometric descent.
  const auto optimize_loop = [&](Topology& t, const std::vector<std::pair<std::size_t, int>>& cycle) {
    std::vector<double> x;
    for (std::size_t k = 0; k < t.free; ++k)
      for (std::size_t i = 0; i < dim; ++i) x.push_back(centroid[i]);
    double fx = eval.descend(t, x, scale);
    for (int round = 0; round < 4; ++round) {
      double shift = 0.0;
      double fbest = fx;
      std::vector<double> cand;
      for (const auto& [e, sign] : cycle)
        for (double q : jumps) {
          cand.push_back(sign * (q - t.flow[e]));
          cand.push_back(sign * (-q - t.flow[e]));
        }
      for (double lambda : cand) {
        Topology u = t;
        for (const auto& [e, sign] : cycle) {
          u.flow[e] += sign * lambda;
          for (double q : jumps)
            if (std::abs(std::abs(u.flow[e]) - q) <= 1e-12) u.flow[e] = u.flow[e] < 0 ? -q : q;
        }
        const double f = eval.cost(u, x);
        if (f < fbest - 1e-15) {
          fbest = f;
          shift = lambda;
        }
      }
      if (shift == 0.0) break;
      for (const auto& [e, sign] : cycle) {
        t.flow[e] += sign * shift;
        for (double q : jumps)
          if (std::abs(std::abs(t.flow[e]) - q) <= 1e-12) t.flow[e] = t.flow[e] < 0 ? -q : q;
      }
      fx = eval.descend(t, x, scale);
    }
    if (fx < best) {
      best = fx;
      best_t = t;
      best_x = x;
    }
    ++result.topologies;
  };

  std::set<std::vector<std::pair<std::size_t, std::size_t>>> loops_seen;
  for (std::size_t k = 0; k <= static_cast<std::size_t>(max_steiner); ++k) {
    const std::size_t nv = nt + k;
    std::vector<double> d(div);
    d.resize(nv, 0.0);
    const std::size_t len = nv - 2;
    std::vector<std::size_t> seq(len, 0);
    for (;;) {
      std::vector<std::size_t> count(nv, 0);
      for (std::size_t s : seq) ++count[s];
      // Free vertices need degree >= 3 (>= 2 before an extra loop link).
      bool tree_ok = true, loop_ok = true;
      for (std::size_t v = nt; v < nv; ++v) {
        tree_ok = tree_ok && count[v] >= 2;
        loop_ok = loop_ok && count[v] >= 1;
      }
      if (tree_ok || (!tau.is_concave() && loop_ok)) {
        Topology t;
        t.terminals = nt;
        t.free = k;
        t.links = pruefer_tree(seq, nv);
        t.flow = tree_flows(nv, t.links, d);
        if (tree_ok) optimize_geometry(t);
        if (!tau.is_concave()) {
          std::set<std::pair<std::size_t, std::size_t>> present;
          for (const auto& [a, b] : t.links) present.insert(std::minmax(a, b));
          for (std::size_t a = 0; a < nv; ++a)
            for (std::size_t b = a + 1; b < nv; ++b) {
              if (present.count({a, b})) continue;
              std::vector<std::size_t> deg(nv, 0);
              for (const auto& [p, q] : t.links) ++deg[p], ++deg[q];
              ++deg[a];
              ++deg[b];
              bool ok = true;
              for (std::size_t v = nt; v < nv; ++v) ok = ok && deg[v] >= 3;
              if (!ok) continue;
              Topology u = t;
              u.links.emplace_back(a, b);
              u.flow.push_back(0.0);
              auto key = u.links;
              for (auto& l : key)
                if (l.first > l.second) std::swap(l.first, l.second);
              std::sort(key.begin(), key.end());
              if (!loops_seen.insert(key).second) continue;
              optimize_loop(u, unique_cycle(nv, u.links));
            }
        }
      }
      std::size_t i = 0;
      while (i < len && ++seq[i] == nv) seq[i++] = 0;
      if (i == len) break;
    }
  }

  // Materialize the best topology.
  Net n;
  for (std::size_t v = 0; v < nt + best_t.free; ++v)
    n.add_vertex(eval.at(best_t, best_x, v), v < nt, v < nt ? div[v] : 0.0);
  for (std::size_t i = 0; i < best_t.links.size(); ++i)
    n.edges.push_back({best_t.links[i].first, best_t.links[i].second, best_t.flow[i]});
  result.graph = to_graph(n, plus, minus);
  result.cost = graph_cost(result.graph, tau).total;
  return result;
}

}  // namespace ramiflow
