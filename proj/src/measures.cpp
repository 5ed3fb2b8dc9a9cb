#include "ramiflow/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "ramiflow/errors.hpp"

namespace ramiflow {

namespace {

std::vector<Atom> merge_atoms(std::size_t dim, const std::vector<Atom>& raw, bool allow_negative,
                              double drop_below) {
  if (dim == 0) throw Error(ErrorCode::InvalidMeasure, "dimension must be >= 1");
  PointIndex index;
  std::vector<CompensatedSum> masses;
  for (const Atom& a : raw) {
    if (a.position.dim() != dim)
      throw Error(ErrorCode::InvalidMeasure, "atom dimension does not match measure dimension");
    if (!a.position.finite()) throw Error(ErrorCode::InvalidMeasure, "non-finite atom coordinate");
    if (!std::isfinite(a.mass)) throw Error(ErrorCode::InvalidMeasure, "non-finite atom mass");
    if (!allow_negative && a.mass < 0) throw Error(ErrorCode::InvalidMeasure, "negative atom mass");
    const std::size_t id = index.insert(a.position);
    if (id == masses.size()) masses.emplace_back();
    masses[id] += a.mass;
  }
  std::vector<Atom> atoms;
  for (std::size_t i = 0; i < masses.size(); ++i) {
    const double m = masses[i].value();
    if (m == 0.0 || std::abs(m) <= drop_below) continue;
    atoms.push_back({index.points()[i], m});
  }
  std::sort(atoms.begin(), atoms.end(),
            [](const Atom& a, const Atom& b) { return a.position < b.position; });
  return atoms;
}

double mass_lookup(const std::vector<Atom>& atoms, const Point& x) {
  for (const Atom& a : atoms)
    if (near(a.position, x)) return a.mass;
  return 0.0;
}

}  // namespace

DiscreteMeasure::DiscreteMeasure(std::size_t dim, std::vector<Atom> atoms)
    : dim_(dim), atoms_(merge_atoms(dim, atoms, false, 0.0)) {}

DiscreteMeasure DiscreteMeasure::dirac(const Point& x, double mass) {
  return DiscreteMeasure(x.dim(), {{x, mass}});
}

double DiscreteMeasure::total_mass() const {
  CompensatedSum s;
  for (const Atom& a : atoms_) s += a.mass;
  return s.value();
}

double DiscreteMeasure::mass_at(const Point& x) const { return mass_lookup(atoms_, x); }

double DiscreteMeasure::support_radius() const {
  double r = 0.0;
  for (const Atom& a : atoms_) r = std::max(r, a.position.max_abs());
  return r;
}

DiscreteMeasure DiscreteMeasure::scaled(double factor) const {
  std::vector<Atom> atoms = atoms_;
  for (Atom& a : atoms) a.mass *= factor;
  return DiscreteMeasure(dim_, std::move(atoms));
}

DiscreteMeasure DiscreteMeasure::pushed_forward(double spatial_factor) const {
  std::vector<Atom> atoms = atoms_;
  for (Atom& a : atoms) a.position *= spatial_factor;
  return DiscreteMeasure(dim_, std::move(atoms));
}

SignedDiscreteMeasure::SignedDiscreteMeasure(std::size_t dim, std::vector<Atom> atoms,
                                             double drop_below)
    : dim_(dim), atoms_(merge_atoms(dim, atoms, true, drop_below)) {}

SignedDiscreteMeasure SignedDiscreteMeasure::difference(const DiscreteMeasure& plus,
                                                        const DiscreteMeasure& minus,
                                                        double drop_below) {
  const std::size_t dim = plus.dim() ? plus.dim() : minus.dim();
  std::vector<Atom> atoms = plus.atoms();
  for (const Atom& a : minus.atoms()) atoms.push_back({a.position, -a.mass});
  return SignedDiscreteMeasure(dim, std::move(atoms), drop_below);
}

double SignedDiscreteMeasure::mass_at(const Point& x) const { return mass_lookup(atoms_, x); }

double SignedDiscreteMeasure::total_variation() const {
  CompensatedSum s;
  for (const Atom& a : atoms_) s += std::abs(a.mass);
  return s.value();
}

double max_abs_difference(const SignedDiscreteMeasure& a, const SignedDiscreteMeasure& b) {
  double worst = 0.0;
  for (const Atom& x : a.atoms()) worst = std::max(worst, std::abs(x.mass - b.mass_at(x.position)));
  for (const Atom& y : b.atoms()) worst = std::max(worst, std::abs(y.mass - a.mass_at(y.position)));
  return worst;
}

DiscreteMeasure validate_measure(std::size_t dim, const std::vector<Atom>& raw) {
  return DiscreteMeasure(dim, raw);
}

void require_equal_mass(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  if (a.dim() != b.dim() && !a.empty() && !b.empty())
    throw Error(ErrorCode::InvalidMeasure, "measures live in different dimensions");
  const double ma = a.total_mass();
  const double mb = b.total_mass();
  if (std::abs(ma - mb) > kMassTolerance * std::max({ma, mb, 1e-300}))
    throw Error(ErrorCode::MassImbalance, "total masses differ: " + std::to_string(ma) + " vs " +
                                              std::to_string(mb));
}

RescaledProblem rescale(const DiscreteMeasure& plus, const DiscreteMeasure& minus,
                        const TransportCost& tau, std::optional<double> scale) {
  require_equal_mass(plus, minus);
  const double m = plus.total_mass();
  if (!(m > 0)) throw Error(ErrorCode::InvalidMeasure, "rescaling needs positive total mass");
  const double radius = std::max(plus.support_radius(), minus.support_radius());
  double s = radius > 0 ? radius : 1.0;
  if (scale) {
    if (!(*scale > 0) || !std::isfinite(*scale))
      throw Error(ErrorCode::InvalidArgument, "scale must be positive");
    if (radius > *scale * (1 + kSnapTolerance))
      throw Error(ErrorCode::OutOfDomain, "support is not contained in [-s,s]^n");
    s = *scale;
  }
  RescaledProblem r{plus.scaled(1.0 / m).pushed_forward(1.0 / s),
                    minus.scaled(1.0 / m).pushed_forward(1.0 / s), tau.with_mass_scale(m), m, s};
  return r;
}

Point DyadicGrid::origin(std::size_t dim) const {
  return center.dim() ? center : Point(dim);
}

bool DyadicGrid::contains(const Point& x) const {
  const Point c = origin(x.dim());
  for (std::size_t i = 0; i < x.dim(); ++i) {
    const double t = (x[i] - c[i]) / scale;
    if (!(t > -2.0 && t <= 2.0)) return false;
  }
  return true;
}

std::vector<std::int64_t> DyadicGrid::cell(const Point& x, int k) const {
  if (k < 0 || k > 52) throw Error(ErrorCode::InvalidArgument, "level out of range");
  const Point c = origin(x.dim());
  std::vector<std::int64_t> idx(x.dim());
  const double cells = std::exp2(k);
  for (std::size_t i = 0; i < x.dim(); ++i) {
    // t in (0, 4]; the cell (j, j+1] of width 4 / 2^k holding t has index j.
    const double t = (x[i] - c[i]) / scale + 2.0;
    if (!(t > 0.0 && t <= 4.0)) throw Error(ErrorCode::OutOfDomain, "point outside (-2,2]^n");
    const double j = std::ceil(t * cells / 4.0) - 1.0;
    idx[i] = static_cast<std::int64_t>(std::clamp(j, 0.0, cells - 1.0));
  }
  return idx;
}

Point DyadicGrid::cell_center(std::span<const std::int64_t> index, int k) const {
  const Point c = origin(index.size());
  const double h = scale * std::exp2(1 - k);
  Point p(index.size());
  for (std::size_t i = 0; i < index.size(); ++i)
    p[i] = c[i] - 2.0 * scale + static_cast<double>(2 * index[i] + 1) * h;
  return p;
}

DiscreteMeasure project_klevel(const DiscreteMeasure& m, int k) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "projection level must be >= 1");
  const DyadicGrid grid;
  std::map<std::vector<std::int64_t>, CompensatedSum> cells;
  for (const Atom& a : m.atoms()) cells[grid.cell(a.position, k)] += a.mass;
  std::vector<Atom> atoms;
  atoms.reserve(cells.size());
  for (const auto& [idx, mass] : cells) atoms.push_back({grid.cell_center(idx, k), mass.value()});
  return DiscreteMeasure(m.dim(), std::move(atoms));
}

OptimalPlan optimal_transport_plan(const DiscreteMeasure& plus, const DiscreteMeasure& minus) {
  require_equal_mass(plus, minus);
  const std::size_t A = plus.size();
  const std::size_t B = minus.size();
  OptimalPlan plan;
  if (A == 0 || B == 0) return plan;

  std::vector<double> supply(A), demand(B);
  for (std::size_t i = 0; i < A; ++i) supply[i] = plus.atoms()[i].mass;
  for (std::size_t j = 0; j < B; ++j) demand[j] = minus.atoms()[j].mass;
  std::vector<double> cost(A * B);
  for (std::size_t i = 0; i < A; ++i)
    for (std::size_t j = 0; j < B; ++j)
      cost[i * B + j] = distance(plus.atoms()[i].position, minus.atoms()[j].position);
  std::vector<double> flow(A * B, 0.0);
  const double eps = 1e-15 * std::max(plus.total_mass(), minus.total_mass());

  // Successive shortest paths with node potentials. Nodes 0..A-1 are sources,
  // A..A+B-1 sinks, then a super source S and super sink T. Residual arcs:
  // S->i (remaining supply), i->j (always), j->i (flow),
  // j->T (remaining demand). Arcs back into S or out of T never lie on a
  // shortest S-T path and are omitted.
  const std::size_t S = A + B;
  const std::size_t T = A + B + 1;
  const std::size_t V = A + B + 2;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> potential(V, 0.0), dist(V);
  std::vector<std::size_t> parent(V);
  std::vector<char> done(V);
  const auto relax = [&](std::size_t u, std::size_t v, double c) {
    if (done[v]) return;
    const double nd = dist[u] + c + potential[u] - potential[v];
    if (nd < dist[v]) {
      dist[v] = nd;
      parent[v] = u;
    }
  };
  for (;;) {
    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(done.begin(), done.end(), 0);
    dist[S] = 0.0;
    for (;;) {
      std::size_t u = V;
      for (std::size_t v = 0; v < V; ++v)
        if (!done[v] && dist[v] < kInf && (u == V || dist[v] < dist[u])) u = v;
      if (u == V) break;
      done[u] = 1;
      if (u == T) break;
      if (u == S) {
        for (std::size_t i = 0; i < A; ++i)
          if (supply[i] > eps) relax(u, i, 0.0);
      } else if (u < A) {
        for (std::size_t j = 0; j < B; ++j) relax(u, A + j, cost[u * B + j]);
      } else {
        const std::size_t j = u - A;
        for (std::size_t i = 0; i < A; ++i)
          if (flow[i * B + j] > eps) relax(u, i, -cost[i * B + j]);
        if (demand[j] > eps) relax(u, T, 0.0);
      }
    }
    if (dist[T] == kInf) break;
    const double cap = dist[T];
    for (std::size_t v = 0; v < V; ++v) potential[v] += std::min(dist[v], cap);

    // Bottleneck along T <- ... <- S.
    double push = kInf;
    for (std::size_t v = T; v != S; v = parent[v]) {
      const std::size_t u = parent[v];
      if (u == S) push = std::min(push, supply[v]);
      else if (v == T) push = std::min(push, demand[u - A]);
      else if (u >= A && v < A) push = std::min(push, flow[v * B + (u - A)]);
    }
    for (std::size_t v = T; v != S; v = parent[v]) {
      const std::size_t u = parent[v];
      if (u == S) supply[v] -= push;
      else if (v == T) demand[u - A] -= push;
      else if (u < A && v >= A) flow[u * B + (v - A)] += push;
      else flow[v * B + (u - A)] -= push;
    }
  }

  CompensatedSum total;
  for (std::size_t i = 0; i < A; ++i)
    for (std::size_t j = 0; j < B; ++j) {
      const double f = flow[i * B + j];
      if (f > eps) {
        plan.entries.push_back({i, j, f});
        total += f * cost[i * B + j];
      }
    }
  plan.cost = total.value();
  return plan;
}

double wasserstein1(const DiscreteMeasure& plus, const DiscreteMeasure& minus) {
  // Fixed argument order so that W1(a, b) and W1(b, a) round identically.
  const auto less = [](const Atom& x, const Atom& y) {
    return x.position != y.position ? x.position < y.position : x.mass < y.mass;
  };
  if (std::lexicographical_compare(minus.atoms().begin(), minus.atoms().end(), plus.atoms().begin(),
                                   plus.atoms().end(), less))
    return optimal_transport_plan(minus, plus).cost;
  return optimal_transport_plan(plus, minus).cost;
}

}  // namespace ramiflow
