#include "ramiflow/svg.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "ramiflow/errors.hpp"

namespace ramiflow {

namespace {

struct Stroke {
  Point a;
  Point b;
  double weight;  // >= 0
  bool arrow;
};

struct Disc {
  Point at;
  double mass;
  bool source;
};

std::string num(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::fixed, 3);
  std::string s(buf, r.ptr);
  if (s == "-0.000") s = "0.000";
  return s;
}

void check_dim(std::size_t dim, const SvgStyle& style) {
  if (dim != 0 && dim != 2 && !style.project)
    throw Error(ErrorCode::UnsupportedDimension, "SVG output needs planar input; set projection to draw " +
                                                     std::to_string(dim) + "-D data");
}

std::pair<double, double> xy(const Point& p) {
  return {p.dim() > 0 ? p[0] : 0.0, p.dim() > 1 ? p[1] : 0.0};
}

std::string draw(const std::vector<Stroke>& strokes, const std::vector<Disc>& discs, const SvgStyle& style) {
  double x0 = std::numeric_limits<double>::infinity(), y0 = x0;
  double x1 = -x0, y1 = -x0;
  const auto grow = [&](const Point& p) {
    const auto [x, y] = xy(p);
    x0 = std::min(x0, x);
    x1 = std::max(x1, x);
    y0 = std::min(y0, y);
    y1 = std::max(y1, y);
  };
  for (const Stroke& s : strokes) {
    grow(s.a);
    grow(s.b);
  }
  for (const Disc& d : discs) grow(d.at);
  if (x0 > x1) x0 = y0 = -1, x1 = y1 = 1;
  double span = std::max(x1 - x0, y1 - y0);
  if (span <= 0) span = 2;
  const double cx = 0.5 * (x0 + x1), cy = 0.5 * (y0 + y1);
  const double inner = style.size - 2 * style.margin;
  const double k = inner / span;
  const auto map = [&](const Point& p) {
    const auto [x, y] = xy(p);
    return std::pair{style.size / 2 + k * (x - cx), style.size / 2 - k * (y - cy)};
  };

  double wmax = 0.0, mmax = 0.0;
  for (const Stroke& s : strokes) wmax = std::max(wmax, s.weight);
  for (const Disc& d : discs) mmax = std::max(mmax, d.mass);

  std::ostringstream o;
  const std::string sz = num(style.size);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << sz << "\" height=\"" << sz << "\" viewBox=\"0 0 "
    << sz << ' ' << sz << "\">\n";
  o << "<defs><marker id=\"arrow\" viewBox=\"0 0 10 10\" refX=\"10\" refY=\"5\" markerWidth=\"4\" "
       "markerHeight=\"4\" orient=\"auto-start-reverse\"><path d=\"M 0 0 L 10 5 L 0 10 z\" fill=\"#333\"/>"
       "</marker></defs>\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // Axes through the origin when it is in view, else along the frame.
  {
    const auto [ox, oy] = map(Point{0.0, 0.0});
    const double lo = style.margin / 2, hi = style.size - style.margin / 2;
    const double ax = std::clamp(ox, lo, hi), ay = std::clamp(oy, lo, hi);
    o << "<g class=\"axes\" stroke=\"#bbb\" stroke-width=\"1\">";
    o << "<line x1=\"" << num(lo) << "\" y1=\"" << num(ay) << "\" x2=\"" << num(hi) << "\" y2=\"" << num(ay)
      << "\"/>";
    o << "<line x1=\"" << num(ax) << "\" y1=\"" << num(lo) << "\" x2=\"" << num(ax) << "\" y2=\"" << num(hi)
      << "\"/>";
    o << "</g>\n";
  }
  o << "<g class=\"strokes\" stroke=\"#333\" stroke-linecap=\"round\" fill=\"none\">\n";
  for (const Stroke& s : strokes) {
    const auto [ax, ay] = map(s.a);
    const auto [bx, by] = map(s.b);
    const double w = wmax > 0 ? style.max_stroke * s.weight / wmax : 0.0;
    o << "<line class=\"edge\" x1=\"" << num(ax) << "\" y1=\"" << num(ay) << "\" x2=\"" << num(bx) << "\" y2=\""
      << num(by) << "\" stroke-width=\"" << num(w) << "\"";
    if (s.arrow) o << " marker-end=\"url(#arrow)\"";
    o << "/>\n";
  }
  o << "</g>\n<g class=\"atoms\">\n";
  for (const Disc& d : discs) {
    const auto [x, y] = map(d.at);
    const double r = mmax > 0 ? style.max_radius * std::sqrt(d.mass / mmax) : 0.0;
    o << "<circle class=\"" << (d.source ? "source" : "sink") << "\" cx=\"" << num(x) << "\" cy=\"" << num(y)
      << "\" r=\"" << num(r) << "\" fill=\"" << (d.source ? "#c0392b" : "#2c6fbb") << "\" fill-opacity=\"0.7\"/>\n";
  }
  o << "</g>\n</svg>\n";
  return o.str();
}

void add_discs(std::vector<Disc>& discs, const DiscreteMeasure& m, bool source) {
  for (const Atom& a : m.atoms()) discs.push_back({a.position, a.mass, source});
}

}  // namespace

std::string render_svg(const TransportGraph& g, const SvgStyle& style) {
  check_dim(g.dim(), style);
  std::vector<Stroke> strokes;
  for (const Edge& e : g.edges()) strokes.push_back({g.vertices()[e.tail], g.vertices()[e.head], e.weight, true});
  std::vector<Disc> discs;
  add_discs(discs, g.source(), true);
  add_discs(discs, g.sink(), false);
  return draw(strokes, discs, style);
}

std::string render_svg(const IrrigationPlan& plan, const SvgStyle& style) {
  check_dim(plan.dim(), style);
  std::vector<Stroke> strokes;
  for (const DensitySegment& s : flux_density(plan).segments) {
    // Orient along the net flow when there is one.
    const bool backwards = s.theta.dot(s.b - s.a) < 0;
    strokes.push_back({backwards ? s.b : s.a, backwards ? s.a : s.b, s.multiplicity, s.theta.norm() > 0});
  }
  std::vector<Disc> discs;
  add_discs(discs, plan.irrigating(), true);
  add_discs(discs, plan.irrigated(), false);
  return draw(strokes, discs, style);
}

std::string render_svg(const ConsolidatedFlux& flux, const SvgStyle& style) {
  check_dim(flux.dim, style);
  std::vector<Stroke> strokes;
  for (const FluxSegment& s : flux.segments) strokes.push_back({s.a, s.b, s.theta.norm(), true});
  return draw(strokes, {}, style);
}

}  // namespace ramiflow
