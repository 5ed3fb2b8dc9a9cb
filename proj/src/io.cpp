#include "ramiflow/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ramiflow/errors.hpp"

namespace ramiflow::io {

namespace {

[[noreturn]] void fail(const std::string& what) { throw Error(ErrorCode::ParseError, what); }

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) fail(std::string("missing field \"") + key + "\"");
  return j.at(key);
}

std::size_t index_from_json(const Json& j) {
  if (!j.is_number_integer() || j.get<long long>() < 0) fail("expected a nonnegative integer index");
  return j.get<std::size_t>();
}

}  // namespace

std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

double parse_real(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (!j.is_string()) fail("expected a real number or decimal string");
  const std::string s = j.get<std::string>();
  if (s == "inf") return HUGE_VAL;
  if (s == "-inf") return -HUGE_VAL;
  double x = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) fail("malformed decimal string \"" + s + "\"");
  return x;
}

Json parse_text(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // Byte offset to line/column.
    const std::size_t at = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < at; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    fail("malformed JSON at line " + std::to_string(line) + ", column " + std::to_string(col));
  }
}

Json read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_text(ss.str());
  } catch (const Error& e) {
    fail(path + ": " + std::string(e.what()).substr(std::string("ParseError: ").size()));
  }
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
  out << content;
}

Json point_json(const Point& p) {
  Json a = Json::array();
  for (double v : p.coords()) a.push_back(format_real(v));
  return a;
}

Point point_from_json(const Json& j) {
  if (!j.is_array()) fail("expected a coordinate array");
  std::vector<double> c;
  for (const Json& v : j) c.push_back(parse_real(v));
  return Point(std::move(c));
}

Json to_json(const DiscreteMeasure& m) {
  Json atoms = Json::array();
  for (const Atom& a : m.atoms()) atoms.push_back({{"x", point_json(a.position)}, {"m", format_real(a.mass)}});
  return {{"dim", m.dim()}, {"atoms", atoms}};
}

DiscreteMeasure measure_from_json(const Json& j) {
  const Json& atoms = field(j, "atoms");
  if (!atoms.is_array()) fail("\"atoms\" must be an array");
  std::vector<Atom> raw;
  for (const Json& a : atoms) raw.push_back({point_from_json(field(a, "x")), parse_real(field(a, "m"))});
  std::size_t dim = 0;
  if (j.contains("dim"))
    dim = index_from_json(j.at("dim"));
  else if (!raw.empty())
    dim = raw.front().position.dim();
  if (raw.empty()) return DiscreteMeasure();
  return validate_measure(dim, raw);
}

Json to_json(const TransportCost& tau) {
  Json j = std::visit(
      [](const auto& f) -> Json {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, family::Wasserstein>) return {{"family", "wasserstein"}, {"a", format_real(f.a)}};
        if constexpr (std::is_same_v<F, family::Branched>)
          return {{"family", "branched"}, {"alpha", format_real(f.alpha)}};
        if constexpr (std::is_same_v<F, family::Urban>)
          return {{"family", "urban"}, {"a", format_real(f.a)}, {"eps", format_real(f.eps)}};
        if constexpr (std::is_same_v<F, family::Discrete>) return {{"family", "discrete"}};
        if constexpr (std::is_same_v<F, family::Step>)
          return {{"family", "step"}, {"delta", format_real(f.delta)}, {"height", format_real(f.height)}};
        if constexpr (std::is_same_v<F, family::Tabulated>) {
          Json s = Json::array();
          for (const auto& [w, v] : f.knots)
            if (w > 0) s.push_back(Json::array({format_real(w), format_real(v)}));
          return {{"family", "tabulated"}, {"samples", s}};
        }
      },
      tau.family());
  if (tau.mass_scale() != 1.0) j["mass_scale"] = format_real(tau.mass_scale());
  return j;
}

TransportCost cost_from_json(const Json& j) {
  const Json& fam = field(j, "family");
  if (!fam.is_string()) fail("\"family\" must be a string");
  const std::string f = fam.get<std::string>();
  const auto opt = [&](const char* key, double fallback) { return j.contains(key) ? parse_real(j.at(key)) : fallback; };
  TransportCost tau = TransportCost::discrete();
  if (f == "wasserstein") {
    tau = TransportCost::wasserstein(opt("a", 1.0));
  } else if (f == "branched") {
    tau = TransportCost::branched(parse_real(field(j, "alpha")));
  } else if (f == "urban") {
    tau = TransportCost::urban(parse_real(field(j, "a")), parse_real(field(j, "eps")));
  } else if (f == "discrete") {
  } else if (f == "step") {
    const double delta = parse_real(field(j, "delta"));
    tau = TransportCost::step(delta, opt("height", delta));
  } else if (f == "tabulated") {
    std::vector<std::pair<double, double>> samples;
    for (const Json& s : field(j, "samples")) {
      if (!s.is_array() || s.size() != 2) fail("tabulated samples are [w, tau] pairs");
      samples.emplace_back(parse_real(s[0]), parse_real(s[1]));
    }
    tau = TransportCost::tabulated(std::move(samples));
  } else {
    fail("unknown cost family \"" + f + "\"");
  }
  if (j.contains("mass_scale")) tau = tau.with_mass_scale(parse_real(j.at("mass_scale")));
  return tau;
}

Json to_json(const TransportGraph& g, const std::vector<int>* levels) {
  Json vertices = Json::array();
  for (const Point& p : g.vertices()) vertices.push_back(point_json(p));
  Json edges = Json::array();
  for (const Edge& e : g.edges()) edges.push_back({{"t", e.tail}, {"h", e.head}, {"w", format_real(e.weight)}});
  Json j = {{"vertices", vertices}, {"edges", edges}, {"source", to_json(g.source())}, {"sink", to_json(g.sink())}};
  if (levels) j["levels"] = *levels;
  return j;
}

TransportGraph graph_from_json(const Json& j) {
  std::vector<Point> vertices;
  for (const Json& v : field(j, "vertices")) vertices.push_back(point_from_json(v));
  std::vector<Edge> edges;
  for (const Json& e : field(j, "edges"))
    edges.push_back({index_from_json(field(e, "t")), index_from_json(field(e, "h")), parse_real(field(e, "w"))});
  return TransportGraph(std::move(vertices), std::move(edges), measure_from_json(field(j, "source")),
                        measure_from_json(field(j, "sink")));
}

Json to_json(const IrrigationPlan& p) {
  Json paths = Json::array();
  for (const PlanPath& path : p.paths()) {
    Json pts = Json::array();
    for (const Point& x : path.points) pts.push_back(point_json(x));
    paths.push_back({{"pts", pts}, {"w", format_real(path.weight)}});
  }
  return {{"dim", p.dim()}, {"paths", paths}};
}

IrrigationPlan plan_from_json(const Json& j) {
  std::vector<PlanPath> paths;
  for (const Json& p : field(j, "paths")) {
    PlanPath path;
    for (const Json& x : field(p, "pts")) path.points.push_back(point_from_json(x));
    path.weight = parse_real(field(p, "w"));
    paths.push_back(std::move(path));
  }
  std::size_t dim = 0;
  if (j.contains("dim"))
    dim = index_from_json(j.at("dim"));
  else if (!paths.empty() && !paths.front().points.empty())
    dim = paths.front().points.front().dim();
  return IrrigationPlan(dim == 0 ? 2 : dim, std::move(paths));
}

Json to_json(const ConsolidatedFlux& f) {
  Json segs = Json::array();
  for (const FluxSegment& s : f.segments)
    segs.push_back({{"a", point_json(s.a)}, {"b", point_json(s.b)}, {"theta", point_json(s.theta)}});
  return {{"dim", f.dim}, {"segments", segs}, {"diffuse", format_real(f.diffuse_mass)}};
}

}  // namespace ramiflow::io
