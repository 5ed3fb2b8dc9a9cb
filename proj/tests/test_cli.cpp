#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "ramiflow/cli.hpp"
#include "ramiflow/errors.hpp"
#include "ramiflow/hierarchy.hpp"
#include "ramiflow/io.hpp"
#include "ramiflow/svg.hpp"
#include "testing.hpp"

using namespace ramiflow;
using ramiflow::io::Json;
using ramiflow::testing::P;

namespace {

struct Outcome {
  int status;
  std::string out;
  std::string err;
  Json json() const { return Json::parse(out); }
};

Outcome run_task(const std::string& task, Json params, std::uint64_t seed = 0) {
  ExperimentConfig c;
  c.task = task;
  c.params = std::move(params);
  c.seed = seed;
  std::ostringstream out, err;
  const int s = run(c, out, err);
  return {s, out.str(), err.str()};
}

double real(const Json& j) { return io::parse_real(j); }

std::vector<double> stroke_widths(const std::string& svg) {
  std::vector<double> w;
  const std::regex re("class=\"edge\"[^>]*stroke-width=\"([0-9.]+)\"");
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), re); it != std::sregex_iterator(); ++it)
    w.push_back(std::stod((*it)[1]));
  return w;
}

}  // namespace

TEST(Io, RealsRoundTrip) {
  for (double x : {0.1, 1.0 / 3, 4.2, 1e-300, -2.5e17}) EXPECT_EQ(io::parse_real(io::format_real(x)), x);
  EXPECT_EQ(io::parse_real(Json(0.25)), 0.25);
  EXPECT_ERROR_CODE(io::parse_real(Json("0.2x")), ErrorCode::ParseError);
}

TEST(Io, ParseErrorHasLineAndColumn) {
  try {
    io::parse_text("{\n  \"a\": 1,\n  \"b\": ]\n}");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_NE(std::string(e.what()).find("line 3, column 8"), std::string::npos) << e.what();
  }
}

TEST(Io, GraphRoundTrip) {
  const auto g = ramiflow::testing::counterexample_g3();
  const auto back = io::graph_from_json(io::parse_text(io::to_json(g).dump()));
  EXPECT_EQ(back.vertices(), g.vertices());
  EXPECT_EQ(back.source(), g.source());
  EXPECT_EQ(back.sink(), g.sink());
  ASSERT_EQ(back.edges().size(), g.edges().size());
  for (std::size_t i = 0; i < g.edges().size(); ++i) EXPECT_EQ(back.edges()[i].weight, g.edges()[i].weight);
}

TEST(Io, CostRoundTrip) {
  for (const auto& tau : {TransportCost::branched(0.75), TransportCost::step(0.3), TransportCost::step(0.45, 1.0),
                          TransportCost::urban(2, 0.1), TransportCost::wasserstein(1.5), TransportCost::discrete(),
                          TransportCost::tabulated({{0.25, 0.3}, {0.5, 0.35}, {1, 1}}),
                          TransportCost::branched(0.5).with_mass_scale(3)}) {
    const auto back = io::cost_from_json(io::to_json(tau));
    for (double w : {0.0, 0.1, 0.3, 0.45, 0.9, 2.0}) EXPECT_EQ(back(w), tau(w)) << tau.describe();
  }
  EXPECT_ERROR_CODE(io::cost_from_json(Json{{"family", "cubic"}}), ErrorCode::ParseError);
}

TEST(Io, PlanRoundTrip) {
  const IrrigationPlan p(2, {{{P(0, 0), P(1, 0), P(1, 1)}, 0.4}, {{P(0.5, 0.5)}, 0.6}});
  const auto back = io::plan_from_json(io::to_json(p));
  ASSERT_EQ(back.paths().size(), 2u);
  EXPECT_EQ(back.paths()[0].points, p.paths()[0].points);
  EXPECT_EQ(back.paths()[1].weight, 0.6);
}

TEST(Cli, CostOfSingleEdge) {
  const TransportGraph g({P(0, 0), P(3, 4)}, {{0, 1, 1.0}}, DiscreteMeasure::dirac(P(0, 0)),
                         DiscreteMeasure::dirac(P(3, 4)));
  const auto r = run_task("cost", {{"graph", io::to_json(g)}, {"cost", {{"family", "branched"}, {"alpha", 0.5}}}});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(real(r.json()["cost"]["total"]), 5.0);
}

TEST(Cli, ReproNontree) {
  const auto r = run_task("repro", {{"name", "nontree"}});
  ASSERT_EQ(r.status, 0) << r.err;
  const Json j = r.json();
  EXPECT_NEAR(real(j["cost_G1"]), 4.5, 1e-12);
  EXPECT_NEAR(real(j["cost_G3"]), 4.2, 1e-12);
  EXPECT_EQ(j["verdict"], "non-tree strictly cheaper");
  EXPECT_EQ(j["tree_reduce_refused"], true);
}

TEST(Cli, ReproLscAndNadic) {
  EXPECT_EQ(run_task("repro", {{"name", "lsc"}}).status, 0);
  const auto r = run_task("repro", {{"name", "nadic"}, {"grid_level", 5}, {"level", 6}});
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_EQ(r.json()["levels"].size(), 6u);
  // A separation too wide for the limit fails the check with status 2.
  EXPECT_EQ(run_task("repro", {{"name", "lsc"}, {"k", 10}}).status, kExitValidation);
}

TEST(Cli, DistanceOnDiracPair) {
  const auto r = run_task("distance", {{"source", io::to_json(DiscreteMeasure::dirac(P(0, 0)))},
                                       {"sink", io::to_json(DiscreteMeasure::dirac(P(0.3, 0.4)))},
                                       {"cost", {{"family", "branched"}, {"alpha", "0.75"}}}});
  ASSERT_EQ(r.status, 0) << r.err;
  const Json j = r.json();
  EXPECT_EQ(real(j["lower"]), real(j["upper"]));
  EXPECT_NEAR(real(j["upper"]), 0.5, 1e-15);
  EXPECT_EQ(real(j["gap"]), 0.0);
}

TEST(Cli, ValidateReportsViolations) {
  Json g = io::to_json(ramiflow::testing::counterexample_g1());
  EXPECT_EQ(run_task("validate", {{"graph", g}}).status, 0);
  g["edges"][0]["w"] = "0.3";
  const auto r = run_task("validate", {{"graph", g}});
  EXPECT_EQ(r.status, kExitValidation);
  EXPECT_EQ(r.json()["valid"], false);
  EXPECT_EQ(r.json()["violations"].size(), 2u);
  g["edges"][0]["w"] = "-1";
  EXPECT_EQ(run_task("validate", {{"graph", g}}).status, kExitValidation);
}

TEST(Cli, ErrorsAreMachineReadable) {
  const auto r = run_task("cost", {{"graph", io::to_json(ramiflow::testing::counterexample_g1())}});
  EXPECT_EQ(r.status, kExitError);
  EXPECT_EQ(Json::parse(r.err)["error"], "InvalidArgument");
  const auto imbalance = run_task("distance", {{"source", io::to_json(DiscreteMeasure::dirac(P(0, 0)))},
                                               {"sink", io::to_json(DiscreteMeasure::dirac(P(1, 0), 2))},
                                               {"cost", {{"family", "discrete"}}}});
  EXPECT_EQ(imbalance.status, kExitError);
  EXPECT_EQ(Json::parse(imbalance.err)["error"], "MassImbalance");
  EXPECT_EQ(run_task("bogus", Json::object()).status, kExitError);
}

TEST(Cli, ReduceDecomposeSplit) {
  const Json cost{{"family", "branched"}, {"alpha", 0.5}};
  std::mt19937_64 rng(101);
  const auto g = ramiflow::testing::random_planar_dag(rng, 7, 9);
  const auto red = run_task("reduce", {{"graph", io::to_json(g)}, {"cost", cost}});
  ASSERT_EQ(red.status, 0) << red.err;
  EXPECT_LE(real(red.json()["cost_after_tree_reduce"]), real(red.json()["cost_before"]) + 1e-12);
  const auto dec = run_task("decompose", {{"graph", io::to_json(g)}, {"cost", cost}});
  ASSERT_EQ(dec.status, 0) << dec.err;
  EXPECT_NEAR(real(dec.json()["pattern_cost"]), real(dec.json()["graph_cost"]), 1e-9);
  const auto split = run_task("split", {{"graph", io::to_json(g)}, {"cost", cost}});
  ASSERT_EQ(split.status, 0) << split.err;
  const Json s = split.json();
  EXPECT_NEAR(real(s["cost_before"]) + real(s["cost_after"]), real(s["cost_total"]), 1e-12);
}

TEST(Cli, OptimizeIsReproducible) {
  std::mt19937_64 rng(102);
  const Json params{{"source", io::to_json(ramiflow::testing::random_measure(rng, 3))},
                    {"sink", io::to_json(ramiflow::testing::random_measure(rng, 2))},
                    {"cost", {{"family", "branched"}, {"alpha", 0.6}}},
                    {"restarts", 5}};
  const auto a = run_task("optimize", params, 9);
  const auto b = run_task("optimize", params, 9);
  ASSERT_EQ(a.status, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
}

TEST(Cli, ConfigFileAndRelativeInputs) {
  const auto dir = std::filesystem::temp_directory_path() / "ramiflow_cli_test";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "g.json") << io::to_json(ramiflow::testing::counterexample_g3()).dump();
  std::ofstream(dir / "cfg.json") << R"({"task": "cost", "graph": "g.json", "cost": {"family": "step", "delta": "0.3"},
    "out": "result.json", "seed": 3})";
  const ExperimentConfig c = load_config((dir / "cfg.json").string());
  EXPECT_EQ(c.task, "cost");
  EXPECT_EQ(c.seed, 3u);
  std::ostringstream out, err;
  ASSERT_EQ(run(c, out, err), 0) << err.str();
  const Json r = io::read_file((dir / "result.json").string());
  EXPECT_NEAR(real(r["cost"]["total"]), 4.2, 1e-12);
  std::ofstream(dir / "bad.json") << "{\"task\": \"cost\",\n \"graph\": }";
  EXPECT_ERROR_CODE(load_config((dir / "bad.json").string()), ErrorCode::ParseError);
  std::filesystem::remove_all(dir);
}

TEST(Svg, EmptyGraphHasAxesOnly) {
  const std::string svg = render_svg(TransportGraph());
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  EXPECT_NE(svg.find("class=\"axes\""), std::string::npos);
  EXPECT_TRUE(stroke_widths(svg).empty());
  EXPECT_EQ(svg.find("<circle"), std::string::npos);
}

TEST(Svg, CounterexampleStrokeWidths) {
  const auto g = ramiflow::testing::counterexample_g3();
  const std::string svg = render_svg(g);
  const auto w = stroke_widths(svg);
  ASSERT_EQ(w.size(), 4u);
  const SvgStyle style;
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(w[i], style.max_stroke * g.edges()[i].weight / 0.55, 1e-3);
  EXPECT_EQ(svg, render_svg(g));
}

TEST(Svg, NadicTreeEdgeCount) {
  const auto n = nadic_graph(ramiflow::testing::uniform_square(3, 2.0), 3);
  EXPECT_EQ(stroke_widths(render_svg(n.graph)).size(), 84u);
  const auto r = run_task("render", {{"graph", io::to_json(n.graph)}});
  ASSERT_EQ(r.status, 0);
  EXPECT_EQ(r.out, render_svg(n.graph));
}

TEST(Svg, DimensionChecks) {
  const DiscreteMeasure a(3, {{Point{0.0, 0.0, 0.0}, 1.0}});
  const DiscreteMeasure b(3, {{Point{1.0, 0.0, 1.0}, 1.0}});
  const TransportGraph g({Point{0.0, 0.0, 0.0}, Point{1.0, 0.0, 1.0}}, {{0, 1, 1.0}}, a, b);
  EXPECT_ERROR_CODE(render_svg(g), ErrorCode::UnsupportedDimension);
  SvgStyle s;
  s.project = true;
  EXPECT_EQ(stroke_widths(render_svg(g, s)).size(), 1u);
}

TEST(Svg, PlanAndFlux) {
  const IrrigationPlan plan(2, {{{P(0, 0), P(1, 0), P(0, 0), P(1, 0)}, 0.45}, {{P(0, 0), P(1, 0)}, 0.55}});
  EXPECT_EQ(stroke_widths(render_svg(plan)).size(), 1u);
  EXPECT_EQ(stroke_widths(render_svg(flux_of_plan(plan))).size(), 1u);
}
