#include "ramiflow/cli.hpp"

#include <cmath>
#include <filesystem>
#include <ostream>

#include "ramiflow/distance.hpp"
#include "ramiflow/errors.hpp"
#include "ramiflow/hierarchy.hpp"
#include "ramiflow/optimizer.hpp"
#include "ramiflow/svg.hpp"

namespace ramiflow {

namespace fs = std::filesystem;
using io::Json;
using io::format_real;

const std::vector<std::string>& task_names() {
  static const std::vector<std::string> names{"validate", "cost",     "reduce", "nadic",  "decompose",
                                              "distance", "optimize", "split",  "render", "repro"};
  return names;
}

ExperimentConfig load_config(const std::string& path) {
  ExperimentConfig c;
  c.params = io::read_file(path);
  if (!c.params.is_object()) throw Error(ErrorCode::ParseError, path + ": config must be a JSON object");
  c.base_dir = fs::path(path).parent_path().string();
  if (c.base_dir.empty()) c.base_dir = ".";
  if (c.params.contains("task")) {
    if (!c.params["task"].is_string()) throw Error(ErrorCode::ParseError, "\"task\" must be a string");
    c.task = c.params["task"].get<std::string>();
  }
  if (c.params.contains("out")) {
    if (!c.params["out"].is_string()) throw Error(ErrorCode::ParseError, "\"out\" must be a string");
    c.out = (fs::path(c.base_dir) / c.params["out"].get<std::string>()).string();
  }
  if (c.params.contains("seed")) {
    const Json& s = c.params["seed"];
    if (!s.is_number_unsigned()) throw Error(ErrorCode::ParseError, "\"seed\" must be a nonnegative integer");
    c.seed = s.get<std::uint64_t>();
  }
  return c;
}

namespace {

// Failed reproduction or validation; reported with exit status 2.
struct CheckFailed {
  Json report;
};

class Task {
 public:
  explicit Task(const ExperimentConfig& c) : c_(c) {}

  bool has(const char* key) const { return c_.params.contains(key); }

  Json input(const char* key) const {
    if (!has(key)) throw Error(ErrorCode::InvalidArgument, std::string("task needs \"") + key + "\"");
    const Json& v = c_.params.at(key);
    if (v.is_string()) return io::read_file((fs::path(c_.base_dir) / v.get<std::string>()).string());
    return v;
  }

  TransportGraph graph() const { return io::graph_from_json(input("graph")); }
  IrrigationPlan plan() const { return io::plan_from_json(input("plan")); }
  DiscreteMeasure measure(const char* key) const { return io::measure_from_json(input(key)); }
  TransportCost cost() const { return io::cost_from_json(input("cost")); }
  std::optional<TransportCost> maybe_cost() const {
    return has("cost") ? std::optional<TransportCost>(cost()) : std::nullopt;
  }

  double real(const char* key, double fallback) const {
    return has(key) ? io::parse_real(c_.params.at(key)) : fallback;
  }
  int integer(const char* key, int fallback) const {
    if (!has(key)) return fallback;
    const Json& v = c_.params.at(key);
    if (!v.is_number_integer()) throw Error(ErrorCode::ParseError, std::string("\"") + key + "\" must be an integer");
    return v.get<int>();
  }
  std::string text(const char* key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const Json& v = c_.params.at(key);
    if (!v.is_string()) throw Error(ErrorCode::ParseError, std::string("\"") + key + "\" must be a string");
    return v.get<std::string>();
  }
  bool flag(const char* key) const { return has(key) && c_.params.at(key).is_boolean() && c_.params.at(key).get<bool>(); }

  DyadicGrid grid() const {
    DyadicGrid g;
    if (!has("grid")) return g;
    const Json& j = c_.params.at("grid");
    if (j.contains("scale")) g.scale = io::parse_real(j.at("scale"));
    if (j.contains("center")) g.center = io::point_from_json(j.at("center"));
    return g;
  }

  const ExperimentConfig& config() const { return c_; }

 private:
  const ExperimentConfig& c_;
};

Json cost_json(const TransportGraph& g, const TransportCost& tau) {
  const CostBreakdown b = graph_cost(g, tau);
  Json parts = Json::array();
  for (double p : b.parts) parts.push_back(format_real(p));
  return {{"total", format_real(b.total)}, {"parts", parts}};
}

Json task_validate(const Task& t) {
  Json r;
  TransportGraph g;
  try {
    g = t.graph();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ParseError) throw;
    throw CheckFailed{{{"valid", false}, {"error", std::string(code_name(e.code()))}, {"message", e.what()}}};
  }
  const auto violations = check_conservation(g);
  Json vs = Json::array();
  for (const auto& v : violations) vs.push_back({{"x", io::point_json(v.position)}, {"residual", format_real(v.residual)}});
  const bool acyclic = !has_directed_cycle(g);
  r["valid"] = violations.empty();
  r["violations"] = vs;
  r["acyclic"] = acyclic;
  r["cycle_rank"] = cycle_rank(g);
  if (acyclic) {
    const MaxFlux m = max_flux_bound(g);
    r["max_flux"] = {{"max_weight", format_real(m.max_weight)}, {"holds", m.holds}};
  }
  if (const auto tau = t.maybe_cost()) r["cost"] = format_real(graph_cost(g, *tau).total);
  if (!violations.empty()) throw CheckFailed{r};
  return r;
}

Json task_cost(const Task& t) {
  const TransportCost tau = t.cost();
  Json r{{"cost_model", io::to_json(tau)}};
  if (t.has("plan")) {
    const IrrigationPlan p = t.plan();
    r["pattern_cost"] = format_real(pattern_cost(p, tau).value());
    r["gilbert_energy"] = format_real(gilbert_energy(flux_of_plan(p), tau).value());
    r["loop_free"] = check_loop_free(p);
    return r;
  }
  const TransportGraph g = t.graph();
  r["cost"] = cost_json(g, tau);
  r["gilbert_energy"] = format_real(gilbert_energy(consolidate_flux(g), tau).value());
  return r;
}

Json task_reduce(const Task& t) {
  const TransportGraph g = t.graph();
  const auto tau = t.maybe_cost();
  Json r;
  if (tau) r["cost_before"] = format_real(graph_cost(g, *tau).total);
  TransportGraph out = remove_cycles(g);
  if (tau) r["cost_after_remove_cycles"] = format_real(graph_cost(out, *tau).total);
  r["tree_reduced"] = false;
  if (tau && tau->is_concave()) {
    out = tree_reduce(out, *tau);
    r["tree_reduced"] = true;
    r["cost_after_tree_reduce"] = format_real(graph_cost(out, *tau).total);
  }
  r["cycle_rank"] = cycle_rank(out);
  r["graph"] = io::to_json(out);
  return r;
}

Json task_nadic(const Task& t) {
  const DiscreteMeasure m = t.measure("measure");
  const int k = t.integer("level", 3);
  const DyadicGrid grid = t.grid();
  const NadicGraph n = nadic_graph(m, k, grid);
  Json r{{"levels", k}, {"graph", io::to_json(n.graph, &n.edge_level)}};
  if (const auto tau = t.maybe_cost()) {
    r["cost"] = format_real(graph_cost(n.graph, *tau).total);
    if (const auto beta = ConcaveMajorant::of(*tau); beta && std::abs(m.total_mass() - 1) <= kMassTolerance) {
      Json levels = Json::array();
      for (const LevelCost& l : nadic_cost_bounds(m, k, *tau, *beta, grid))
        levels.push_back({{"level", l.level},
                          {"actual", format_real(l.actual)},
                          {"bound", format_real(l.bound)},
                          {"holds", l.holds}});
      r["level_costs"] = levels;
    }
  }
  return r;
}

Json task_decompose(const Task& t) {
  const TransportGraph g = t.graph();
  const IrrigationPlan p = decompose_paths(g);
  Json r{{"plan", io::to_json(p)}, {"loop_free", check_loop_free(p)}};
  if (const auto tau = t.maybe_cost()) {
    r["pattern_cost"] = format_real(pattern_cost(p, *tau).value());
    r["graph_cost"] = format_real(graph_cost(g, *tau).total);
  }
  return r;
}

OptimizerConfig optimizer_config(const Task& t) {
  OptimizerConfig c;
  c.restarts = t.integer("restarts", c.restarts);
  c.max_rounds = t.integer("max_rounds", c.max_rounds);
  c.seed = t.config().seed;
  return c;
}

Json task_distance(const Task& t) {
  DistanceBudget budget;
  budget.max_level = t.integer("max_level", budget.max_level);
  budget.use_optimizer = !t.flag("no_optimizer");
  budget.optimizer = optimizer_config(t);
  const DistanceBounds b = dtau_bounds(t.measure("source"), t.measure("sink"), t.cost(), budget);
  return {{"lower", format_real(b.lower)},
          {"upper", format_real(b.upper)},
          {"gap", format_real(b.gap())},
          {"lambda", format_real(b.lambda)},
          {"w1", format_real(b.w1)},
          {"witness_kind", b.witness_kind},
          {"witness", io::to_json(b.witness)},
          {"note", "certified bounds; the distance itself is not computed"}};
}

Json task_split(const Task& t) {
  const TransportGraph g = t.graph();
  Json r;
  SplitResult s;
  if (t.has("t")) {
    const double time = t.real("t", 0.5);
    s = split_at_time(g, time);
    r["t"] = format_real(time);
  } else {
    const MidpointSplit m = find_midpoint_split(g, t.real("tolerance", 1e-9));
    s = m.split;
    r["t"] = format_real(m.t);
    r["w1_to_mid"] = format_real(m.w1_to_mid);
    r["w1_total"] = format_real(m.w1_total);
  }
  r["mid"] = io::to_json(s.mid);
  r["before"] = io::to_json(s.before);
  r["after"] = io::to_json(s.after);
  if (const auto tau = t.maybe_cost()) {
    r["cost_before"] = format_real(graph_cost(s.before, *tau).total);
    r["cost_after"] = format_real(graph_cost(s.after, *tau).total);
    r["cost_total"] = format_real(graph_cost(g, *tau).total);
  }
  return r;
}

std::string task_render(const Task& t) {
  SvgStyle style;
  style.project = t.flag("project");
  const std::string what = t.text("object", t.has("plan") ? "plan" : "graph");
  if (what == "plan") return render_svg(t.plan(), style);
  if (what == "flux") return render_svg(consolidate_flux(t.graph()), style);
  if (what == "graph") return render_svg(t.graph(), style);
  throw Error(ErrorCode::InvalidArgument, "render object must be graph, plan or flux");
}

// ---- reproduction scripts ----

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

Json check(const std::string& what, double actual, double expected, double tol, bool& ok) {
  const bool pass = close(actual, expected, tol);
  ok = ok && pass;
  return {{"quantity", what},
          {"actual", format_real(actual)},
          {"expected", format_real(expected)},
          {"tolerance", format_real(tol)},
          {"pass", pass}};
}

Json repro_nontree(bool& ok) {
  const DiscreteMeasure src(2, {{Point{0.0, 0.0}, 0.35}, {Point{0.0, 1.0}, 0.65}});
  const DiscreteMeasure dst(2, {{Point{3.0, 0.0}, 0.35}, {Point{3.0, 1.0}, 0.65}});
  const std::vector<Point> v{Point{0.0, 0.0}, Point{3.0, 0.0}, Point{0.0, 1.0}, Point{3.0, 1.0}};
  const TransportGraph g1(v, {{0, 1, 0.35}, {2, 3, 0.65}}, src, dst);
  const TransportGraph g3(v, {{2, 0, 0.1}, {0, 1, 0.45}, {2, 3, 0.55}, {1, 3, 0.1}}, src, dst);
  const TransportCost tau = TransportCost::step(0.3);
  const double c1 = graph_cost(g1, tau).total;
  const double c3 = graph_cost(g3, tau).total;
  Json checks = Json::array({check("cost(G1)", c1, 4.5, 1e-12, ok), check("cost(G3)", c3, 4.2, 1e-12, ok)});
  const bool valid = check_conservation(g1).empty() && check_conservation(g3).empty();
  bool refused = false;
  try {
    tree_reduce(g3, tau);
  } catch (const Error& e) {
    refused = e.code() == ErrorCode::NonConcaveCost;
  }
  ok = ok && valid && refused && c3 < c1;
  return {{"name", "nontree"},
          {"cost", io::to_json(tau)},
          {"G1", io::to_json(g1)},
          {"G3", io::to_json(g3)},
          {"cost_G1", format_real(c1)},
          {"cost_G3", format_real(c3)},
          {"conservation_valid", valid},
          {"tree_reduce_refused", refused},
          {"verdict", c3 < c1 ? "non-tree strictly cheaper" : "tree not beaten"},
          {"checks", checks}};
}

Json repro_lsc(const Task& t, bool& ok) {
  const double a = 0.45;
  const double k = t.real("k", 1e6);
  const TransportCost tau = TransportCost::step(a, 1.0);
  const Point o{0.0, 0.0}, e{1.0, 0.0};
  const IrrigationPlan looping(2, {{{o, e, o, e}, a}, {{o, e}, 1 - a}});
  const double h = 1.0 / (3 * k);
  const IrrigationPlan separated(2, {{{o, Point{1.0, h}, Point{0.0, -h}, e}, a}, {{o, e}, 1 - a}});
  const double looping_cost = pattern_cost(looping, tau).value();
  const double separated_cost = pattern_cost(separated, tau).value();
  const double energy = gilbert_energy(flux_of_plan(looping), tau).value();
  Json checks = Json::array({check("looping plan cost", looping_cost, (1 + 2 * a) * tau(1.0), 1e-12, ok),
                             check("separated plan cost", separated_cost, 3 * tau(a) + tau(1 - a), 1e-12, ok),
                             check("looping flux energy", energy, 3.0, 1e-12, ok)});
  return {{"name", "lsc"},
          {"cost", io::to_json(tau)},
          {"looping_plan", io::to_json(looping)},
          {"separated_plan", io::to_json(separated)},
          {"looping_cost", format_real(looping_cost)},
          {"separated_cost", format_real(separated_cost)},
          {"looping_flux_energy", format_real(energy)},
          {"checks", checks}};
}

Json repro_nadic(const Task& t, bool& ok) {
  const int grid_level = t.integer("grid_level", 7);
  const int k = t.integer("level", 8);
  if (grid_level < 1 || grid_level > 12) throw Error(ErrorCode::InvalidArgument, "grid_level must be in 1..12");
  const int cells = 1 << grid_level;
  std::vector<Atom> atoms;
  const double mass = 1.0 / (static_cast<double>(cells) * cells);
  for (int i = 0; i < cells; ++i)
    for (int j = 0; j < cells; ++j)
      atoms.push_back({Point{-1 + (2.0 * i + 1) / cells, -1 + (2.0 * j + 1) / cells}, mass});
  const DiscreteMeasure mu(2, std::move(atoms));
  const TransportCost tau = TransportCost::branched(0.75);
  const ConcaveMajorant beta(tau);
  const auto levels = nadic_cost_bounds(mu, k, tau, beta);
  Json rows = Json::array();
  double total = 0.0;
  bool all = true;
  for (const LevelCost& l : levels) {
    total += l.actual;
    all = all && l.holds;
    rows.push_back({{"level", l.level}, {"actual", format_real(l.actual)}, {"bound", format_real(l.bound)}, {"holds", l.holds}});
  }
  // 2 sqrt(2) S^beta(2) with S^beta(2) = sum_k 2^{-k/2} = 1 / (sqrt 2 - 1).
  const double cumulative_bound = 2 * std::sqrt(2.0) / (std::sqrt(2.0) - 1);
  Json checks = Json::array({check("level-1 cost", levels.front().actual, 2.0, 1e-9, ok),
                             check("level-1 bound", levels.front().bound, 2.0, 1e-9, ok)});
  ok = ok && all && total <= cumulative_bound + 1e-9;
  return {{"name", "nadic"},
          {"atoms", mu.size()},
          {"levels", rows},
          {"all_levels_hold", all},
          {"cumulative_cost", format_real(total)},
          {"cumulative_bound", format_real(cumulative_bound)},
          {"checks", checks}};
}

Json task_repro(const Task& t) {
  const std::string name = t.text("name", "");
  bool ok = true;
  Json r;
  if (name == "nontree")
    r = repro_nontree(ok);
  else if (name == "lsc")
    r = repro_lsc(t, ok);
  else if (name == "nadic")
    r = repro_nadic(t, ok);
  else
    throw Error(ErrorCode::InvalidArgument, "unknown repro \"" + name + "\" (nontree, lsc, nadic)");
  r["pass"] = ok;
  if (!ok) throw CheckFailed{r};
  return r;
}

void emit(const ExperimentConfig& c, std::ostream& out, const std::string& content) {
  if (c.out.empty())
    out << content;
  else
    io::write_file(c.out, content);
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace

int run(const ExperimentConfig& config, std::ostream& out, std::ostream& err) {
  try {
    const Task t(config);
    const std::string& task = config.task;
    try {
      if (task == "render") {
        emit(config, out, task_render(t));
        return kExitOk;
      }
      Json r;
      if (task == "validate")
        r = task_validate(t);
      else if (task == "cost")
        r = task_cost(t);
      else if (task == "reduce")
        r = task_reduce(t);
      else if (task == "nadic")
        r = task_nadic(t);
      else if (task == "decompose")
        r = task_decompose(t);
      else if (task == "distance")
        r = task_distance(t);
      else if (task == "optimize") {
        const TransportCost tau = t.cost();
        const DiscreteMeasure src = t.measure("source");
        const DiscreteMeasure dst = t.measure("sink");
        const TransportGraph g = optimize(src, dst, tau, optimizer_config(t));
        r = {{"cost", format_real(graph_cost(g, tau).total)},
             {"lower_bound", format_real(lambda_tau(tau, src.total_mass()) * wasserstein1(src, dst))},
             {"seed", config.seed},
             {"graph", io::to_json(g)}};
        if (!config.out.empty()) io::write_file(fs::path(config.out).replace_extension(".svg").string(), render_svg(g));
      } else if (task == "split")
        r = task_split(t);
      else if (task == "repro")
        r = task_repro(t);
      else
        throw Error(ErrorCode::InvalidArgument, "unknown task \"" + task + "\"");
      emit(config, out, dump(r));
      return kExitOk;
    } catch (CheckFailed& f) {
      emit(config, out, dump(f.report));
      return kExitValidation;
    }
  } catch (const Error& e) {
    err << Json{{"error", std::string(code_name(e.code()))}, {"message", e.what()}}.dump() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    err << Json{{"error", "Internal"}, {"message", e.what()}}.dump() << "\n";
    return kExitError;
  }
}

}  // namespace ramiflow
