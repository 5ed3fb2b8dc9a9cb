#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "ramiflow/costs.hpp"
#include "ramiflow/graph.hpp"
#include "ramiflow/measures.hpp"
#include "ramiflow/patterns.hpp"

namespace ramiflow::io {

using Json = nlohmann::ordered_json;

/// Shortest decimal string that parses back to the same double.
std::string format_real(double x);
/// Accepts a JSON number or a decimal string. Throws ParseError.
double parse_real(const Json& j);

/// Parses JSON text; malformed input raises ParseError naming line and column.
Json parse_text(const std::string& text);
Json read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

// {"dim": n, "atoms": [{"x": [..], "m": r}, ..]}
Json to_json(const DiscreteMeasure& m);
DiscreteMeasure measure_from_json(const Json& j);

// {"family": "branched", "alpha": 0.75}, {"family": "step", "delta": 0.3}, ...
// with an optional "mass_scale".
Json to_json(const TransportCost& tau);
TransportCost cost_from_json(const Json& j);

// {"vertices": [[..], ..], "edges": [{"t": i, "h": j, "w": r}, ..],
//  "source": measure, "sink": measure}, plus "levels" when given.
Json to_json(const TransportGraph& g, const std::vector<int>* levels = nullptr);
TransportGraph graph_from_json(const Json& j);

// {"paths": [{"pts": [[..], ..], "w": r}, ..]}; "dim" is written and optional
// on input.
Json to_json(const IrrigationPlan& p);
IrrigationPlan plan_from_json(const Json& j);

// {"dim": n, "segments": [{"a": [..], "b": [..], "theta": [..]}, ..], "diffuse": r}
Json to_json(const ConsolidatedFlux& f);

Json point_json(const Point& p);
Point point_from_json(const Json& j);

}  // namespace ramiflow::io
