#pragma once

#include <string>

#include "ramiflow/graph.hpp"
#include "ramiflow/patterns.hpp"

namespace ramiflow {

struct SvgStyle {
  double size = 600.0;        // canvas width and height in px
  double margin = 30.0;
  double max_stroke = 12.0;   // stroke of the heaviest edge
  double max_radius = 10.0;   // disc of the heaviest atom
  // Draw the first two coordinates of higher-dimensional (or padded 1-D)
  // input instead of rejecting it.
  bool project = false;
};

/// Deterministic SVG drawings. Strokes are proportional to edge weight, path
/// multiplicity or flux magnitude and carry an arrowhead in the direction of
/// transport; source atoms are red discs and sink atoms blue discs with area
/// proportional to mass. Non-planar input throws UnsupportedDimension unless
/// style.project is set.
std::string render_svg(const TransportGraph& g, const SvgStyle& style = {});
std::string render_svg(const IrrigationPlan& plan, const SvgStyle& style = {});
std::string render_svg(const ConsolidatedFlux& flux, const SvgStyle& style = {});

}  // namespace ramiflow
