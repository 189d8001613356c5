#pragma once

#include <string>
#include <vector>

/// Minimal SVG line-chart writer: a grid of panels, each with axes, ticks,
/// and polylines. Log-scaled axes map log10 of the data.
namespace ccid::plot {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  bool dashed = false;
};

struct Axis {
  std::string label;
  bool log_scale = false;
};

struct Panel {
  std::string title;
  Axis x;
  Axis y;
  std::vector<Series> series;
};

struct Figure {
  std::string title;
  int columns = 1;
  double panel_width = 420.0;
  double panel_height = 260.0;
  std::vector<Panel> panels;
};

struct Range {
  double lo = 0.0;
  double hi = 1.0;
};

/// Data extent of every series on one axis, padded when degenerate. Throws on
/// a log axis with nonpositive data or a panel without any points.
Range axis_range(const Panel& panel, bool y_axis);

/// Tick positions inside [lo, hi]: 1-2-5 steps for linear axes, powers of ten
/// (plus 2x and 5x when the range spans under two decades) for log axes.
std::vector<double> axis_ticks(Range range, bool log_scale);

/// Self-contained SVG document.
std::string render_svg(const Figure& figure);

}  // namespace ccid::plot
