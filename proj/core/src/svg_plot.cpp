#include "ccid/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "ccid/error.hpp"

namespace ccid::plot {

namespace {

constexpr double kMarginLeft = 64.0;
constexpr double kMarginRight = 16.0;
constexpr double kMarginTop = 28.0;
constexpr double kMarginBottom = 44.0;
constexpr double kTitleHeight = 32.0;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

double to_axis(double v, bool log_scale) { return log_scale ? std::log10(v) : v; }

}  // namespace

Range axis_range(const Panel& panel, bool y_axis) {
  const bool log_scale = y_axis ? panel.y.log_scale : panel.x.log_scale;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& s : panel.series) {
    if (s.x.size() != s.y.size()) throw Error("series '" + s.name + "' has mismatched x/y lengths");
    for (double v : y_axis ? s.y : s.x) {
      if (!std::isfinite(v)) continue;
      if (log_scale && v <= 0.0)
        throw Error("panel '" + panel.title + "': log axis needs positive values, got " + tick_label(v));
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(lo <= hi)) throw Error("panel '" + panel.title + "' has no data points");
  if (lo == hi) {
    if (log_scale) {
      lo /= 2.0;
      hi *= 2.0;
    } else {
      const double pad = lo == 0.0 ? 1.0 : std::abs(lo) * 0.1;
      lo -= pad;
      hi += pad;
    }
  }
  return {lo, hi};
}

std::vector<double> axis_ticks(Range r, bool log_scale) {
  std::vector<double> out;
  if (log_scale) {
    const int e0 = static_cast<int>(std::floor(std::log10(r.lo)));
    const int e1 = static_cast<int>(std::ceil(std::log10(r.hi)));
    const bool fine = e1 - e0 <= 2;
    for (int e = e0; e <= e1; ++e) {
      const double base = std::pow(10.0, e);
      for (double m : {1.0, 2.0, 5.0}) {
        if (m != 1.0 && !fine) continue;
        const double v = m * base;
        if (v >= r.lo * (1 - 1e-12) && v <= r.hi * (1 + 1e-12)) out.push_back(v);
      }
    }
    if (out.empty()) out = {r.lo, r.hi};
    return out;
  }
  const double span = r.hi - r.lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  for (double v = std::ceil(r.lo / step) * step; v <= r.hi + step * 1e-9; v += step)
    out.push_back(std::abs(v) < step * 1e-9 ? 0.0 : v);
  return out;
}

std::string render_svg(const Figure& fig) {
  if (fig.panels.empty()) throw Error("figure has no panels");
  const int cols = std::max(1, fig.columns);
  const int rows = (static_cast<int>(fig.panels.size()) + cols - 1) / cols;
  const double width = cols * fig.panel_width;
  const double height = kTitleHeight + rows * fig.panel_height;

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) +
         "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + num(width / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" + escape(fig.title) +
         "</text>\n";

  for (std::size_t p = 0; p < fig.panels.size(); ++p) {
    const auto& panel = fig.panels[p];
    const double ox = static_cast<double>(static_cast<int>(p) % cols) * fig.panel_width;
    const double oy = kTitleHeight + static_cast<double>(static_cast<int>(p) / cols) * fig.panel_height;
    const double x0 = ox + kMarginLeft;
    const double x1 = ox + fig.panel_width - kMarginRight;
    const double y0 = oy + fig.panel_height - kMarginBottom;  // bottom
    const double y1 = oy + kMarginTop;                         // top

    const Range rx = axis_range(panel, false);
    const Range ry = axis_range(panel, true);
    const double ax_lo = to_axis(rx.lo, panel.x.log_scale), ax_hi = to_axis(rx.hi, panel.x.log_scale);
    const double ay_lo = to_axis(ry.lo, panel.y.log_scale), ay_hi = to_axis(ry.hi, panel.y.log_scale);
    auto px = [&](double v) { return x0 + (to_axis(v, panel.x.log_scale) - ax_lo) / (ax_hi - ax_lo) * (x1 - x0); };
    auto py = [&](double v) { return y0 - (to_axis(v, panel.y.log_scale) - ay_lo) / (ay_hi - ay_lo) * (y0 - y1); };

    out += "<g>\n";
    out += "<text x=\"" + num((x0 + x1) / 2) + "\" y=\"" + num(oy + 16) + "\" text-anchor=\"middle\" font-size=\"12\">" +
           escape(panel.title) + "</text>\n";
    out += "<rect x=\"" + num(x0) + "\" y=\"" + num(y1) + "\" width=\"" + num(x1 - x0) + "\" height=\"" +
           num(y0 - y1) + "\" fill=\"none\" stroke=\"black\"/>\n";

    for (double t : axis_ticks(rx, panel.x.log_scale)) {
      const double x = px(t);
      out += "<line x1=\"" + num(x) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x) + "\" y2=\"" + num(y0 + 4) +
             "\" stroke=\"black\"/>\n";
      out += "<text x=\"" + num(x) + "\" y=\"" + num(y0 + 15) + "\" text-anchor=\"middle\">" + tick_label(t) +
             "</text>\n";
    }
    for (double t : axis_ticks(ry, panel.y.log_scale)) {
      const double y = py(t);
      out += "<line x1=\"" + num(x0 - 4) + "\" y1=\"" + num(y) + "\" x2=\"" + num(x0) + "\" y2=\"" + num(y) +
             "\" stroke=\"black\"/>\n";
      out += "<text x=\"" + num(x0 - 6) + "\" y=\"" + num(y + 4) + "\" text-anchor=\"end\">" + tick_label(t) +
             "</text>\n";
    }
    out += "<text x=\"" + num((x0 + x1) / 2) + "\" y=\"" + num(y0 + 32) + "\" text-anchor=\"middle\">" +
           escape(panel.x.label) + "</text>\n";
    out += "<text transform=\"translate(" + num(ox + 14) + "," + num((y0 + y1) / 2) +
           ") rotate(-90)\" text-anchor=\"middle\">" + escape(panel.y.label) +
           (panel.y.log_scale ? " (log)" : "") + "</text>\n";

    double legend_y = y1 + 14;
    for (const auto& s : panel.series) {
      std::string pts;
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        if (!pts.empty()) pts += ' ';
        pts += num(px(s.x[i])) + "," + num(py(s.y[i]));
      }
      out += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.2\"" +
             (s.dashed ? " stroke-dasharray=\"5,3\"" : "") + " points=\"" + pts + "\"/>\n";
      if (!s.name.empty()) {
        out += "<line x1=\"" + num(x1 - 90) + "\" y1=\"" + num(legend_y - 4) + "\" x2=\"" + num(x1 - 72) + "\" y2=\"" +
               num(legend_y - 4) + "\" stroke=\"" + s.color + "\"" + (s.dashed ? " stroke-dasharray=\"5,3\"" : "") +
               "/>\n";
        out += "<text x=\"" + num(x1 - 68) + "\" y=\"" + num(legend_y) + "\">" + escape(s.name) + "</text>\n";
        legend_y += 14;
      }
    }
    out += "</g>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace ccid::plot
