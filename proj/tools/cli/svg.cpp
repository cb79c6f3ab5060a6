#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace dsq::cli {

namespace {

constexpr double kWidth = 640, kHeight = 420, kLeft = 70, kRight = 170, kTop = 40, kBottom = 50;
const char* const kColours[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Axis {
  double lo = 0, hi = 1;
  bool log = false;
  double map(double v, double a, double b) const {
    const double t = log ? (std::log10(v) - lo) / (hi - lo) : (v - lo) / (hi - lo);
    return a + t * (b - a);
  }
  double value_at(double t) const { return log ? std::pow(10.0, lo + t * (hi - lo)) : lo + t * (hi - lo); }
};

bool usable(double v, bool log) { return std::isfinite(v) && (!log || v > 0.0); }

Axis fit_axis(const std::vector<Series>& series, bool use_x, bool log) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      if (!usable(x, log && use_x) || !usable(y, false)) continue;
      const double v = use_x ? x : y;
      if (!usable(v, log)) continue;
      const double t = log ? std::log10(v) : v;
      lo = std::min(lo, t);
      hi = std::max(hi, t);
    }
  if (!std::isfinite(lo)) lo = 0, hi = 1;
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  return {lo, hi, log};
}

}  // namespace

std::string line_chart(const std::vector<Series>& series, const ChartOptions& opts) {
  const Axis ax = fit_axis(series, true, opts.log_x);
  const Axis ay = fit_axis(series, false, opts.log_y);
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" +
                    num(kHeight) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + num(kWidth / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" +
         escape(opts.title) + "</text>\n";
  svg += "<rect x=\"" + num(x0) + "\" y=\"" + num(y1) + "\" width=\"" + num(x1 - x0) + "\" height=\"" +
         num(y0 - y1) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double t = i / 4.0;
    const double px = x0 + t * (x1 - x0), py = y0 + t * (y1 - y0);
    svg += "<text x=\"" + num(px) + "\" y=\"" + num(y0 + 15) + "\" text-anchor=\"middle\">" + tick(ax.value_at(t)) +
           "</text>\n";
    svg += "<text x=\"" + num(x0 - 5) + "\" y=\"" + num(py + 4) + "\" text-anchor=\"end\">" + tick(ay.value_at(t)) +
           "</text>\n";
  }
  svg += "<text x=\"" + num((x0 + x1) / 2) + "\" y=\"" + num(kHeight - 12) + "\" text-anchor=\"middle\">" +
         escape(opts.x_label) + "</text>\n";
  svg += "<text transform=\"translate(16," + num((y0 + y1) / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
         escape(opts.y_label) + "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const std::string colour = kColours[i % std::size(kColours)];
    std::string pts;
    for (const auto& [x, y] : s.points) {
      if (!usable(x, opts.log_x) || !usable(y, opts.log_y)) continue;
      const std::string px = num(ax.map(x, x0, x1)), py = num(ay.map(y, y0, y1));
      if (s.markers_only)
        svg += "<circle cx=\"" + px + "\" cy=\"" + py + "\" r=\"4\" fill=\"" + colour + "\"/>\n";
      else
        pts += px + "," + py + " ";
    }
    if (!s.markers_only && !pts.empty()) {
      pts.pop_back();
      svg += "<polyline fill=\"none\" stroke=\"" + colour + "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    }
    const double ly = y1 + 14.0 * static_cast<double>(i);
    svg += "<rect x=\"" + num(x1 + 10) + "\" y=\"" + num(ly) + "\" width=\"10\" height=\"10\" fill=\"" + colour +
           "\"/>\n";
    svg += "<text x=\"" + num(x1 + 24) + "\" y=\"" + num(ly + 9) + "\">" + escape(s.label) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace dsq::cli
