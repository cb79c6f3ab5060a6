#pragma once

#include <string>
#include <utility>
#include <vector>

namespace dsq::cli {

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;
  bool markers_only = false;
};

struct ChartOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
};

/// Static SVG line chart; non-finite (or non-positive on log axes) points
/// are skipped.
std::string line_chart(const std::vector<Series>& series, const ChartOptions& opts);

}  // namespace dsq::cli
