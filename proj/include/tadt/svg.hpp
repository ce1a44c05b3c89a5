#pragma once

#include <string>
#include <vector>

namespace tadt {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  int width = 640;
  int height = 400;
  bool log_x = false;
  bool log_y = false;
};

/// Standalone SVG line chart. Non-finite points (and non-positive ones on a
/// log axis) are skipped.
std::string line_chart_svg(const std::vector<Series>& series, const ChartOptions& options);

}  // namespace tadt
