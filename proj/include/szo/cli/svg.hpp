#pragma once

#include <string>
#include <utility>
#include <vector>

namespace szo::cli {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;  // (step, value)
};

// Labels along the top edge, placed at the given x positions.
struct TopAxis {
  std::string title;
  std::vector<std::pair<double, std::string>> ticks;
};

// Self-contained SVG line chart, one polyline per series.
std::string line_chart_svg(const std::vector<Series>& series,
                           const std::string& x_label,
                           const TopAxis* top_axis = nullptr);

}  // namespace szo::cli
