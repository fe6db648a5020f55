#pragma once

#include <string>
#include <vector>

namespace si3::cli {

struct Series {
  std::string name;
  std::vector<double> values;  // one per category / x position
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<std::string> categories;  // x tick labels
  std::vector<Series> series;
};

// Value labels are written with three decimals, the same text the sweep CSV
// carries for aggregate rows. Both charts use a fixed 800x500 viewBox.
std::string bar_chart_svg(const Chart& chart);
std::string line_chart_svg(const Chart& chart);

}  // namespace si3::cli
