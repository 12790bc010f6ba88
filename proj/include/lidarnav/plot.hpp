#pragma once

#include <string>
#include <vector>

namespace lidarnav {

// One plotted setup: mean line with a min–max band behind it.
struct CurveSeries {
  std::string label;
  std::string color;  // CSS color, e.g. "#1f77b4"
  std::vector<double> x;
  std::vector<double> mean;
  std::vector<double> min;
  std::vector<double> max;
};

// Self-contained SVG line plot (no external assets): shaded min–max bands,
// mean polylines, axes with ticks, and a legend.
void write_curve_svg(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<CurveSeries>& series);

}  // namespace lidarnav
