#pragma once

#include <string>
#include <vector>

namespace bevguard::harness {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Static SVG line chart.
void write_line_svg(const std::string& path, const std::string& title, const std::string& x_label,
                    const std::string& y_label, const std::vector<Series>& series);

/// Static SVG of overlaid histograms (shared bins).
void write_histogram_svg(const std::string& path, const std::string& title,
                         const std::vector<std::pair<std::string, std::vector<double>>>& samples, int bins = 30);

}  // namespace bevguard::harness
