#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace amdm::harness {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

struct PlotLabels {
  std::string title;
  std::string x_label;
  std::string y_label;
};

/// Self-contained SVG line plot with axes, ticks and a legend. Every point is
/// drawn as a marker; series with two or more points are also joined by a
/// polyline.
///
/// Throws std::invalid_argument when there is no series or a series has no
/// points, std::runtime_error on I/O failure.
std::string render_line_plot_svg(const std::vector<Series>& series, const PlotLabels& labels);
void render_line_plot(const std::vector<Series>& series, const PlotLabels& labels, const std::filesystem::path& path);

}  // namespace amdm::harness
