#pragma once

// Static SVG line charts for descent curves. Write-only output.

#include "descent/experiments.hpp"

#include <optional>
#include <string>
#include <vector>

namespace descent {

struct ChartSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;  // NaN entries are skipped
};

struct ChartSpec {
    std::string title;
    std::string x_label = "complexity";
    std::string y_label = "RMSE";
    std::vector<ChartSeries> series;
    std::optional<double> marker_x;  // dashed vertical line
    int width = 720;
    int height = 440;
};

std::string render_svg(const ChartSpec& spec);

// In-sample and out-of-sample series of a curve, with the marker at the interpolation threshold.
ChartSpec curve_chart(const DescentCurve& curve, const std::string& title, const std::string& in_label,
                      std::optional<double> marker_x);

}  // namespace descent
