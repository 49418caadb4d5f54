#pragma once

#include <string>
#include <vector>

namespace flatlab {

struct PlotSeries {
    std::string label;
    std::vector<double> x, y;
    bool markers_only = false;
};

struct PlotSpec {
    std::string title, x_label, y_label;
    bool log_x = false;
    std::vector<PlotSeries> series;
};

// Minimal standalone SVG line/scatter chart. Non-finite points are skipped.
std::string render_svg(const PlotSpec& spec);
void write_svg(const PlotSpec& spec, const std::string& path);

}  // namespace flatlab
