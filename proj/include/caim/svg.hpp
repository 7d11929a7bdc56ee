#pragma once

#include <string>
#include <vector>

namespace caim {

// Small self-contained SVG line-chart writer; no external assets.

struct SvgSeries {
    std::string label;
    std::vector<std::pair<double, double>> points;
    bool staircase = false;  // zero-order-hold rendering
};

struct SvgPanel {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<SvgSeries> series;
};

void write_svg_chart(const std::string& path, const std::string& title,
                     const std::vector<SvgPanel>& panels);

}  // namespace caim
