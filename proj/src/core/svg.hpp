#pragma once

#include <string>
#include <vector>

namespace pdedpc {

// Minimal self-contained SVG line charts; enough for the figure panels
// without pulling in a plotting dependency.
struct SvgSeries {
    std::vector<double> x;
    std::vector<double> y;
    std::string label;
    bool dashed = false;
};

struct SvgPanel {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<SvgSeries> series;
};

void write_svg_figure(const std::string& path, const std::vector<SvgPanel>& panels);

}  // namespace pdedpc
