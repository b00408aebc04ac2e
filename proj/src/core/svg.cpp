#include "core/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace pdedpc {

namespace {

constexpr int kPanelW = 360;
constexpr int kPanelH = 300;
constexpr int kMarginL = 58;
constexpr int kMarginR = 14;
constexpr int kMarginT = 34;
constexpr int kMarginB = 44;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#7f7f7f", "#9467bd", "#ff7f0e"};

struct Range {
    double lo = 0.0;
    double hi = 1.0;
};

Range find_range(const std::vector<SvgSeries>& series, bool x_axis) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const SvgSeries& s : series)
        for (double v : (x_axis ? s.x : s.y)) {
            if (!std::isfinite(v)) continue;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (!(lo <= hi)) return {0.0, 1.0};
    if (lo == hi) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double pad = 0.04 * (hi - lo);
    return {lo - pad, hi + pad};
}

std::string fmt(double v) {
    std::ostringstream os;
    const double a = std::abs(v);
    if (v == 0.0)
        os << "0";
    else if (a >= 1e4 || a < 1e-2) {
        os.precision(1);
        os << std::scientific << v;
    } else {
        os.precision(3);
        os << v;
    }
    return os.str();
}

void render_panel(std::ostream& out, const SvgPanel& panel, int x0) {
    const Range rx = find_range(panel.series, true);
    const Range ry = find_range(panel.series, false);
    const double plot_w = kPanelW - kMarginL - kMarginR;
    const double plot_h = kPanelH - kMarginT - kMarginB;
    auto px = [&](double v) { return x0 + kMarginL + (v - rx.lo) / (rx.hi - rx.lo) * plot_w; };
    auto py = [&](double v) { return kMarginT + (1.0 - (v - ry.lo) / (ry.hi - ry.lo)) * plot_h; };

    out << "<rect x=\"" << x0 + kMarginL << "\" y=\"" << kMarginT << "\" width=\"" << plot_w
        << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n";
    out << "<text x=\"" << x0 + kPanelW / 2 << "\" y=\"18\" text-anchor=\"middle\" "
        << "font-size=\"13\" font-family=\"sans-serif\">" << panel.title << "</text>\n";

    for (int t = 0; t <= 4; ++t) {
        const double fx = rx.lo + (rx.hi - rx.lo) * t / 4.0;
        const double fy = ry.lo + (ry.hi - ry.lo) * t / 4.0;
        out << "<line x1=\"" << px(fx) << "\" y1=\"" << kMarginT + plot_h << "\" x2=\"" << px(fx)
            << "\" y2=\"" << kMarginT + plot_h + 4 << "\" stroke=\"#333\"/>\n";
        out << "<text x=\"" << px(fx) << "\" y=\"" << kMarginT + plot_h + 16
            << "\" text-anchor=\"middle\" font-size=\"9\" font-family=\"sans-serif\">" << fmt(fx)
            << "</text>\n";
        out << "<line x1=\"" << x0 + kMarginL - 4 << "\" y1=\"" << py(fy) << "\" x2=\""
            << x0 + kMarginL << "\" y2=\"" << py(fy) << "\" stroke=\"#333\"/>\n";
        out << "<text x=\"" << x0 + kMarginL - 6 << "\" y=\"" << py(fy) + 3
            << "\" text-anchor=\"end\" font-size=\"9\" font-family=\"sans-serif\">" << fmt(fy)
            << "</text>\n";
    }
    out << "<text x=\"" << x0 + kMarginL + plot_w / 2 << "\" y=\"" << kPanelH - 8
        << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">"
        << panel.x_label << "</text>\n";
    out << "<text x=\"" << x0 + 14 << "\" y=\"" << kMarginT + plot_h / 2
        << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\" "
        << "transform=\"rotate(-90 " << x0 + 14 << " " << kMarginT + plot_h / 2 << ")\">"
        << panel.y_label << "</text>\n";

    int color = 0;
    double legend_y = kMarginT + 12;
    for (const SvgSeries& s : panel.series) {
        const char* stroke = kPalette[color % 6];
        out << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.5\"";
        if (s.dashed) out << " stroke-dasharray=\"5,4\"";
        out << " points=\"";
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.y[i])) continue;
            out << px(s.x[i]) << "," << py(s.y[i]) << " ";
        }
        out << "\"/>\n";
        if (!s.label.empty()) {
            out << "<line x1=\"" << x0 + kMarginL + 8 << "\" y1=\"" << legend_y << "\" x2=\""
                << x0 + kMarginL + 26 << "\" y2=\"" << legend_y << "\" stroke=\"" << stroke
                << "\" stroke-width=\"1.5\"" << (s.dashed ? " stroke-dasharray=\"5,4\"" : "")
                << "/>\n";
            out << "<text x=\"" << x0 + kMarginL + 30 << "\" y=\"" << legend_y + 3
                << "\" font-size=\"9\" font-family=\"sans-serif\">" << s.label << "</text>\n";
            legend_y += 12;
        }
        ++color;
    }
}

}  // namespace

void write_svg_figure(const std::string& path, const std::vector<SvgPanel>& panels) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write figure '" + path + "'");
    const int width = kPanelW * static_cast<int>(panels.size());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << kPanelH << "\" viewBox=\"0 0 " << width << " " << kPanelH << "\">\n";
    out << "<rect width=\"" << width << "\" height=\"" << kPanelH << "\" fill=\"white\"/>\n";
    for (std::size_t i = 0; i < panels.size(); ++i)
        render_panel(out, panels[i], static_cast<int>(i) * kPanelW);
    out << "</svg>\n";
}

}  // namespace pdedpc
