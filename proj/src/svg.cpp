#include "caim/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "caim/errors.hpp"

namespace caim {

namespace {

constexpr int kPanelWidth = 640;
constexpr int kPanelHeight = 360;
constexpr int kMarginLeft = 64;
constexpr int kMarginRight = 120;  // legend space
constexpr int kMarginTop = 40;
constexpr int kMarginBottom = 48;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
constexpr int kPaletteSize = 10;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    void include(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void pad() {
        if (lo > hi) {
            lo = 0.0;
            hi = 1.0;
        }
        if (lo == hi) {
            lo -= 0.5;
            hi += 0.5;
        }
        const double margin = 0.04 * (hi - lo);
        lo -= margin;
        hi += margin;
    }
};

}  // namespace

void write_svg_chart(const std::string& path, const std::string& title,
                     const std::vector<SvgPanel>& panels) {
    if (panels.empty()) throw ContractViolation("write_svg_chart: no panels");
    for (const auto& panel : panels) {
        if (panel.series.empty()) {
            throw ContractViolation("write_svg_chart: panel '" + panel.title + "' has no series");
        }
    }

    const int total_height = kPanelHeight * static_cast<int>(panels.size()) + 28;
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kPanelWidth << "\" height=\""
        << total_height << "\" viewBox=\"0 0 " << kPanelWidth << " " << total_height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << kPanelWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"15\" font-weight=\"bold\">" << title << "</text>\n";

    for (std::size_t pi = 0; pi < panels.size(); ++pi) {
        const auto& panel = panels[pi];
        const int top = 28 + static_cast<int>(pi) * kPanelHeight + kMarginTop;
        const int bottom = 28 + static_cast<int>(pi + 1) * kPanelHeight - kMarginBottom;
        const int left = kMarginLeft;
        const int right = kPanelWidth - kMarginRight;

        Range xr, yr;
        for (const auto& s : panel.series) {
            for (const auto& [x, y] : s.points) {
                xr.include(x);
                yr.include(y);
            }
        }
        xr.pad();
        yr.pad();
        auto px = [&](double x) { return left + (x - xr.lo) / (xr.hi - xr.lo) * (right - left); };
        auto py = [&](double y) { return bottom - (y - yr.lo) / (yr.hi - yr.lo) * (bottom - top); };

        out << "<text x=\"" << (left + right) / 2 << "\" y=\"" << top - 12
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << panel.title
            << "</text>\n";

        // frame and ticks
        out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << right - left << "\" height=\""
            << bottom - top << "\" fill=\"none\" stroke=\"#444\"/>\n";
        for (int tick = 0; tick <= 4; ++tick) {
            const double xv = xr.lo + (xr.hi - xr.lo) * tick / 4.0;
            const double yv = yr.lo + (yr.hi - yr.lo) * tick / 4.0;
            const double xp = px(xv);
            const double yp = py(yv);
            out << "<line x1=\"" << xp << "\" y1=\"" << bottom << "\" x2=\"" << xp << "\" y2=\""
                << bottom + 4 << "\" stroke=\"#444\"/>\n";
            out << "<text x=\"" << xp << "\" y=\"" << bottom + 17
                << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << fmt(xv)
                << "</text>\n";
            out << "<line x1=\"" << left - 4 << "\" y1=\"" << yp << "\" x2=\"" << left << "\" y2=\"" << yp
                << "\" stroke=\"#444\"/>\n";
            out << "<text x=\"" << left - 7 << "\" y=\"" << yp + 3
                << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << fmt(yv)
                << "</text>\n";
        }
        out << "<text x=\"" << (left + right) / 2 << "\" y=\"" << bottom + 34
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << panel.x_label
            << "</text>\n";
        out << "<text x=\"14\" y=\"" << (top + bottom) / 2
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\" transform=\"rotate(-90 14 "
            << (top + bottom) / 2 << ")\">" << panel.y_label << "</text>\n";

        for (std::size_t si = 0; si < panel.series.size(); ++si) {
            const auto& s = panel.series[si];
            if (s.points.empty()) continue;
            const char* color = kPalette[si % kPaletteSize];
            out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
            double prev_y = 0.0;
            for (std::size_t k = 0; k < s.points.size(); ++k) {
                const auto& [x, y] = s.points[k];
                if (s.staircase && k > 0) out << px(x) << ',' << py(prev_y) << ' ';
                out << px(x) << ',' << py(y) << ' ';
                prev_y = y;
            }
            out << "\"/>\n";
            // legend (first panel lists all series; repeated labels stay readable)
            const int ly = top + 14 + static_cast<int>(si) * 16;
            out << "<line x1=\"" << right + 8 << "\" y1=\"" << ly - 4 << "\" x2=\"" << right + 28
                << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
            out << "<text x=\"" << right + 32 << "\" y=\"" << ly
                << "\" font-family=\"sans-serif\" font-size=\"10\">" << s.label << "</text>\n";
        }
    }
    out << "</svg>\n";

    std::ofstream file(path);
    if (!file) throw ParseError("write_svg_chart: cannot open " + path);
    file << out.str();
}

}  // namespace caim
