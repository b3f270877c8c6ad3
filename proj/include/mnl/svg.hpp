#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "mnl/base.hpp"
#include "mnl/linalg.hpp"

namespace mnl {

// Small SVG plotter: line charts and box plots, enough for the experiment
// figures. Output is deterministic for deterministic input.

struct PlotSeries {
    std::string label;
    Vec x;
    Vec y;
    std::string color = "#1f6fb4";
    bool dashed = false;
};

struct BoxStats {
    std::string label;
    double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

namespace detail {

inline std::string fmt_coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

struct AxisMap {
    double x_min, x_max, y_min, y_max;
    double px, py, pw, ph;  // plot viewport in pixels

    double mx(double x) const {
        double r = x_max - x_min;
        if (r == 0.0) r = 1.0;
        return px + (x - x_min) / r * pw;
    }
    double my(double y) const {
        double r = y_max - y_min;
        if (r == 0.0) r = 1.0;
        return py + (1.0 - (y - y_min) / r) * ph;
    }
};

inline void emit_frame(std::ostringstream& svg, const AxisMap& m, const std::string& title) {
    svg << "  <rect x=\"" << fmt_coord(m.px) << "\" y=\"" << fmt_coord(m.py) << "\" width=\""
        << fmt_coord(m.pw) << "\" height=\"" << fmt_coord(m.ph)
        << "\" fill=\"none\" stroke=\"#444444\" stroke-width=\"1\"/>\n";
    svg << "  <text x=\"" << fmt_coord(m.px + m.pw / 2) << "\" y=\"" << fmt_coord(m.py - 10)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" << title
        << "</text>\n";
    // axis extent labels
    svg << "  <text x=\"" << fmt_coord(m.px) << "\" y=\"" << fmt_coord(m.py + m.ph + 16)
        << "\" font-family=\"sans-serif\" font-size=\"10\">" << fmt_coord(m.x_min) << "</text>\n";
    svg << "  <text x=\"" << fmt_coord(m.px + m.pw) << "\" y=\"" << fmt_coord(m.py + m.ph + 16)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << fmt_coord(m.x_max)
        << "</text>\n";
    svg << "  <text x=\"" << fmt_coord(m.px - 4) << "\" y=\"" << fmt_coord(m.py + m.ph)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << fmt_coord(m.y_min)
        << "</text>\n";
    svg << "  <text x=\"" << fmt_coord(m.px - 4) << "\" y=\"" << fmt_coord(m.py + 10)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << fmt_coord(m.y_max)
        << "</text>\n";
}

}  // namespace detail

/// Writes a line chart of the given series to an SVG file.
inline void write_line_plot(const std::string& path, const std::string& title,
                            const std::vector<PlotSeries>& series, int width = 720, int height = 480) {
    double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
    double y_min = x_min, y_max = -x_min;
    for (const PlotSeries& s : series) {
        for (double v : s.x) {
            x_min = std::min(x_min, v);
            x_max = std::max(x_max, v);
        }
        for (double v : s.y) {
            y_min = std::min(y_min, v);
            y_max = std::max(y_max, v);
        }
    }
    if (!(x_min <= x_max)) { x_min = 0.0; x_max = 1.0; }
    if (!(y_min <= y_max)) { y_min = 0.0; y_max = 1.0; }
    const double pad_y = 0.05 * std::max(y_max - y_min, 1e-12);
    detail::AxisMap m{x_min, x_max, y_min - pad_y, y_max + pad_y,
                      60.0, 40.0, width - 90.0, height - 100.0};

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    svg << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    detail::emit_frame(svg, m, title);
    double legend_y = m.py + 14;
    for (const PlotSeries& s : series) {
        svg << "  <polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\"";
        if (s.dashed) svg << " stroke-dasharray=\"6,4\"";
        svg << " points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (i) svg << " ";
            svg << detail::fmt_coord(m.mx(s.x[i])) << "," << detail::fmt_coord(m.my(s.y[i]));
        }
        svg << "\"/>\n";
        svg << "  <text x=\"" << detail::fmt_coord(m.px + m.pw - 6) << "\" y=\""
            << detail::fmt_coord(legend_y) << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
            << "font-size=\"11\" fill=\"" << s.color << "\">" << s.label << "</text>\n";
        legend_y += 14;
    }
    svg << "</svg>\n";

    std::ofstream out(path);
    if (!out) fail("cannot write SVG file: " + path);
    out << svg.str();
}

/// Writes side-by-side box plots (min, quartiles, median, max whisker style).
inline void write_box_plot(const std::string& path, const std::string& title,
                           const std::vector<BoxStats>& boxes, int width = 480, int height = 480) {
    double y_min = std::numeric_limits<double>::infinity(), y_max = -y_min;
    for (const BoxStats& b : boxes) {
        y_min = std::min(y_min, b.min);
        y_max = std::max(y_max, b.max);
    }
    if (!(y_min <= y_max)) { y_min = 0.0; y_max = 1.0; }
    const double pad_y = 0.05 * std::max(y_max - y_min, 1e-12);
    detail::AxisMap m{0.0, static_cast<double>(boxes.size()), y_min - pad_y, y_max + pad_y,
                      60.0, 40.0, width - 90.0, height - 100.0};

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    svg << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    detail::emit_frame(svg, m, title);
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        const BoxStats& b = boxes[i];
        const double cx = m.mx(i + 0.5);
        const double half = 0.28 * m.pw / static_cast<double>(boxes.size());
        // whiskers
        svg << "  <line x1=\"" << detail::fmt_coord(cx) << "\" y1=\"" << detail::fmt_coord(m.my(b.min))
            << "\" x2=\"" << detail::fmt_coord(cx) << "\" y2=\"" << detail::fmt_coord(m.my(b.max))
            << "\" stroke=\"#444444\" stroke-width=\"1\"/>\n";
        for (double v : {b.min, b.max})
            svg << "  <line x1=\"" << detail::fmt_coord(cx - half / 2) << "\" y1=\""
                << detail::fmt_coord(m.my(v)) << "\" x2=\"" << detail::fmt_coord(cx + half / 2)
                << "\" y2=\"" << detail::fmt_coord(m.my(v)) << "\" stroke=\"#444444\" stroke-width=\"1\"/>\n";
        // interquartile box
        svg << "  <rect x=\"" << detail::fmt_coord(cx - half) << "\" y=\"" << detail::fmt_coord(m.my(b.q3))
            << "\" width=\"" << detail::fmt_coord(2 * half) << "\" height=\""
            << detail::fmt_coord(m.my(b.q1) - m.my(b.q3))
            << "\" fill=\"#9ecae8\" stroke=\"#1f6fb4\" stroke-width=\"1\"/>\n";
        // median
        svg << "  <line x1=\"" << detail::fmt_coord(cx - half) << "\" y1=\""
            << detail::fmt_coord(m.my(b.median)) << "\" x2=\"" << detail::fmt_coord(cx + half)
            << "\" y2=\"" << detail::fmt_coord(m.my(b.median))
            << "\" stroke=\"#b03030\" stroke-width=\"2\"/>\n";
        svg << "  <text x=\"" << detail::fmt_coord(cx) << "\" y=\"" << detail::fmt_coord(m.py + m.ph + 16)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << b.label
            << "</text>\n";
    }
    svg << "</svg>\n";

    std::ofstream out(path);
    if (!out) fail("cannot write SVG file: " + path);
    out << svg.str();
}

}  // namespace mnl
