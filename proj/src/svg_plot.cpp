#include "repgeom/svg_plot.hpp"

#include "repgeom/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace repgeom {

namespace {

constexpr std::array<const char*, 6> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", std::abs(v) < 1e-12 ? 0.0 : v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (const char c : s) {
        switch (c) {
            case '&':
                out += "&amp;";
                break;
            case '<':
                out += "&lt;";
                break;
            case '>':
                out += "&gt;";
                break;
            case '"':
                out += "&quot;";
                break;
            default:
                out += c;
        }
    }
    return out;
}

// "Nice" tick step covering [lo, hi] with about `target` intervals.
double nice_step(double lo, double hi, int target) {
    const double raw = (hi - lo) / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double frac = raw / mag;
    const double nice = frac <= 1.0 ? 1.0 : frac <= 2.0 ? 2.0 : frac <= 5.0 ? 5.0 : 10.0;
    return nice * mag;
}

}  // namespace

std::string render_svg(const LinePlot& plot) {
    double x_lo = std::numeric_limits<double>::infinity();
    double x_hi = -x_lo;
    double y_lo = x_lo;
    double y_hi = -x_lo;
    for (const auto& s : plot.series) {
        if (s.x.size() != s.y.size()) {
            throw Error("plot series '" + s.name + "' has mismatched x/y lengths");
        }
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            x_lo = std::min(x_lo, s.x[i]);
            x_hi = std::max(x_hi, s.x[i]);
            y_lo = std::min(y_lo, s.y[i]);
            y_hi = std::max(y_hi, s.y[i]);
        }
    }
    if (!std::isfinite(x_lo)) {
        x_lo = 0.0;
        x_hi = 1.0;
        y_lo = 0.0;
        y_hi = 1.0;
    }
    if (plot.y_min) {
        y_lo = *plot.y_min;
    }
    if (plot.y_max) {
        y_hi = *plot.y_max;
    }
    if (x_hi - x_lo < 1e-12) {
        x_lo -= 0.5;
        x_hi += 0.5;
    }
    if (y_hi - y_lo < 1e-12) {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    const double pad = 0.05 * (y_hi - y_lo);
    if (!plot.y_min) {
        y_lo -= pad;
    }
    if (!plot.y_max) {
        y_hi += pad;
    }

    const double left = 70.0;
    const double right = plot.width - 20.0;
    const double top = 40.0;
    const double bottom = plot.height - 55.0;
    const auto px = [&](double x) { return left + (x - x_lo) / (x_hi - x_lo) * (right - left); };
    const auto py = [&](double y) { return bottom - (y - y_lo) / (y_hi - y_lo) * (bottom - top); };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << plot.width << "\" height=\"" << plot.height
        << "\" viewBox=\"0 0 " << plot.width << ' ' << plot.height << "\" font-family=\"sans-serif\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << num(plot.width / 2.0) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
        << escape(plot.title) << "</text>\n";

    // axes
    svg << "<g stroke=\"black\" stroke-width=\"1\">\n";
    svg << "<line x1=\"" << num(left) << "\" y1=\"" << num(bottom) << "\" x2=\"" << num(right) << "\" y2=\""
        << num(bottom) << "\"/>\n";
    svg << "<line x1=\"" << num(left) << "\" y1=\"" << num(top) << "\" x2=\"" << num(left) << "\" y2=\""
        << num(bottom) << "\"/>\n";
    svg << "</g>\n";

    svg << "<g font-size=\"11\" fill=\"black\">\n";
    const double xs = nice_step(x_lo, x_hi, 5);
    for (double t = std::ceil(x_lo / xs) * xs; t <= x_hi + 1e-9 * xs; t += xs) {
        svg << "<line x1=\"" << num(px(t)) << "\" y1=\"" << num(bottom) << "\" x2=\"" << num(px(t)) << "\" y2=\""
            << num(bottom + 5) << "\" stroke=\"black\"/>";
        svg << "<text x=\"" << num(px(t)) << "\" y=\"" << num(bottom + 18) << "\" text-anchor=\"middle\">"
            << tick_label(t) << "</text>\n";
    }
    const double ys = nice_step(y_lo, y_hi, 5);
    for (double t = std::ceil(y_lo / ys) * ys; t <= y_hi + 1e-9 * ys; t += ys) {
        svg << "<line x1=\"" << num(left - 5) << "\" y1=\"" << num(py(t)) << "\" x2=\"" << num(left) << "\" y2=\""
            << num(py(t)) << "\" stroke=\"black\"/>";
        svg << "<text x=\"" << num(left - 8) << "\" y=\"" << num(py(t) + 4) << "\" text-anchor=\"end\">"
            << tick_label(t) << "</text>\n";
    }
    svg << "</g>\n";
    svg << "<text x=\"" << num((left + right) / 2) << "\" y=\"" << num(plot.height - 15.0)
        << "\" text-anchor=\"middle\" font-size=\"13\">" << escape(plot.x_label) << "</text>\n";
    svg << "<text x=\"18\" y=\"" << num((top + bottom) / 2) << "\" text-anchor=\"middle\" font-size=\"13\" "
        << "transform=\"rotate(-90 18 " << num((top + bottom) / 2) << ")\">" << escape(plot.y_label) << "</text>\n";

    if (plot.marker_x) {
        svg << "<line x1=\"" << num(px(*plot.marker_x)) << "\" y1=\"" << num(top) << "\" x2=\""
            << num(px(*plot.marker_x)) << "\" y2=\"" << num(bottom)
            << "\" stroke=\"gray\" stroke-dasharray=\"5,4\"/>\n";
    }

    for (std::size_t s = 0; s < plot.series.size(); ++s) {
        const auto& series = plot.series[s];
        const char* color = kPalette[s % kPalette.size()];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < series.x.size(); ++i) {
            svg << (i ? " " : "") << num(px(series.x[i])) << ',' << num(py(series.y[i]));
        }
        svg << "\"/>\n";
        for (std::size_t i = 0; i < series.x.size(); ++i) {
            svg << "<circle cx=\"" << num(px(series.x[i])) << "\" cy=\"" << num(py(series.y[i]))
                << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        }
        if (!series.name.empty()) {
            const double ly = top + 14.0 * static_cast<double>(s);
            svg << "<text x=\"" << num(right - 4) << "\" y=\"" << num(ly + 4) << "\" text-anchor=\"end\" "
                << "font-size=\"11\" fill=\"" << color << "\">" << escape(series.name) << "</text>\n";
        }
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace repgeom
