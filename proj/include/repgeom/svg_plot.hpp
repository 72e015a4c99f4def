#pragma once

#include <optional>
#include <string>
#include <vector>

namespace repgeom {

struct PlotSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

struct LinePlot {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<PlotSeries> series;
    std::optional<double> marker_x;  // dashed vertical line, e.g. the selected layer
    std::optional<double> y_min;     // fixed axis range instead of the data range
    std::optional<double> y_max;
    int width = 640;
    int height = 420;
};

/// Static SVG document: axes with ticks, one polyline plus point markers per series.
std::string render_svg(const LinePlot& plot);

}  // namespace repgeom
