#pragma once

#include <string>
#include <vector>

namespace tectum::svg {

struct BarPanel {
    std::string title;
    std::string y_label;
    std::vector<std::string> labels;
    std::vector<double> values;
};

struct LineSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

struct LinePanel {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<LineSeries> series;
};

/// Panels laid out left to right; bars may be negative.
std::string bar_chart(const std::vector<BarPanel> &panels);

std::string line_chart(const std::vector<LinePanel> &panels);

/// Escapes &, <, > and quotes for text nodes and attributes.
std::string escape(const std::string &s);

} // namespace tectum::svg
