#pragma once

#include <string>
#include <vector>

namespace drf {

struct Series {
    std::string name;
    std::vector<double> y;
};

// Minimal self-contained SVG writers for run diagnostics.
void svg_line_chart(const std::string& path, const std::string& title,
                    const std::vector<Series>& series, const std::string& x_label,
                    const std::string& y_label);

void svg_bar_chart(const std::string& path, const std::string& title,
                   const std::vector<std::string>& labels, const std::vector<double>& values,
                   const std::string& y_label);

}  // namespace drf
