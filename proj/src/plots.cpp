#include "plots.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "errors.hpp"

namespace drf {

namespace {

constexpr double kW = 640, kH = 400;
constexpr double kL = 70, kR = 20, kT = 40, kB = 50;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::ofstream open_svg(const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write '" + path + "'");
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
       << "\" viewBox=\"0 0 " << kW << " " << kH << "\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    return os;
}

void axes(std::ofstream& os, const std::string& title, const std::string& x_label,
          const std::string& y_label, double y_min, double y_max) {
    os << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title
       << "</text>\n";
    os << "<line x1=\"" << kL << "\" y1=\"" << kH - kB << "\" x2=\"" << kW - kR << "\" y2=\""
       << kH - kB << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << kL << "\" y1=\"" << kT << "\" x2=\"" << kL << "\" y2=\"" << kH - kB
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 12
       << "\" text-anchor=\"middle\" font-size=\"12\">" << x_label << "</text>\n";
    os << "<text x=\"16\" y=\"" << kH / 2 << "\" font-size=\"12\" text-anchor=\"middle\" "
       << "transform=\"rotate(-90 16 " << kH / 2 << ")\">" << y_label << "</text>\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4g", y_min);
    os << "<text x=\"" << kL - 6 << "\" y=\"" << kH - kB << "\" text-anchor=\"end\" font-size=\"11\">"
       << buf << "</text>\n";
    std::snprintf(buf, sizeof(buf), "%.4g", y_max);
    os << "<text x=\"" << kL - 6 << "\" y=\"" << kT + 10
       << "\" text-anchor=\"end\" font-size=\"11\">" << buf << "</text>\n";
}

}  // namespace

void svg_line_chart(const std::string& path, const std::string& title,
                    const std::vector<Series>& series, const std::string& x_label,
                    const std::string& y_label) {
    size_t n = 0;
    double y_min = 0.0, y_max = 1.0;
    bool first = true;
    for (const auto& s : series) {
        n = std::max(n, s.y.size());
        for (double v : s.y) {
            if (!std::isfinite(v)) continue;
            if (first) {
                y_min = y_max = v;
                first         = false;
            }
            y_min = std::min(y_min, v);
            y_max = std::max(y_max, v);
        }
    }
    if (y_max == y_min) y_max = y_min + 1.0;

    auto os = open_svg(path);
    axes(os, title, x_label, y_label, y_min, y_max);

    int color = 0;
    double legend_y = kT + 8;
    for (const auto& s : series) {
        const char* col = kPalette[color % 6];
        os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
        for (size_t i = 0; i < s.y.size(); ++i) {
            const double x = kL + (n > 1 ? double(i) / double(n - 1) : 0.5) * (kW - kL - kR);
            const double y = kH - kB - (s.y[i] - y_min) / (y_max - y_min) * (kH - kT - kB);
            os << x << "," << y << " ";
        }
        os << "\"/>\n";
        os << "<text x=\"" << kW - kR - 4 << "\" y=\"" << legend_y << "\" text-anchor=\"end\" "
           << "font-size=\"11\" fill=\"" << col << "\">" << s.name << "</text>\n";
        legend_y += 14;
        ++color;
    }
    os << "</svg>\n";
}

void svg_bar_chart(const std::string& path, const std::string& title,
                   const std::vector<std::string>& labels, const std::vector<double>& values,
                   const std::string& y_label) {
    double y_max = 0.0;
    for (double v : values)
        if (std::isfinite(v)) y_max = std::max(y_max, v);
    if (y_max == 0.0) y_max = 1.0;

    auto os = open_svg(path);
    axes(os, title, "", y_label, 0.0, y_max);

    const size_t n  = values.size();
    const double bw = (kW - kL - kR) / std::max<size_t>(n, 1);
    for (size_t i = 0; i < n; ++i) {
        const double h = std::isfinite(values[i]) ? values[i] / y_max * (kH - kT - kB) : 0.0;
        const double x = kL + double(i) * bw + bw * 0.15;
        os << "<rect x=\"" << x << "\" y=\"" << kH - kB - h << "\" width=\"" << bw * 0.7
           << "\" height=\"" << h << "\" fill=\"" << kPalette[i % 6] << "\"/>\n";
        os << "<text x=\"" << x + bw * 0.35 << "\" y=\"" << kH - kB + 14
           << "\" text-anchor=\"middle\" font-size=\"10\">"
           << (i < labels.size() ? labels[i] : "") << "</text>\n";
    }
    os << "</svg>\n";
}

}  // namespace drf
