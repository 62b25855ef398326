#include "prlf_cli/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace prlf::cli {
namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 170, kTop = 40, kBottom = 60;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string render_svg(const std::vector<Series>& series, const std::string& title, const std::string& x_label,
                       const std::string& y_label) {
    double y_min = 1.0, y_max = 0.0;
    for (const Series& s : series)
        for (std::size_t i = 0; i < s.y.size(); ++i) {
            const double e = i < s.err.size() ? s.err[i] : 0.0;
            y_min = std::min(y_min, s.y[i] - e);
            y_max = std::max(y_max, s.y[i] + e);
        }
    if (y_min > y_max) y_min = 0.0, y_max = 1.0;
    y_min = std::floor(y_min * 10.0) / 10.0;
    y_max = std::ceil(y_max * 10.0) / 10.0;
    if (y_max - y_min < 0.1) y_max = y_min + 0.1;

    const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
    auto px = [&](double x) { return kLeft + x * pw; };
    auto py = [&](double y) { return kTop + (1.0 - (y - y_min) / (y_max - y_min)) * ph; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
        << escape(title) << "</text>\n";
    for (int i = 0; i <= 10; ++i) {
        const double x = i / 10.0;
        svg << "<line x1=\"" << num(px(x)) << "\" y1=\"" << num(kTop + ph) << "\" x2=\"" << num(px(x)) << "\" y2=\""
            << num(kTop + ph + 5) << "\" stroke=\"black\"/>";
        svg << "<text x=\"" << num(px(x)) << "\" y=\"" << num(kTop + ph + 18) << "\" text-anchor=\"middle\">"
            << num(x).substr(0, 3) << "</text>\n";
    }
    const int y_ticks = static_cast<int>(std::lround((y_max - y_min) * 10.0));
    for (int i = 0; i <= y_ticks; ++i) {
        const double y = y_min + i / 10.0;
        svg << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(py(y)) << "\" x2=\"" << num(kLeft + pw) << "\" y2=\""
            << num(py(y)) << "\" stroke=\"#dddddd\"/>";
        svg << "<text x=\"" << num(kLeft - 8) << "\" y=\"" << num(py(y) + 4) << "\" text-anchor=\"end\">"
            << num(y) << "</text>\n";
    }
    svg << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(pw) << "\" height=\""
        << num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 15) << "\" text-anchor=\"middle\">"
        << escape(x_label) << "</text>\n";
    svg << "<text transform=\"translate(18," << num(kTop + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
        << escape(y_label) << "</text>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const Series& s = series[k];
        const char* color = kColors[k % std::size(kColors)];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) svg << (i ? " " : "") << num(px(s.x[i])) << ',' << num(py(s.y[i]));
        svg << "\"/>\n";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            svg << "<circle cx=\"" << num(px(s.x[i])) << "\" cy=\"" << num(py(s.y[i])) << "\" r=\"3\" fill=\""
                << color << "\"/>";
            if (i < s.err.size() && s.err[i] > 0.0)
                svg << "<line x1=\"" << num(px(s.x[i])) << "\" y1=\"" << num(py(s.y[i] - s.err[i])) << "\" x2=\""
                    << num(px(s.x[i])) << "\" y2=\"" << num(py(s.y[i] + s.err[i])) << "\" stroke=\"" << color
                    << "\"/>";
        }
        svg << '\n';
        const double ly = kTop + 10 + 20.0 * static_cast<double>(k);
        svg << "<line x1=\"" << num(kLeft + pw + 12) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(kLeft + pw + 32)
            << "\" y2=\"" << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>";
        svg << "<text x=\"" << num(kLeft + pw + 38) << "\" y=\"" << num(ly + 4) << "\">" << escape(s.label)
            << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace prlf::cli
