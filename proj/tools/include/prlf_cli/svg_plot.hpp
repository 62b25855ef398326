#pragma once

#include <string>
#include <vector>

namespace prlf::cli {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> err;  // optional half-width error bars
};

// Line chart of F1 against missing rate; x in [0, 1], y auto-scaled.
std::string render_svg(const std::vector<Series>& series, const std::string& title, const std::string& x_label,
                       const std::string& y_label);

}  // namespace prlf::cli
