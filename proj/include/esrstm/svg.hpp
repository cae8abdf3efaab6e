#pragma once

#include <span>
#include <string>
#include <vector>

namespace esrstm::svg {

/// One curve: points plus draw style.
struct Series {
    std::vector<double> x;
    std::vector<double> y;
    std::string color = "#1f6fb2";
    bool markers = false; // draw circles at the points as well
    std::string label;
};

/// Render series into a self-contained SVG document with axes and tick
/// labels. Throws DomainError when no series has at least two finite
/// points.
std::string render_plot(std::span<const Series> series, const std::string& title,
                        const std::string& x_label, const std::string& y_label);

} // namespace esrstm::svg
