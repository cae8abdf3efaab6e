#include "esrstm/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "esrstm/errors.hpp"

namespace esrstm::svg {

namespace {

constexpr double kWidth = 800.0, kHeight = 500.0;
constexpr double kLeft = 70.0, kRight = 20.0, kTop = 40.0, kBottom = 50.0;

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string num(double v) {
    std::ostringstream s;
    s.precision(6);
    s << v;
    return s.str();
}

} // namespace

std::string render_plot(std::span<const Series> series, const std::string& title,
                        const std::string& x_label, const std::string& y_label) {
    double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
    double y_min = x_min, y_max = -x_min;
    std::size_t finite = 0;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            x_min = std::min(x_min, s.x[i]);
            x_max = std::max(x_max, s.x[i]);
            y_min = std::min(y_min, s.y[i]);
            y_max = std::max(y_max, s.y[i]);
            ++finite;
        }
    }
    if (finite < 2) throw DomainError("plot needs at least two finite points");
    if (x_max == x_min) { x_max += 1.0; x_min -= 1.0; }
    if (y_max == y_min) { y_max += 1.0; y_min -= 1.0; }
    const double y_pad = 0.05 * (y_max - y_min);
    y_min -= y_pad;
    y_max += y_pad;

    const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
    const auto px = [&](double x) { return kLeft + (x - x_min) / (x_max - x_min) * pw; };
    const auto py = [&](double y) { return kTop + (y_max - y) / (y_max - y_min) * ph; };

    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"16\">" << escape(title) << "</text>\n";

    // Frame and tick labels (min / max on each axis).
    out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\""
        << ph << "\" fill=\"none\" stroke=\"#444\"/>\n";
    const auto tick = [&](double x, double y, const std::string& text, const char* anchor) {
        out << "<text x=\"" << x << "\" y=\"" << y << "\" text-anchor=\"" << anchor
            << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">" << escape(text)
            << "</text>\n";
    };
    tick(kLeft, kHeight - kBottom + 16, num(x_min), "start");
    tick(kWidth - kRight, kHeight - kBottom + 16, num(x_max), "end");
    tick(kLeft - 6, kHeight - kBottom, num(y_min), "end");
    tick(kLeft - 6, kTop + 10, num(y_max), "end");
    tick(kWidth / 2, kHeight - 12, x_label, "middle");
    out << "<text x=\"16\" y=\"" << kHeight / 2 << "\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"12\" fill=\"#333\" transform=\"rotate(-90 16 "
        << kHeight / 2 << ")\">" << escape(y_label) << "</text>\n";

    double legend_y = kTop + 16.0;
    for (const auto& s : series) {
        std::ostringstream pts;
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            pts << num(px(s.x[i])) << "," << num(py(s.y[i])) << " ";
        }
        if (!s.markers)
            out << "<polyline fill=\"none\" stroke=\"" << s.color
                << "\" stroke-width=\"1.5\" points=\"" << pts.str() << "\"/>\n";
        for (std::size_t i = 0; s.markers && i < std::min(s.x.size(), s.y.size()); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            out << "<circle cx=\"" << num(px(s.x[i])) << "\" cy=\"" << num(py(s.y[i]))
                << "\" r=\"3\" fill=\"" << s.color << "\"/>\n";
        }
        if (!s.label.empty()) {
            out << "<rect x=\"" << kWidth - kRight - 150 << "\" y=\"" << legend_y - 9
                << "\" width=\"10\" height=\"10\" fill=\"" << s.color << "\"/>\n";
            tick(kWidth - kRight - 135, legend_y, s.label, "start");
            legend_y += 16.0;
        }
    }
    out << "</svg>\n";
    return out.str();
}

} // namespace esrstm::svg
