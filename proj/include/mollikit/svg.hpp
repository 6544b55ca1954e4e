#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

namespace mollikit {

// Deliberately small vector-graphics emitter: one polyline chart and one
// grayscale heatmap, enough to eyeball training curves, scans and heat fields.

namespace svg_detail {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

inline void minmax(const std::vector<double>& v, double& lo, double& hi) {
    for (double x : v) {
        if (!std::isfinite(x)) continue;
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
}

}  // namespace svg_detail

/// Line chart of one or more series sharing the x axis.
inline std::string svg_polyline_chart(const std::vector<double>& xs,
                                      const std::vector<std::vector<double>>& series,
                                      const std::string& title = "",
                                      int width = 640, int height = 420) {
    using svg_detail::num;
    const double ml = 60, mr = 15, mt = 30, mb = 40;
    double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
    double y_lo = x_lo, y_hi = -x_lo;
    svg_detail::minmax(xs, x_lo, x_hi);
    for (const auto& s : series) svg_detail::minmax(s, y_lo, y_hi);
    if (!(x_hi > x_lo)) { x_lo -= 0.5; x_hi += 0.5; }
    if (!(y_hi > y_lo)) { y_lo -= 0.5; y_hi += 0.5; }
    const double pw = width - ml - mr, ph = height - mt - mb;
    auto px = [&](double x) { return ml + (x - x_lo) / (x_hi - x_lo) * pw; };
    auto py = [&](double y) { return mt + (1.0 - (y - y_lo) / (y_hi - y_lo)) * ph; };

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
           "\" height=\"" + std::to_string(height) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<rect x=\"" + num(ml) + "\" y=\"" + num(mt) + "\" width=\"" + num(pw) +
           "\" height=\"" + num(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
    if (!title.empty())
        out += "<text x=\"" + num(width / 2.0) + "\" y=\"18\" text-anchor=\"middle\" "
               "font-family=\"monospace\" font-size=\"13\">" + title + "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const int gray = static_cast<int>(40 + 140.0 * k / std::max<std::size_t>(1, series.size()));
        out += "<polyline fill=\"none\" stroke=\"rgb(" + std::to_string(gray) + "," +
               std::to_string(gray) + "," + std::to_string(gray) + ")\" stroke-width=\"1.2\" points=\"";
        const auto& ys = series[k];
        const std::size_t n = std::min(xs.size(), ys.size());
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::isfinite(ys[i])) continue;
            out += num(px(xs[i])) + "," + num(py(ys[i])) + " ";
        }
        out += "\"/>\n";
    }
    auto label = [&](double x, double y, const std::string& t, const char* anchor) {
        out += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"" + anchor +
               "\" font-family=\"monospace\" font-size=\"11\">" + t + "</text>\n";
    };
    label(ml, height - mb + 16, num(x_lo), "middle");
    label(width - mr, height - mb + 16, num(x_hi), "middle");
    label(ml - 6, height - mb, num(y_lo), "end");
    label(ml - 6, mt + 10, num(y_hi), "end");
    out += "</svg>\n";
    return out;
}

/// Grayscale heatmap of a row-major matrix (rows stacked top to bottom).
inline std::string svg_heatmap(const std::vector<std::vector<double>>& rows,
                               const std::string& title = "",
                               int width = 640, int height = 420) {
    using svg_detail::num;
    const double ml = 20, mr = 15, mt = 30, mb = 15;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& r : rows) svg_detail::minmax(r, lo, hi);
    if (!(hi > lo)) { lo -= 0.5; hi += 0.5; }
    const double pw = width - ml - mr, ph = height - mt - mb;
    const std::size_t nr = rows.size();
    const std::size_t nc = nr ? rows[0].size() : 0;

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
           "\" height=\"" + std::to_string(height) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!title.empty())
        out += "<text x=\"" + num(width / 2.0) + "\" y=\"18\" text-anchor=\"middle\" "
               "font-family=\"monospace\" font-size=\"13\">" + title + "</text>\n";
    for (std::size_t i = 0; i < nr; ++i) {
        for (std::size_t j = 0; j < nc; ++j) {
            double v = rows[i][j];
            if (!std::isfinite(v)) v = lo;
            const int g = static_cast<int>(255.0 * (v - lo) / (hi - lo));
            out += "<rect x=\"" + num(ml + j * pw / nc) + "\" y=\"" + num(mt + i * ph / nr) +
                   "\" width=\"" + num(pw / nc + 0.5) + "\" height=\"" + num(ph / nr + 0.5) +
                   "\" fill=\"rgb(" + std::to_string(g) + "," + std::to_string(g) + "," +
                   std::to_string(g) + ")\"/>\n";
        }
    }
    out += "</svg>\n";
    return out;
}

}  // namespace mollikit
