#include "qtokens/svg.hpp"

#include <cmath>
#include <algorithm>
#include <cstdio>

namespace qtokens::svg {
namespace {

constexpr double kWidth = 720, kHeight = 540;
constexpr double kLeft = 80, kRight = 190, kTop = 50, kBottom = 70;

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

}  // namespace

std::string fmt(double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    return buf;
}

std::pair<Range, double> nice_range(double lo, double hi, int target_ticks) {
    if (!(hi > lo)) {
        const double pad = lo == 0.0 ? 1.0 : std::abs(lo) * 0.1;
        lo -= pad;
        hi += pad;
    }
    const double raw = (hi - lo) / std::max(1, target_ticks);
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
        step = m * mag;
        if (step >= raw) break;
    }
    // Round to the step grid, tolerating representation error at the edges.
    const double a = std::floor(lo / step + 1e-9) * step;
    const double b = std::ceil(hi / step - 1e-9) * step;
    return {{a, b}, step};
}

Chart::Chart(std::string title, std::string x_label, std::string y_label, Range x, Range y, double x_step,
             double y_step)
    : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)), x_(x), y_(y),
      x_step_(x_step), y_step_(y_step) {}

double Chart::px(double x) const { return kLeft + (x - x_.lo) / (x_.hi - x_.lo) * (kWidth - kLeft - kRight); }
double Chart::py(double y) const { return kHeight - kBottom - (y - y_.lo) / (y_.hi - y_.lo) * (kHeight - kTop - kBottom); }

void Chart::scatter(const std::vector<std::pair<double, double>>& pts, const std::string& color,
                    const std::string& series, double radius) {
    for (const auto& [x, y] : pts) {
        body_.push_back("<circle class=\"point\" cx=\"" + fmt(px(x)) + "\" cy=\"" + fmt(py(y)) + "\" r=\"" +
                        fmt(radius) + "\" fill=\"" + color + "\" fill-opacity=\"0.7\"/>");
    }
    legend_.emplace_back(series, color);
}

void Chart::line(const std::vector<std::pair<double, double>>& pts, const std::string& color,
                 const std::string& series, bool dashed) {
    if (pts.size() < 2) return;
    std::string d;
    for (const auto& [x, y] : pts) d += (d.empty() ? "" : " ") + fmt(px(x)) + "," + fmt(py(y));
    body_.push_back("<polyline class=\"curve\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"" +
                    (dashed ? " stroke-dasharray=\"6,4\"" : "") + " points=\"" + d + "\"/>");
    legend_.emplace_back(series, color);
}

std::string Chart::render() const {
    std::string s;
    s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kWidth) + "\" height=\"" + fmt(kHeight) +
         "\" viewBox=\"0 0 " + fmt(kWidth) + " " + fmt(kHeight) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<text x=\"" + fmt(kWidth / 2) + "\" y=\"28\" text-anchor=\"middle\" font-size=\"15\">" + escape(title_) +
         "</text>\n";
    s += "<g class=\"axes\" data-x-min=\"" + fmt(x_.lo) + "\" data-x-max=\"" + fmt(x_.hi) + "\" data-y-min=\"" +
         fmt(y_.lo) + "\" data-y-max=\"" + fmt(y_.hi) + "\" stroke=\"#333\">\n";
    s += "<line x1=\"" + fmt(kLeft) + "\" y1=\"" + fmt(kHeight - kBottom) + "\" x2=\"" + fmt(kWidth - kRight) +
         "\" y2=\"" + fmt(kHeight - kBottom) + "\"/>\n";
    s += "<line x1=\"" + fmt(kLeft) + "\" y1=\"" + fmt(kTop) + "\" x2=\"" + fmt(kLeft) + "\" y2=\"" +
         fmt(kHeight - kBottom) + "\"/>\n";
    const int nx = static_cast<int>(std::lround((x_.hi - x_.lo) / x_step_));
    for (int i = 0; i <= nx; ++i) {
        const double v = x_.lo + i * x_step_;
        const std::string label = log10_x_ ? "1e" + fmt(v, 3) : fmt(v, 4);
        s += "<line x1=\"" + fmt(px(v)) + "\" y1=\"" + fmt(kHeight - kBottom) + "\" x2=\"" + fmt(px(v)) +
             "\" y2=\"" + fmt(kHeight - kBottom + 5) + "\"/>";
        s += "<text stroke=\"none\" x=\"" + fmt(px(v)) + "\" y=\"" + fmt(kHeight - kBottom + 20) +
             "\" text-anchor=\"middle\">" + label + "</text>\n";
    }
    const int ny = static_cast<int>(std::lround((y_.hi - y_.lo) / y_step_));
    for (int i = 0; i <= ny; ++i) {
        const double v = y_.lo + i * y_step_;
        s += "<line x1=\"" + fmt(kLeft - 5) + "\" y1=\"" + fmt(py(v)) + "\" x2=\"" + fmt(kLeft) + "\" y2=\"" +
             fmt(py(v)) + "\"/>";
        s += "<text stroke=\"none\" x=\"" + fmt(kLeft - 8) + "\" y=\"" + fmt(py(v) + 4) +
             "\" text-anchor=\"end\">" + fmt(v, 4) + "</text>\n";
    }
    s += "</g>\n";
    s += "<text x=\"" + fmt((kLeft + kWidth - kRight) / 2) + "\" y=\"" + fmt(kHeight - 25) +
         "\" text-anchor=\"middle\">" + escape(x_label_) + "</text>\n";
    s += "<text transform=\"translate(22," + fmt((kTop + kHeight - kBottom) / 2) +
         ") rotate(-90)\" text-anchor=\"middle\">" + escape(y_label_) + "</text>\n";
    s += "<g class=\"data\">\n";
    for (const auto& b : body_) s += b + "\n";
    s += "</g>\n<g class=\"legend\">\n";
    double ly = kTop + 10;
    std::vector<std::string> seen;
    for (const auto& [name, color] : legend_) {
        if (name.empty() || std::find(seen.begin(), seen.end(), name) != seen.end()) continue;
        seen.push_back(name);
        s += "<rect x=\"" + fmt(kWidth - kRight + 15) + "\" y=\"" + fmt(ly - 9) + "\" width=\"10\" height=\"10\" fill=\"" +
             color + "\"/><text x=\"" + fmt(kWidth - kRight + 30) + "\" y=\"" + fmt(ly) + "\">" + escape(name) +
             "</text>\n";
        ly += 18;
    }
    s += "</g>\n</svg>\n";
    return s;
}

}  // namespace qtokens::svg
