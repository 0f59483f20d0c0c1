#pragma once

#include <string>
#include <utility>
#include <vector>

namespace qtokens::svg {

struct Range {
    double lo = 0.0;
    double hi = 1.0;
};

/// Expands [lo, hi] outward to multiples of a 1/2/5 x 10^k step and returns
/// the range with that step.
std::pair<Range, double> nice_range(double lo, double hi, int target_ticks = 6);

/// Minimal static line/scatter chart. Output is self-contained SVG 1.1.
class Chart {
public:
    Chart(std::string title, std::string x_label, std::string y_label, Range x, Range y, double x_step, double y_step);

    void scatter(const std::vector<std::pair<double, double>>& pts, const std::string& color,
                 const std::string& series, double radius = 3.0);
    void line(const std::vector<std::pair<double, double>>& pts, const std::string& color, const std::string& series,
              bool dashed = false);
    /// Tick labels print 10^v instead of v.
    void set_log10_x(bool on) { log10_x_ = on; }

    std::string render() const;

private:
    double px(double x) const;
    double py(double y) const;

    std::string title_, x_label_, y_label_;
    Range x_, y_;
    double x_step_, y_step_;
    bool log10_x_ = false;
    std::vector<std::string> body_;
    std::vector<std::pair<std::string, std::string>> legend_;
};

std::string fmt(double v, int precision = 6);

}  // namespace qtokens::svg
