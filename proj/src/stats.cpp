#include "qtokens/stats.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qtokens/error.hpp"

namespace qtokens {
namespace {

void check_pair(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw Error("length mismatch: " + std::to_string(x.size()) + " vs " + std::to_string(y.size()));
    if (x.size() < 2) throw Error("need at least 2 values");
}

}  // namespace

double mean(std::span<const double> x) {
    if (x.empty()) throw Error("mean of empty sequence");
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

double sample_stddev(std::span<const double> x) {
    if (x.size() < 2) return 0.0;
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

double pearson(std::span<const double> x, std::span<const double> y) {
    check_pair(x, y);
    const double mx = mean(x);
    const double my = mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) throw Error("undefined correlation: zero variance");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double r_squared(std::span<const double> predicted, std::span<const double> observed) {
    check_pair(predicted, observed);
    const double m = mean(observed);
    double sse = 0.0, sst = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        sse += (observed[i] - predicted[i]) * (observed[i] - predicted[i]);
        sst += (observed[i] - m) * (observed[i] - m);
    }
    if (!(sst > 0.0)) throw Error("r_squared undefined: observed values have zero variance");
    return 1.0 - sse / sst;
}

}  // namespace qtokens
