#pragma once

#include <span>

namespace qtokens {

/// Product-moment correlation. Throws "undefined correlation" when either
/// input has zero variance; requires equal lengths of at least 2.
double pearson(std::span<const double> x, std::span<const double> y);

/// 1 - SSE/SStot of `predicted` against `observed`.
double r_squared(std::span<const double> predicted, std::span<const double> observed);

double mean(std::span<const double> x);

/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
double sample_stddev(std::span<const double> x);

}  // namespace qtokens
