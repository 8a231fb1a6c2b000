#pragma once

#include <span>
#include <vector>

namespace dendrostate {

double mean(std::span<const double> xs);
// Sample (n-1) variance; 0 for fewer than two values.
double sample_variance(std::span<const double> xs);
double sample_sd(std::span<const double> xs);

// Lower-interpolation order statistic: the element at 1-based index
// ceil(q * n) of the sorted values. Deterministic quantile used for stand
// initiation years and climate thresholds.
double quantile_lower(std::vector<double> xs, double q);

// Linearly interpolated quantile (R type 7), used for posterior interval
// summaries from MCMC draws.
double quantile_linear(std::vector<double> xs, double q);

double median(std::vector<double> xs);

}  // namespace dendrostate
