#include "dendrostate/stats.hpp"

#include <algorithm>
#include <cmath>

#include "dendrostate/errors.hpp"

namespace dendrostate {

double mean(std::span<const double> xs) {
  if (xs.empty()) throw NumericError("mean of empty range");
  double s = 0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  double m = mean(xs);
  double s = 0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

double sample_sd(std::span<const double> xs) { return std::sqrt(sample_variance(xs)); }

double quantile_lower(std::vector<double> xs, double q) {
  if (xs.empty()) throw NumericError("quantile of empty range");
  if (!(q > 0.0 && q < 1.0)) throw NumericError("quantile level must be in (0,1)");
  std::sort(xs.begin(), xs.end());
  auto n = xs.size();
  std::size_t idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
  if (idx < 1) idx = 1;
  if (idx > n) idx = n;
  return xs[idx - 1];
}

double quantile_linear(std::vector<double> xs, double q) {
  if (xs.empty()) throw NumericError("quantile of empty range");
  if (q < 0.0 || q > 1.0) throw NumericError("quantile level must be in [0,1]");
  std::sort(xs.begin(), xs.end());
  auto n = xs.size();
  if (n == 1) return xs[0];
  double h = q * static_cast<double>(n - 1);
  std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo >= n - 1) return xs[n - 1];
  double frac = h - static_cast<double>(lo);
  return xs[lo] + frac * (xs[lo + 1] - xs[lo]);
}

double median(std::vector<double> xs) { return quantile_linear(std::move(xs), 0.5); }

}  // namespace dendrostate
