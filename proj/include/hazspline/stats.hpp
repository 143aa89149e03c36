#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

namespace hazspline {

/// Linear-interpolation quantile of already sorted values (R type 7).
double quantile_sorted(std::span<const double> sorted, double prob);

/// Type-7 quantile of unsorted values.
double quantile(std::span<const double> values, double prob);

double log_sum_exp(double a, double b);
double log_sum_exp(std::span<const double> values);

inline double normal_lpdf(double x, double mean, double sd) {
    const double z = (x - mean) / sd;
    return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

inline double gamma_lpdf(double x, double shape, double rate) {
    return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

inline double beta_lpdf(double x, double a, double b) {
    return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + (a - 1.0) * std::log(x) +
           (b - 1.0) * std::log1p(-x);
}

/// Logistic(location, scale) log density, stable for large |z|.
inline double logistic_lpdf(double x, double location, double scale) {
    const double z = std::abs((x - location) / scale);
    return -z - 2.0 * std::log1p(std::exp(-z)) - std::log(scale);
}

/// Binomial coefficient on the log scale, generalised to real n, r.
inline double log_choose(double n, double r) {
    return std::lgamma(n + 1.0) - std::lgamma(r + 1.0) - std::lgamma(n - r + 1.0);
}

inline double inv_logit(double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

}  // namespace hazspline
