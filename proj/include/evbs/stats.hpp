#pragma once

#include <span>
#include <vector>

namespace evbs {

double normal_cdf(double x);
double normal_sf(double x);  // upper tail
double normal_quantile(double p);

double mean(std::span<const double> v);
// n - 1 denominator.
double sample_sd(std::span<const double> v);
double median(std::span<const double> v);
// Inverse of the empirical cdf: the ceil(p * n)-th order statistic.
double quantile_inverse_ecdf(std::span<const double> sorted, double p);

}  // namespace evbs
