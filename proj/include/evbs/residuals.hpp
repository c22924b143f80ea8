#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "evbs/regression.hpp"

namespace evbs {

struct ResidualSet {
  std::vector<double> r;       // observation order
  std::vector<double> sorted;  // ascending
  std::size_t clamped = 0;     // cdf values pushed into [1e-15, 1 - 1e-15]
};

ResidualSet make_residual_set(std::vector<double> r);

// r_i = Phi^-1(F(y_i; alpha, x_i'beta, gamma)). Deterministic: the response is continuous.
ResidualSet quantile_residuals(const FitResult& fit, const RegressionData& data);

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// P(K > lambda) for the Kolmogorov distribution.
double kolmogorov_sf(double lambda);

// One-sample KS against N(0, 1), asymptotic p-value at sqrt(n) * D. n >= 8.
TestResult ks_normal_test(std::span<const double> r);

// Royston's approximation (AS R94). 8 <= n <= 5000.
TestResult shapiro_wilk(std::span<const double> r);

struct Envelope {
  std::vector<double> theoretical;  // normal scores of the order statistics
  std::vector<double> lower, median, upper;
  std::size_t n_sim = 0;
  std::size_t diverged = 0;
  double level = 0.95;
};

// Simulates n_sim datasets from the fitted model, refits each from theta_hat
// and takes pointwise quantiles of the sorted residuals: the k-th smallest and
// k-th largest of the m successful refits, k = max(1, floor((m + 1)(1 - level) / 2)).
Envelope envelope(const FitResult& fit, const RegressionData& data, std::size_t n_sim = 100,
                  double level = 0.95, std::uint64_t seed = 20240101, const FitOptions& options = {});

}  // namespace evbs
