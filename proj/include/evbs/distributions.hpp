#pragma once

#include <cstddef>
#include <limits>
#include <string_view>
#include <vector>

#include "evbs/rng.hpp"

namespace evbs {

// |gamma| below this routes to the Gumbel branch.
inline constexpr double kGammaBranchThreshold = 1e-10;

struct GevParams {
  double mu = 0.0;
  double sigma = 1.0;
  double gamma = 0.0;
};

struct EvbsParams {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 0.0;
};

struct LogEvbsParams {
  double alpha = 1.0;
  double eta = 0.0;
  double gamma = 0.0;
};

struct Interval {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

enum class ShapeRegime {
  increasing_on_interval,   // gamma < -1
  two_critical_points,      // gamma = -1, alpha >= 4
  strictly_increasing,      // gamma = -1, alpha < 4
  local_max_at_eta,         // gamma = 0, alpha < 2
  local_min_at_eta,         // gamma = 0, alpha > 2
  boundary,                 // gamma = 0, alpha = 2
  unclassified,
};

std::string_view to_string(ShapeRegime r);

struct ShapeReport {
  ShapeRegime regime = ShapeRegime::unclassified;
  std::vector<double> critical_points;  // log scale, ascending
};

// Log-density of the standard GEV at z and its partial derivatives in
// (z, gamma). Written through a = log1p(gamma z) / gamma, whose gamma
// derivatives use a power series when |gamma z| is small, so the whole
// kernel is smooth across gamma = 0.
struct GevKernel {
  bool feasible = false;  // 1 + gamma z > 0
  double w = 1.0;         // 1 + gamma z
  double a = 0.0;         // log1p(gamma z) / gamma
  double p = 0.0;         // exp(-a) = w^(-1/gamma)
  double logpdf = -std::numeric_limits<double>::infinity();
  double d_z = 0.0, d_zz = 0.0;
  double d_g = 0.0, d_zg = 0.0, d_gg = 0.0;
};

GevKernel gev_log_kernel(double z, double gamma);

// Standard GEV cdf G_gamma(z), with the 0/1 plateaus outside the support.
double gev_standard_cdf(double z, double gamma);
// Inverse of gev_standard_cdf on (0, 1).
double gev_standard_quantile(double u, double gamma);

double gev_cdf(double x, const GevParams& p);
double gev_pdf(double x, const GevParams& p);
std::vector<double> gev_sample(std::size_t n, const GevParams& p, Rng& rng);

double evbs_cdf(double t, const EvbsParams& p);
double evbs_pdf(double t, const EvbsParams& p);
// T = beta * exp(2 asinh(alpha X / 2)), X ~ GEV(0, 1, gamma).
double evbs_from_gev(double x, const EvbsParams& p);
std::vector<double> evbs_sample(std::size_t n, const EvbsParams& p, Rng& rng);

double logevbs_logpdf(double y, const LogEvbsParams& p);
double logevbs_pdf(double y, const LogEvbsParams& p);
double logevbs_cdf(double y, const LogEvbsParams& p);
double logevbs_quantile(double u, const LogEvbsParams& p);
std::vector<double> logevbs_sample(std::size_t n, const LogEvbsParams& p, Rng& rng);
Interval logevbs_support(const LogEvbsParams& p);

// order 1: E[T] finite iff gamma < 1/2; order 2: E[T^2] finite iff gamma < 1/4.
bool moment_exists(int order, double gamma);

ShapeReport classify_pdf_shape(const LogEvbsParams& p);

}  // namespace evbs
