#include "evbs/distributions.hpp"

#include <cmath>
#include <string>

#include "evbs/error.hpp"

namespace evbs {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_gamma(double gamma) {
  if (!std::isfinite(gamma)) throw Error(Errc::domain, "gamma must be finite");
}

void check(const GevParams& p) {
  if (!(p.sigma > 0.0) || !std::isfinite(p.sigma) || !std::isfinite(p.mu))
    throw Error(Errc::domain, "GEV: sigma must be positive and finite");
  check_gamma(p.gamma);
}

void check(const EvbsParams& p) {
  if (!(p.alpha > 0.0) || !std::isfinite(p.alpha)) throw Error(Errc::domain, "EVBS: alpha must be positive");
  if (!(p.beta > 0.0) || !std::isfinite(p.beta)) throw Error(Errc::domain, "EVBS: beta must be positive");
  check_gamma(p.gamma);
}

void check(const LogEvbsParams& p) {
  if (!(p.alpha > 0.0) || !std::isfinite(p.alpha)) throw Error(Errc::domain, "log-EVBS: alpha must be positive");
  if (!std::isfinite(p.eta)) throw Error(Errc::domain, "log-EVBS: eta must be finite");
  check_gamma(p.gamma);
}

bool gumbel_branch(double gamma) { return std::abs(gamma) < kGammaBranchThreshold; }

// log(cosh(u)) without overflow.
double log_cosh(double u) {
  const double a = std::abs(u);
  return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
}

}  // namespace

std::string_view to_string(ShapeRegime r) {
  switch (r) {
    case ShapeRegime::increasing_on_interval: return "increasing-on-interval";
    case ShapeRegime::two_critical_points: return "two-critical-points";
    case ShapeRegime::strictly_increasing: return "strictly-increasing";
    case ShapeRegime::local_max_at_eta: return "local-max-at-eta";
    case ShapeRegime::local_min_at_eta: return "local-min-at-eta";
    case ShapeRegime::boundary: return "boundary";
    case ShapeRegime::unclassified: return "unclassified";
  }
  return "unclassified";
}

GevKernel gev_log_kernel(double z, double gamma) {
  GevKernel k;
  if (!std::isfinite(z)) return k;
  const double w = 1.0 + gamma * z;
  k.w = w;
  if (!(w > 0.0)) return k;
  k.feasible = true;

  double a, a_g, a_gg;
  const double t = gamma * z;
  if (gumbel_branch(gamma)) {
    a = z;
    a_g = -0.5 * z * z;
    a_gg = 2.0 * z * z * z / 3.0;
  } else {
    a = std::log1p(t) / gamma;
    if (std::abs(t) < 0.1) {
      // a_g  = z^2 sum_{k>=2} (-1)^{k+1} (k-1)/k t^{k-2}
      // a_gg = z^3 sum_{k>=3} (-1)^{k+1} (k-1)(k-2)/k t^{k-3}
      double s1 = 0.0, s2 = 0.0, tp = 1.0;
      for (int m = 2; m < 60; ++m) {
        const double sign = (m % 2 == 0) ? -1.0 : 1.0;
        const double term = sign * (m - 1.0) / m * tp;
        s1 += term;
        if (std::abs(term) < 1e-18 * std::abs(s1)) break;
        tp *= t;
      }
      tp = 1.0;
      for (int m = 3; m < 60; ++m) {
        const double sign = (m % 2 == 0) ? -1.0 : 1.0;
        const double term = sign * (m - 1.0) * (m - 2.0) / m * tp;
        s2 += term;
        if (std::abs(term) < 1e-18 * std::abs(s2)) break;
        tp *= t;
      }
      a_g = z * z * s1;
      a_gg = z * z * z * s2;
    } else {
      a_g = (z / w - a) / gamma;
      a_gg = (-(z * z) / (w * w) - 2.0 * a_g) / gamma;
    }
  }

  const double p = std::exp(-a);
  k.a = a;
  k.p = p;
  k.logpdf = -(1.0 + gamma) * a - p;
  k.d_z = (p - (1.0 + gamma)) / w;
  k.d_zz = (1.0 + gamma) * (gamma - p) / (w * w);
  k.d_g = -z / w - a_g * (1.0 - p);
  k.d_gg = (z * z) / (w * w) - a_gg * (1.0 - p) - a_g * a_g * p;
  k.d_zg = (-p * a_g - 1.0) / w - (p - 1.0 - gamma) * z / (w * w);
  if (!std::isfinite(k.logpdf)) k.logpdf = -kInf;
  return k;
}

double gev_standard_cdf(double z, double gamma) {
  check_gamma(gamma);
  if (std::isnan(z)) throw Error(Errc::domain, "GEV cdf: NaN argument");
  if (gumbel_branch(gamma)) return std::exp(-std::exp(-z));
  const double w = 1.0 + gamma * z;
  if (!(w > 0.0)) return gamma > 0.0 ? 0.0 : 1.0;
  return std::exp(-std::exp(-std::log1p(gamma * z) / gamma));
}

double gev_standard_quantile(double u, double gamma) {
  check_gamma(gamma);
  if (!(u > 0.0 && u < 1.0)) throw Error(Errc::domain, "GEV quantile: u outside (0, 1)");
  const double e = -std::log(u);  // standard exponential
  if (gumbel_branch(gamma)) return -std::log(e);
  return std::expm1(-gamma * std::log(e)) / gamma;
}

double gev_cdf(double x, const GevParams& p) {
  check(p);
  return gev_standard_cdf((x - p.mu) / p.sigma, p.gamma);
}

double gev_pdf(double x, const GevParams& p) {
  check(p);
  const GevKernel k = gev_log_kernel((x - p.mu) / p.sigma, p.gamma);
  return k.feasible ? std::exp(k.logpdf) / p.sigma : 0.0;
}

std::vector<double> gev_sample(std::size_t n, const GevParams& p, Rng& rng) {
  check(p);
  std::vector<double> out(n);
  for (double& x : out) x = p.mu + p.sigma * gev_standard_quantile(rng.uniform(), p.gamma);
  return out;
}

double evbs_cdf(double t, const EvbsParams& p) {
  check(p);
  if (!(t > 0.0)) throw Error(Errc::domain, "EVBS cdf: t must be positive");
  const double r = std::sqrt(t / p.beta);
  const double at = (r - 1.0 / r) / p.alpha;
  return gev_standard_cdf(at, p.gamma);
}

double evbs_pdf(double t, const EvbsParams& p) {
  check(p);
  if (!(t > 0.0)) throw Error(Errc::domain, "EVBS pdf: t must be positive");
  const double u = t / p.beta;
  const double r = std::sqrt(u);
  const double at = (r - 1.0 / r) / p.alpha;
  const GevKernel k = gev_log_kernel(at, p.gamma);
  if (!k.feasible || !std::isfinite(k.logpdf)) return 0.0;
  // A_t = (1 / (2 alpha beta)) (u^-1/2 + u^-3/2), combined on the log scale
  // so that a huge A_t times a vanishing kernel does not give inf * 0.
  const double log_a = -std::log(2.0 * p.alpha * p.beta) - 0.5 * std::log(u) + std::log1p(1.0 / u);
  return std::exp(log_a + k.logpdf);
}

double evbs_from_gev(double x, const EvbsParams& p) {
  return p.beta * std::exp(2.0 * std::asinh(0.5 * p.alpha * x));
}

std::vector<double> evbs_sample(std::size_t n, const EvbsParams& p, Rng& rng) {
  check(p);
  std::vector<double> out(n);
  for (double& t : out) t = evbs_from_gev(gev_standard_quantile(rng.uniform(), p.gamma), p);
  return out;
}

double logevbs_logpdf(double y, const LogEvbsParams& p) {
  check(p);
  const double u = 0.5 * (y - p.eta);
  const double xi2 = (2.0 / p.alpha) * std::sinh(u);
  const GevKernel k = gev_log_kernel(xi2, p.gamma);
  if (!k.feasible) return -kInf;
  // log(xi1 / 2) = log(cosh u) - log(alpha)
  return log_cosh(u) - std::log(p.alpha) + k.logpdf;
}

double logevbs_pdf(double y, const LogEvbsParams& p) { return std::exp(logevbs_logpdf(y, p)); }

double logevbs_cdf(double y, const LogEvbsParams& p) {
  check(p);
  if (std::isnan(y)) throw Error(Errc::domain, "log-EVBS cdf: NaN argument");
  return gev_standard_cdf((2.0 / p.alpha) * std::sinh(0.5 * (y - p.eta)), p.gamma);
}

double logevbs_quantile(double u, const LogEvbsParams& p) {
  check(p);
  return p.eta + 2.0 * std::asinh(0.5 * p.alpha * gev_standard_quantile(u, p.gamma));
}

std::vector<double> logevbs_sample(std::size_t n, const LogEvbsParams& p, Rng& rng) {
  check(p);
  std::vector<double> out(n);
  for (double& y : out) y = logevbs_quantile(rng.uniform(), p);
  return out;
}

Interval logevbs_support(const LogEvbsParams& p) {
  check(p);
  if (gumbel_branch(p.gamma)) return {};
  const double bound = p.eta + 2.0 * std::asinh(-p.alpha / (2.0 * p.gamma));
  if (p.gamma > 0.0) return {bound, kInf};
  return {-kInf, bound};
}

bool moment_exists(int order, double gamma) {
  check_gamma(gamma);
  switch (order) {
    case 1: return gamma < 0.5;
    case 2: return gamma < 0.25;
    default:
      throw Error(Errc::unsupported, "moment_exists: only orders 1 and 2 are supported, got " +
                                         std::to_string(order));
  }
}

ShapeReport classify_pdf_shape(const LogEvbsParams& p) {
  check(p);
  constexpr double eps = 1e-12;
  ShapeReport out;
  const double a = p.alpha;
  if (p.gamma < -1.0 - eps) {
    out.regime = ShapeRegime::increasing_on_interval;
  } else if (std::abs(p.gamma + 1.0) <= eps) {
    if (a >= 4.0) {
      out.regime = ShapeRegime::two_critical_points;
      const double root = 0.25 * std::sqrt(a * a - 16.0);
      out.critical_points = {p.eta + 2.0 * std::asinh(-a / 4.0 - root),
                             p.eta + 2.0 * std::asinh(-a / 4.0 + root)};
    } else {
      out.regime = ShapeRegime::strictly_increasing;
    }
  } else if (std::abs(p.gamma) <= eps) {
    if (std::abs(a - 2.0) <= eps) {
      out.regime = ShapeRegime::boundary;
    } else {
      out.regime = a < 2.0 ? ShapeRegime::local_max_at_eta : ShapeRegime::local_min_at_eta;
    }
    out.critical_points = {p.eta};
  }
  return out;
}

}  // namespace evbs
