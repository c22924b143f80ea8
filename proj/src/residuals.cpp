#include "evbs/residuals.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "evbs/distributions.hpp"
#include "evbs/error.hpp"
#include "evbs/rng.hpp"
#include "evbs/stats.hpp"

namespace evbs {

namespace {

constexpr double kClamp = 1e-15;

template <std::size_t N>
double poly(const std::array<double, N>& c, double x) {
  double r = 0.0;
  for (std::size_t i = N; i-- > 0;) r = r * x + c[i];
  return r;
}

}  // namespace

ResidualSet make_residual_set(std::vector<double> r) {
  for (double v : r)
    if (!std::isfinite(v)) throw Error(Errc::numeric, "non-finite residual");
  ResidualSet out;
  out.sorted = r;
  std::sort(out.sorted.begin(), out.sorted.end());
  out.r = std::move(r);
  return out;
}

ResidualSet quantile_residuals(const FitResult& fit, const RegressionData& data) {
  std::vector<double> r(data.n());
  std::size_t clamped = 0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    const LogEvbsParams p{fit.theta_hat.alpha, dot(data.x().row(i), fit.theta_hat.beta), fit.theta_hat.gamma};
    double u = logevbs_cdf(data.y()[i], p);
    if (u < kClamp || u > 1.0 - kClamp) {
      u = std::clamp(u, kClamp, 1.0 - kClamp);
      ++clamped;
    }
    r[i] = normal_quantile(u);
  }
  ResidualSet out = make_residual_set(std::move(r));
  out.clamped = clamped;
  return out;
}

double kolmogorov_sf(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  if (lambda < 1.18) {
    // Theta-function form, converges fast for small lambda.
    const double y = std::exp(-std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda));
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) {
      const double term = std::pow(y, (2.0 * k - 1.0) * (2.0 * k - 1.0));
      s += term;
      if (term < 1e-17 * s) break;
    }
    const double cdf = std::sqrt(2.0 * std::numbers::pi) / lambda * s;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 ? term : -term);
    if (term < 1e-17 * std::abs(s)) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

TestResult ks_normal_test(std::span<const double> r) {
  const std::size_t n = r.size();
  if (n < 8) throw Error(Errc::invalid_argument, "KS test needs at least 8 values");
  std::vector<double> x(r.begin(), r.end());
  std::sort(x.begin(), x.end());
  const double nn = static_cast<double>(n);
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = normal_cdf(x[i]);
    d = std::max({d, (i + 1.0) / nn - f, f - i / nn});
  }
  return {d, kolmogorov_sf(std::sqrt(nn) * d)};
}

TestResult shapiro_wilk(std::span<const double> r) {
  const std::size_t n = r.size();
  if (n < 8 || n > 5000)
    throw Error(Errc::unsupported, "Shapiro-Wilk supports 8 <= n <= 5000, got n = " + std::to_string(n));
  std::vector<double> x(r.begin(), r.end());
  std::sort(x.begin(), x.end());
  if (x.back() - x.front() <= 0.0) throw Error(Errc::numeric, "Shapiro-Wilk: all values identical");

  static constexpr std::array<double, 6> c1{0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056};
  static constexpr std::array<double, 6> c2{0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
  static constexpr std::array<double, 2> g{-2.273, 0.459};
  static constexpr std::array<double, 4> c3{0.544, -0.39978, 0.025054, -6.714e-4};
  static constexpr std::array<double, 4> c4{1.3822, -0.77857, 0.062767, -0.0020322};
  static constexpr std::array<double, 4> c5{-1.5861, -0.31082, -0.083751, 0.0038915};
  static constexpr std::array<double, 3> c6{-0.4803, -0.082676, 0.0030302};

  const double an = static_cast<double>(n);
  const std::size_t half = n / 2;
  // Lower-half normal scores, negative.
  std::vector<double> m(half);
  double summ2 = 0.0;
  for (std::size_t i = 0; i < half; ++i) {
    m[i] = normal_quantile((i + 1 - 0.375) / (an + 0.25));
    summ2 += m[i] * m[i];
  }
  summ2 *= 2.0;
  const double ssumm2 = std::sqrt(summ2);
  const double rsn = 1.0 / std::sqrt(an);
  const double a1 = poly(c1, rsn) - m[0] / ssumm2;
  const double a2 = -m[1] / ssumm2 + poly(c2, rsn);
  const double fac = std::sqrt((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
  std::vector<double> a(half);
  a[0] = a1;
  a[1] = a2;
  for (std::size_t i = 2; i < half; ++i) a[i] = -m[i] / fac;

  const double xbar = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - xbar) * (v - xbar);
  double num = 0.0;
  for (std::size_t i = 0; i < half; ++i) num += a[i] * (x[n - 1 - i] - x[i]);
  const double w = std::min(1.0, num * num / ss);

  const double w1 = 1.0 - w;
  if (!(w1 > 0.0)) return {w, 1.0};
  double y = std::log(w1);
  double mu, sigma;
  if (n <= 11) {
    const double gam = poly(g, an);
    if (y >= gam) return {w, 0.0};
    y = -std::log(gam - y);
    mu = poly(c3, an);
    sigma = std::exp(poly(c4, an));
  } else {
    const double ln = std::log(an);
    mu = poly(c5, ln);
    sigma = std::exp(poly(c6, ln));
  }
  return {w, normal_sf((y - mu) / sigma)};
}

Envelope envelope(const FitResult& fit, const RegressionData& data, std::size_t n_sim, double level,
                  std::uint64_t seed, const FitOptions& options) {
  if (n_sim < 19) throw Error(Errc::invalid_argument, "envelope needs at least 19 simulations");
  if (!(level > 0.0 && level < 1.0)) throw Error(Errc::invalid_argument, "envelope level must lie in (0, 1)");
  const std::size_t n = data.n();

  FitOptions opts = options;
  opts.fix_gamma_zero = fit.gamma_zero_mode;

  std::vector<double> eta(n);
  for (std::size_t i = 0; i < n; ++i) eta[i] = dot(data.x().row(i), fit.theta_hat.beta);

  std::vector<std::vector<double>> sims;
  Envelope env;
  env.n_sim = n_sim;
  env.level = level;
  for (std::size_t s = 0; s < n_sim; ++s) {
    Rng rng = Rng::stream(seed, s);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i)
      y[i] = logevbs_quantile(rng.uniform(), {fit.theta_hat.alpha, eta[i], fit.theta_hat.gamma});
    try {
      const RegressionData sim = data.with_response(std::move(y));
      const FitResult refit = fit_mle(sim, fit.theta_hat, opts);
      if (!refit.converged) {
        ++env.diverged;
        continue;
      }
      sims.push_back(quantile_residuals(refit, sim).sorted);
    } catch (const Error&) {
      ++env.diverged;
    }
  }
  if (static_cast<double>(env.diverged) > 0.05 * static_cast<double>(n_sim))
    throw Error(Errc::not_converged, "envelope: " + std::to_string(env.diverged) + " of " + std::to_string(n_sim) +
                                         " simulated refits diverged");

  env.theoretical.resize(n);
  env.lower.resize(n);
  env.median.resize(n);
  env.upper.resize(n);
  // Order statistics k and m + 1 - k: a new exchangeable draw falls between
  // them with probability (m + 1 - 2k) / (m + 1) >= level once k >= 1.
  const std::size_t m = sims.size();
  const auto k = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor((static_cast<double>(m) + 1.0) * (1.0 - level) / 2.0)));
  std::vector<double> column(m);
  for (std::size_t i = 0; i < n; ++i) {
    env.theoretical[i] = normal_quantile((i + 1 - 0.375) / (static_cast<double>(n) + 0.25));
    for (std::size_t s = 0; s < m; ++s) column[s] = sims[s][i];
    std::sort(column.begin(), column.end());
    env.lower[i] = column[k - 1];
    env.median[i] = median(column);
    env.upper[i] = column[m - k];
  }
  return env;
}

}  // namespace evbs
