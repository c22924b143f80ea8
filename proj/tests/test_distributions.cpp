#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/sinh_sinh.hpp>

#include "evbs/distributions.hpp"
#include "evbs/error.hpp"
#include "evbs/residuals.hpp"
#include "evbs/rng.hpp"

using namespace evbs;

namespace {

double integrate_logevbs(const LogEvbsParams& p) {
  auto f = [&](double y) { return logevbs_pdf(y, p); };
  const Interval s = logevbs_support(p);
  if (std::isinf(s.lower) && std::isinf(s.upper)) {
    boost::math::quadrature::sinh_sinh<double> q;
    return q.integrate(f);
  }
  boost::math::quadrature::exp_sinh<double> q;
  if (std::isinf(s.upper)) return q.integrate([&](double u) { return f(s.lower + u); });
  return q.integrate([&](double u) { return f(s.upper - u); });
}

double integrate_evbs(const EvbsParams& p) {
  // Integrate over log t to keep both tails tame.
  auto f = [&](double y) {
    const double t = std::exp(y);
    return t > 0 && std::isfinite(t) ? evbs_pdf(t, p) * t : 0.0;
  };
  const double eta = std::log(p.beta);
  const Interval s = logevbs_support({p.alpha, eta, p.gamma});
  if (std::isinf(s.lower) && std::isinf(s.upper)) {
    boost::math::quadrature::sinh_sinh<double> q;
    return q.integrate(f);
  }
  boost::math::quadrature::exp_sinh<double> q;
  if (std::isinf(s.upper)) return q.integrate([&](double u) { return f(s.lower + u); });
  return q.integrate([&](double u) { return f(s.upper - u); });
}

double ks_distance(std::vector<double> x, auto cdf) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

double two_sample_ks_p(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  const double ne = double(a.size()) * b.size() / (a.size() + b.size());
  return kolmogorov_sf(std::sqrt(ne) * d);
}

double dlogpdf(double y, const LogEvbsParams& p) {
  const double h = 1e-6;
  return (std::log(logevbs_pdf(y + h, p)) - std::log(logevbs_pdf(y - h, p))) / (2 * h);
}

}  // namespace

TEST_CASE("GEV cdf anchors and plateaus") {
  CHECK(gev_cdf(0.0, {0, 1, 0}) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(gev_cdf(-1.0 / 0.5 - 0.1, {0, 1, 0.5}) == 0.0);
  CHECK(gev_cdf(-1.0 / -0.5 + 0.1, {0, 1, -0.5}) == 1.0);
  CHECK(gev_cdf(1.0, {0, 1, 0.2}) == doctest::Approx(std::exp(-std::pow(1.2, -5.0))).epsilon(1e-14));
  CHECK_THROWS_AS(gev_cdf(0.0, {0, -1, 0}), Error);
}

TEST_CASE("GEV cdf agrees with integrated pdf") {
  boost::math::quadrature::exp_sinh<double> q;
  const GevParams p{0, 1, 0.2};
  const double lower = -1.0 / 0.2;
  // integral from the lower bound up to 1, written as 1 - tail above 1
  const double tail = q.integrate([&](double u) { return gev_pdf(1.0 + u, p); });
  CHECK(1.0 - tail == doctest::Approx(gev_cdf(1.0, p)).epsilon(1e-9));
  CHECK(gev_pdf(lower - 0.1, p) == 0.0);
}

TEST_CASE("GEV quantile anchors") {
  const double u = std::exp(-1.0);
  CHECK(std::abs(gev_standard_quantile(u, 0.0)) < 1e-15);
  CHECK(std::abs(gev_standard_quantile(u, 0.5)) < 1e-15);
  for (double g : {-0.7, -0.2, 0.0, 1e-9, 0.3})
    for (double v : {0.01, 0.3, 0.9})
      CHECK(gev_standard_cdf(gev_standard_quantile(v, g), g) == doctest::Approx(v).epsilon(1e-12));
}

TEST_CASE("GEV sampling matches the cdf") {
  Rng rng(2024);
  const GevParams p{0, 1, 0.2};
  const auto x = gev_sample(100000, p, rng);
  CHECK(ks_distance(x, [&](double v) { return gev_cdf(v, p); }) < 0.006);
}

TEST_CASE("EVBS cdf at t = beta is exp(-1)") {
  for (double g : {-0.5, 0.0, 0.3})
    for (double a : {0.3, 1.0, 2.5})
      CHECK(evbs_cdf(2.7, {a, 2.7, g}) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  const double e = std::numbers::e;
  CHECK(evbs_cdf(e, {1, 1, 0}) ==
        doctest::Approx(std::exp(-std::exp(-(std::sqrt(e) - 1 / std::sqrt(e))))).epsilon(1e-14));
  CHECK_THROWS_AS(evbs_cdf(0.0, {1, 1, 0}), Error);
  CHECK_THROWS_AS(evbs_pdf(-1.0, {1, 1, 0}), Error);
}

TEST_CASE("EVBS cdf plug-in agrees with Monte Carlo through the transform") {
  Rng rng(99);
  const EvbsParams p{1, 1, 0};
  const auto t = evbs_sample(1000000, p, rng);
  const double e = std::numbers::e;
  const double frac = double(std::count_if(t.begin(), t.end(), [&](double v) { return v <= e; })) / t.size();
  CHECK(std::abs(frac - evbs_cdf(e, p)) < 0.002);
}

TEST_CASE("EVBS sampling: positivity, X = 0 maps to beta, KS fit") {
  CHECK(evbs_from_gev(0.0, {0.7, 3.0, 0.1}) == doctest::Approx(3.0).epsilon(1e-15));
  Rng rng(5);
  const EvbsParams p{0.5, 1, 0.2};
  const auto t = evbs_sample(100000, p, rng);
  CHECK(*std::min_element(t.begin(), t.end()) > 0.0);
  CHECK(ks_distance(t, [&](double v) { return evbs_cdf(v, p); }) < 0.006);
}

TEST_CASE("EVBS scale property, two-sample KS") {
  Rng r1(17), r2(18);
  const double c = 3.0;
  auto a = evbs_sample(10000, {0.8, c * 2.0, 0.1}, r1);
  auto b = evbs_sample(10000, {0.8, 2.0, 0.1}, r2);
  for (double& v : b) v *= c;
  CHECK(two_sample_ks_p(a, b) > 0.01);
}

TEST_CASE("normalization by quadrature") {
  for (double a : {1.0, 0.5})
    for (double g : {-0.25, 0.0, 0.25}) {
      CAPTURE(a);
      CAPTURE(g);
      CHECK(std::abs(integrate_evbs({a, 1.0, g}) - 1.0) < 1e-6);
    }
  for (double g : {-0.75, -0.25, 0.0, 0.25, 0.75})
    for (double a : {0.3, 1.0, 2.0, 5.0}) {
      CAPTURE(a);
      CAPTURE(g);
      CHECK(std::abs(integrate_logevbs({a, 0.4, g}) - 1.0) < 1e-6);
      CHECK(std::abs(integrate_evbs({a, 1.5, g}) - 1.0) < 1e-6);
    }
}

TEST_CASE("gamma continuity of the cdf") {
  for (double t : {0.05, 0.3, 0.9, 1.0, 1.7, 4.0, 20.0})
    for (double a : {0.3, 1.0, 3.0}) {
      const double c0 = evbs_cdf(t, {a, 1.0, 0.0});
      CHECK(std::abs(evbs_cdf(t, {a, 1.0, 1e-8}) - c0) < 1e-6);
      CHECK(std::abs(evbs_cdf(t, {a, 1.0, -1e-8}) - c0) < 1e-6);
      const double y = std::log(t);
      const double l0 = logevbs_cdf(y, {a, 0.0, 0.0});
      CHECK(std::abs(logevbs_cdf(y, {a, 0.0, 1e-8}) - l0) < 1e-6);
      CHECK(std::abs(logevbs_cdf(y, {a, 0.0, -1e-8}) - l0) < 1e-6);
    }
}

TEST_CASE("scale equivariance of the EVBS cdf") {
  for (double c : {0.5, 2.0, 10.0})
    for (double t : {0.1, 0.8, 1.0, 3.0, 12.0})
      for (double g : {-0.3, 0.0, 0.2}) CHECK(std::abs(evbs_cdf(t, {0.7, 1.3, g}) - evbs_cdf(c * t, {0.7, c * 1.3, g})) < 1e-12);
}

TEST_CASE("cdf monotone and pdf non-negative on a grid") {
  for (double g : {-0.75, -0.2, 0.0, 0.3, 0.75}) {
    const LogEvbsParams p{0.9, 0.2, g};
    double prev = -1;
    for (double y = -8; y <= 8; y += 0.01) {
      const double c = logevbs_cdf(y, p);
      CHECK(c >= prev);
      CHECK(logevbs_pdf(y, p) >= 0.0);
      prev = c;
    }
  }
}

TEST_CASE("log-EVBS density anchors and change of variables") {
  for (double a : {0.5, 1.0, 3.0}) CHECK(logevbs_pdf(0.7, {a, 0.7, 0.0}) == doctest::Approx(std::exp(-1.0) / a).epsilon(1e-14));
  Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    const double a = rng.uniform(0.2, 3), beta = rng.uniform(0.3, 4), g = rng.uniform(-0.8, 0.8);
    const LogEvbsParams lp{a, std::log(beta), g};
    const Interval s = logevbs_support(lp);
    double y = rng.uniform(-3, 3);
    if (y <= s.lower || y >= s.upper) continue;
    const double lhs = logevbs_pdf(y, lp);
    const double rhs = evbs_pdf(std::exp(y), {a, beta, g}) * std::exp(y);
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(rhs, 1e-300));
  }
}

TEST_CASE("density grows toward the upper bound when gamma < -1") {
  const LogEvbsParams p{1.0, 0.0, -1.05};
  const double ub = logevbs_support(p).upper;
  double prev = 0;
  for (int k = 20; k >= 1; --k) {
    const double y = ub - 0.05 * k;
    const double d = logevbs_pdf(y, p);
    CHECK(d > prev);
    prev = d;
  }
}

TEST_CASE("support bounds") {
  const Interval whole = logevbs_support({1, 0, 0});
  CHECK(std::isinf(whole.lower));
  CHECK(std::isinf(whole.upper));
  const Interval pos = logevbs_support({1, 0, 0.5});
  CHECK(pos.lower == doctest::Approx(-1.762747174039086).epsilon(1e-12));
  CHECK(std::isinf(pos.upper));
  CHECK(std::abs(logevbs_cdf(pos.lower, {1, 0, 0.5})) < 1e-12);
  const Interval neg = logevbs_support({1, 0.3, -0.4});
  CHECK(std::abs(logevbs_cdf(neg.upper, {1, 0.3, -0.4}) - 1.0) < 1e-12);
  CHECK(logevbs_pdf(pos.lower - 0.01, {1, 0, 0.5}) == 0.0);
  CHECK(logevbs_pdf(neg.upper + 0.01, {1, 0.3, -0.4}) == 0.0);
}

TEST_CASE("moment existence") {
  CHECK(moment_exists(1, 0.4));
  CHECK_FALSE(moment_exists(1, 0.5));
  CHECK_FALSE(moment_exists(2, 0.3));
  CHECK(moment_exists(2, 0.2));
  try {
    (void)moment_exists(3, 0.0);
    FAIL("expected unsupported");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::unsupported);
  }
}

TEST_CASE("running mean diverges without a first moment") {
  auto ratio = [](double g) {
    Rng rng(31337);
    double s = 0;
    double at_1e5 = 0;
    const std::size_t n = 10000000;
    for (std::size_t i = 1; i <= n; ++i) {
      s += evbs_from_gev(gev_standard_quantile(rng.uniform(), g), {1.0, 1.0, g});
      if (i == 100000) at_1e5 = s / i;
    }
    return (s / n) / at_1e5;
  };
  CHECK(std::abs(ratio(0.2) - 1.0) < 0.05);
  CHECK(ratio(0.6) > 1.5);
}

TEST_CASE("pdf shape classification") {
  auto r = classify_pdf_shape({0.5, 1.0, 0.0});
  CHECK(r.regime == ShapeRegime::local_max_at_eta);
  REQUIRE(r.critical_points.size() == 1);
  CHECK(r.critical_points[0] == 1.0);
  CHECK(std::abs(dlogpdf(1.0, {0.5, 1.0, 0.0})) < 1e-6);

  r = classify_pdf_shape({4.0, 0.0, 0.0});
  CHECK(r.regime == ShapeRegime::local_min_at_eta);
  CHECK(std::abs(dlogpdf(0.0, {4.0, 0.0, 0.0})) < 1e-6);
  CHECK(classify_pdf_shape({2.0, 0.0, 0.0}).regime == ShapeRegime::boundary);

  const LogEvbsParams p{5.0, 0.3, -1.0};
  r = classify_pdf_shape(p);
  CHECK(r.regime == ShapeRegime::two_critical_points);
  REQUIRE(r.critical_points.size() == 2);
  CHECK(r.critical_points[0] == doctest::Approx(0.3 + 2 * std::asinh(-5.0 / 4 - 0.75)));
  CHECK(r.critical_points[1] == doctest::Approx(0.3 + 2 * std::asinh(-5.0 / 4 + 0.75)));
  const Interval s = logevbs_support(p);
  for (double c : r.critical_points) {
    CHECK(c < s.upper);
    CHECK(std::abs(dlogpdf(c, p)) < 1e-6);
    CHECK(dlogpdf(c - 1e-3, p) * dlogpdf(c + 1e-3, p) < 0.0);
  }

  CHECK(classify_pdf_shape({3.0, 0.0, -1.0}).regime == ShapeRegime::strictly_increasing);
  CHECK(classify_pdf_shape({1.0, 0.0, -1.5}).regime == ShapeRegime::increasing_on_interval);
  CHECK(classify_pdf_shape({1.0, 0.0, -0.5}).regime == ShapeRegime::unclassified);
  CHECK(to_string(ShapeRegime::two_critical_points) == "two-critical-points");
}

TEST_CASE("GEV log kernel is smooth across gamma = 0") {
  for (double z : {-2.0, -0.3, 0.0, 0.5, 3.0}) {
    const auto k0 = gev_log_kernel(z, 0.0);
    for (double g : {1e-9, -1e-9, 1e-6, -1e-6}) {
      const auto k = gev_log_kernel(z, g);
      CHECK(k.logpdf == doctest::Approx(k0.logpdf).epsilon(1e-5));
      CHECK(k.d_g == doctest::Approx(k0.d_g).epsilon(1e-4));
      CHECK(k.d_gg == doctest::Approx(k0.d_gg).epsilon(1e-4));
    }
  }
}
