#include "doctest.h"

#include <cmath>

#include "evbs/distributions.hpp"
#include "evbs/error.hpp"
#include "evbs/numdiff.hpp"
#include "evbs/regression.hpp"
#include "evbs/rng.hpp"

using namespace evbs;

namespace {

struct Draw {
  RegressionData data;
  ThetaParams theta;
  Mode mode;
};

RegressionData simulate(const ThetaParams& t, std::size_t n, Rng& rng, double x_scale = 1.0) {
  const std::size_t p = t.beta.size();
  std::vector<std::vector<double>> cols(p - 1, std::vector<double>(n));
  for (auto& c : cols)
    for (double& v : c) v = rng.uniform(-x_scale, x_scale);
  Matrix x = design_with_intercept(cols, n);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i)
    y[i] = logevbs_quantile(rng.uniform(), {t.alpha, dot(x.row(i), t.beta), t.gamma});
  return RegressionData(std::move(y), std::move(x));
}

// Fifty draws spanning |gamma| in {1e-3, 0.2, 0.7}, both signs, and the gamma = 0 submodel.
std::vector<Draw> oracle_draws() {
  Rng rng(20240607);
  const double gammas[] = {1e-3, -1e-3, 0.2, -0.2, 0.7, -0.7, 0.0};
  std::vector<Draw> out;
  for (int k = 0; k < 50; ++k) {
    ThetaParams t;
    const std::size_t p = 1 + k % 3;
    for (std::size_t j = 0; j < p; ++j) t.beta.push_back(rng.uniform(-1, 1));
    t.alpha = rng.uniform(0.2, 1.9);
    const double g = gammas[k % 7];
    t.gamma = g;
    const Mode mode = (g == 0.0 && k % 2 == 0) ? Mode::gamma_zero : Mode::full;
    const std::size_t n = 5 + static_cast<std::size_t>(rng.index(36));
    RegressionData data = simulate(t, n, rng);
    // Evaluate away from the generating point so the score is not near zero.
    ThetaParams at = t;
    for (double& b : at.beta) b += rng.uniform(-0.05, 0.05);
    at.alpha *= rng.uniform(0.9, 1.1);
    if (mode == Mode::full && g != 0.0) at.gamma = g * rng.uniform(0.9, 1.1);
    if (!std::isfinite(loglik_or_neg_inf(at, data))) at = t;
    out.push_back({std::move(data), at, mode});
  }
  return out;
}

double max_rel_err(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(1.0, std::abs(b[i])));
  return worst;
}

}  // namespace

TEST_CASE("RegressionData validation") {
  CHECK_THROWS_AS(RegressionData({1.0}, Matrix::from_rows({{1.0}})), Error);  // n must exceed p
  CHECK_THROWS_AS(RegressionData({1, 2, 3}, Matrix::from_rows({{1, 0}, {2, 1}, {1, 2}})), Error);
  CHECK_THROWS_AS(RegressionData({1, 2, 3}, Matrix::from_rows({{1, 1}, {1, 1}, {1, 1}})), Error);
  CHECK_THROWS_AS(RegressionData({1, NAN, 3}, Matrix::from_rows({{1, 0}, {1, 1}, {1, 2}})), Error);
  const RegressionData ok({1, 2, 3, 5}, Matrix::from_rows({{1, 0}, {1, 1}, {1, 2}, {1, 4}}));
  CHECK(ok.labels().size() == 2);
  const RegressionData dropped = ok.without_row(1);
  CHECK(dropped.n() == 3);
  CHECK(dropped.y()[1] == 3.0);
  CHECK(dropped.x()(2, 1) == 4.0);
}

TEST_CASE("xi terms") {
  const RegressionData d({0.5, 1.5, 2.0}, Matrix::from_rows({{1, 0}, {1, 1}, {1, 2}}));
  ThetaParams t{{0.5, 1.0}, 0.8, 0.0};
  const auto xi = xi_terms(t, d);
  CHECK(xi.xi2[0] == 0.0);
  CHECK(xi.xi2[1] == 0.0);
  CHECK(xi.xi1[0] == doctest::Approx(2.0 / 0.8));
  Rng rng(1);
  for (int k = 0; k < 100; ++k) {
    std::vector<double> y{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
    ThetaParams s{{rng.uniform(-1, 1), rng.uniform(-1, 1)}, rng.uniform(0.1, 2), 0.0};
    const auto z = xi_terms(s, d.with_response(y));
    for (std::size_t i = 0; i < 3; ++i) {
      const double lhs = z.xi1[i] * z.xi1[i] - z.xi2[i] * z.xi2[i];
      CHECK(std::abs(lhs - 4.0 / (s.alpha * s.alpha)) < 1e-12 * std::max(1.0, z.xi1[i] * z.xi1[i]));
    }
  }
  // 1 + gamma xi2 <= 0 at the second observation only.
  const RegressionData e({0.0, -5.0, 0.0}, Matrix::from_rows({{1, 0}, {1, 1}, {1, 2}}));
  try {
    (void)xi_terms({{0.0, 0.0}, 1.0, 0.2}, e);
    FAIL("expected FeasibilityError");
  } catch (const FeasibilityError& err) {
    CHECK(err.index() == 1);
  }
  CHECK_THROWS_AS(loglik({{0.0, 0.0}, 1.0, 0.2}, e), FeasibilityError);
}

TEST_CASE("single-observation anchors") {
  const auto d = observation_derivatives(0.0, 1.0, 0.0);
  CHECK(d.l == doctest::Approx(-1.0).epsilon(1e-15));
  for (double a : {0.3, 1.0, 1.7}) {
    const auto o = observation_derivatives(0.0, a, 0.0);
    CHECK(o.l_a == doctest::Approx(-1.0 / a));
    CHECK(o.l_aa == doctest::Approx(1.0 / (a * a)));
  }
}

TEST_CASE("log-likelihood equals the sum of log-EVBS log densities") {
  for (const auto& d : oracle_draws()) {
    double ref = 0.0;
    const double g = d.mode == Mode::full ? d.theta.gamma : 0.0;
    for (std::size_t i = 0; i < d.data.n(); ++i)
      ref += logevbs_logpdf(d.data.y()[i], {d.theta.alpha, dot(d.data.x().row(i), d.theta.beta), g});
    ThetaParams t = d.theta;
    t.gamma = g;
    CHECK(std::abs(loglik(t, d.data) - ref) < 1e-10 * std::max(1.0, std::abs(ref)));
  }
}

TEST_CASE("analytic score matches finite differences") {
  int n_checked = 0;
  for (const auto& d : oracle_draws()) {
    const std::size_t p = d.data.p();
    auto f = [&](std::span<const double> v) { return loglik_or_neg_inf(unpack(v, p, d.mode), d.data); };
    auto feasible = [&](std::span<const double> v) { return std::isfinite(f(v)); };
    const auto x = pack(d.theta, d.mode);
    const auto fd = fd_gradient(f, x, 1e-5, feasible);
    const auto an = score(d.theta, d.data, d.mode);
    CAPTURE(d.theta.gamma);
    CHECK(max_rel_err(an, fd.values) < 1e-6);
    ++n_checked;
  }
  CHECK(n_checked == 50);
}

TEST_CASE("analytic Hessian matches the finite-difference Jacobian of the score") {
  for (const auto& d : oracle_draws()) {
    const std::size_t p = d.data.p();
    auto s = [&](std::span<const double> v) { return score(unpack(v, p, d.mode), d.data, d.mode); };
    auto feasible = [&](std::span<const double> v) {
      return std::isfinite(loglik_or_neg_inf(unpack(v, p, d.mode), d.data));
    };
    const auto x = pack(d.theta, d.mode);
    const auto fd = fd_jacobian(s, x, 1e-6, feasible);
    const SymMatrix h = hessian(d.theta, d.data, d.mode);
    CAPTURE(d.theta.gamma);
    CHECK(max_rel_err(h.matrix().data(), fd.values.data()) < 1e-5);
  }
}

TEST_CASE("weighted score and Hessian are linear in the weights") {
  Rng rng(3);
  const ThetaParams t{{0.2, 0.4}, 0.6, -0.15};
  const auto data = simulate(t, 30, rng);
  std::vector<double> w(30);
  for (double& v : w) v = rng.uniform(0.5, 1.5);
  const auto cols = observation_scores(t, data);
  const auto sw = score(t, data, Mode::full, w);
  for (std::size_t j = 0; j < sw.size(); ++j) {
    double ref = 0;
    for (std::size_t i = 0; i < 30; ++i) ref += w[i] * cols(j, i);
    CHECK(sw[j] == doctest::Approx(ref).epsilon(1e-12));
  }
}

TEST_CASE("branch consistency near gamma = 0") {
  for (const auto& d : oracle_draws()) {
    ThetaParams a = d.theta, b = d.theta;
    a.gamma = 1e-8;
    b.gamma = 0.0;
    const double l0 = loglik(b, d.data);
    CHECK(std::abs(loglik(a, d.data) - l0) < 1e-6 * std::abs(l0));
    const auto s0 = score(b, d.data, Mode::gamma_zero);
    const auto s1 = score(a, d.data, Mode::full);
    for (std::size_t j = 0; j < s0.size(); ++j) CHECK(s1[j] == doctest::Approx(s0[j]).epsilon(1e-6));
  }
}

TEST_CASE("default start: exact linear data recovers the interpolating coefficients") {
  const RegressionData d({1.0, 3.0, 5.0, 7.0}, Matrix::from_rows({{1, 0}, {1, 1}, {1, 2}, {1, 3}}));
  const ThetaParams t = default_init(d);
  CHECK(t.beta[0] == doctest::Approx(1.0));
  CHECK(t.beta[1] == doctest::Approx(2.0));
  CHECK(t.alpha >= 0.05);
  CHECK(t.alpha <= 2.0);
}

TEST_CASE("large-sample fit recovers the truth") {
  Rng rng(77);
  const ThetaParams truth{{0.5, 0.5}, 0.5, 0.2};
  const auto data = simulate(truth, 10000, rng);
  const FitResult fit = fit_mle(data);
  REQUIRE(fit.converged);
  CHECK_FALSE(fit.gamma_zero_mode);
  const auto est = fit.params();
  const auto tru = pack(truth, Mode::full);
  for (std::size_t j = 0; j < est.size(); ++j) {
    CAPTURE(j);
    CHECK(std::abs(est[j] - tru[j]) < 3.0 * fit.std_errors[j]);
  }
  CHECK(fit.hessian_negative_definite);
  CHECK(fit.score_inf_norm < 1e-4);
}

TEST_CASE("gamma = 0 data gives gamma-hat near 0") {
  Rng rng(78);
  const ThetaParams truth{{0.5, 0.5}, 0.5, 0.0};
  const auto data = simulate(truth, 10000, rng);
  const FitResult fit = fit_mle(data);
  REQUIRE(fit.converged);
  CHECK(std::abs(fit.theta_hat.gamma) < 0.02);
}

TEST_CASE("converged fits: negative definite Hessian, small score, sane p-values") {
  Rng rng(79);
  for (double g : {-0.3, 0.0, 0.15}) {
    const auto data = simulate({{1.0, -0.7, 0.3}, 0.4, g}, 150, rng);
    const FitResult fit = fit_mle(data);
    REQUIRE(fit.converged);
    CHECK(fit.hessian_negative_definite);
    const auto s = score(fit.theta_hat, data, fit.mode());
    CHECK(norm_inf(s) < 1e-4);
    for (double pv : fit.p_values) {
      CHECK(pv >= 0.0);
      CHECK(pv <= 1.0);
    }
    for (std::size_t j = 0; j < fit.std_errors.size(); ++j)
      CHECK(fit.std_errors[j] == doctest::Approx(std::sqrt(fit.observed_info_inverse(j, j))));
  }
}

TEST_CASE("gamma-zero submodel is selected when gamma-hat is tiny") {
  // With an explicit gamma = 0 fit we always get the submodel shape.
  Rng rng(80);
  const auto data = simulate({{0.0, 1.0}, 0.8, 0.0}, 60, rng);
  FitOptions o;
  o.fix_gamma_zero = true;
  const FitResult fit = fit_mle(data, std::nullopt, o);
  CHECK(fit.gamma_zero_mode);
  CHECK(fit.theta_hat.gamma == 0.0);
  CHECK(fit.hessian.order() == 3);
  CHECK(fit.std_errors.size() == 3);
}

TEST_CASE("shifting a covariate changes only the intercept") {
  Rng rng(81);
  const auto data = simulate({{0.4, 0.9}, 0.6, -0.1}, 200, rng, 3.0);
  const FitResult a = fit_mle(data);
  Matrix x = data.x();
  const double c = 1000.0;
  for (std::size_t i = 0; i < x.rows(); ++i) x(i, 1) += c;
  const FitResult b = fit_mle(data.with_design(x));
  REQUIRE(a.converged);
  REQUIRE(b.converged);
  CHECK(b.theta_hat.beta[0] == doctest::Approx(a.theta_hat.beta[0] - a.theta_hat.beta[1] * c).epsilon(1e-6));
  CHECK(std::abs(b.theta_hat.beta[1] - a.theta_hat.beta[1]) < 1e-6);
  CHECK(std::abs(b.theta_hat.alpha - a.theta_hat.alpha) < 1e-6);
  CHECK(std::abs(b.theta_hat.gamma - a.theta_hat.gamma) < 1e-6);
  CHECK(std::abs(b.loglik - a.loglik) < 1e-6);
}

TEST_CASE("predicted response") {
  FitResult fit;
  fit.theta_hat = {{25.5148, -0.0227}, 0.1857, -0.1551};
  CHECK(predict_response(fit, std::vector<double>{1, 1013}) == doctest::Approx(std::exp(25.5148 - 0.0227 * 1013)));
  CHECK(predict_response(fit, std::vector<double>{1, 1013}) == doctest::Approx(12.42).epsilon(1e-3));
  CHECK(predict_response(fit, std::vector<double>{1, 1000}) > predict_response(fit, std::vector<double>{1, 1001}));
  fit.theta_hat.beta = {1.3, 0.0};
  CHECK(predict_response(fit, std::vector<double>{1, 5}) == doctest::Approx(std::exp(1.3)));
  CHECK_THROWS_AS(predict_response(fit, std::vector<double>{1}), Error);
}

TEST_CASE("infeasible explicit start is reported with its index") {
  const RegressionData e({0.0, -5.0, 0.0, 0.1}, Matrix::from_rows({{1, 0}, {1, 1}, {1, 2}, {1, 3}}));
  CHECK_THROWS_AS(fit_mle(e, ThetaParams{{0.0, 0.0}, 1.0, 0.2}), FeasibilityError);
}
