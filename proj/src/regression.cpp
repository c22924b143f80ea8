#include "evbs/regression.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "evbs/distributions.hpp"
#include "evbs/error.hpp"
#include "evbs/stats.hpp"

namespace evbs {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_cosh(double u) {
  const double a = std::abs(u);
  return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

double weight_at(std::span<const double> w, std::size_t i) { return w.empty() ? 1.0 : w[i]; }

void check_weights(std::span<const double> w, const RegressionData& data) {
  if (!w.empty() && w.size() != data.n())
    throw Error(Errc::invalid_argument, "weights length does not match the number of observations");
}

void check_theta(const ThetaParams& theta, const RegressionData& data) {
  if (theta.beta.size() != data.p())
    throw Error(Errc::invalid_argument, "beta length " + std::to_string(theta.beta.size()) +
                                            " does not match design width " + std::to_string(data.p()));
  if (!(theta.alpha > 0.0) || !std::isfinite(theta.alpha))
    throw Error(Errc::domain, "alpha must be positive");
  if (!std::isfinite(theta.gamma)) throw Error(Errc::domain, "gamma must be finite");
}

double residual(const ThetaParams& theta, const RegressionData& data, std::size_t i) {
  return data.y()[i] - dot(data.x().row(i), theta.beta);
}

}  // namespace

RegressionData::RegressionData(std::vector<double> y, Matrix x, std::vector<std::string> labels)
    : y_(std::move(y)), x_(std::move(x)), labels_(std::move(labels)) {
  const std::size_t n = y_.size(), p = x_.cols();
  if (x_.rows() != n) throw Error(Errc::invalid_argument, "design rows do not match response length");
  if (p < 1) throw Error(Errc::invalid_argument, "design needs at least the intercept column");
  if (n <= p)
    throw Error(Errc::invalid_argument, "need more observations (" + std::to_string(n) +
                                            ") than coefficients (" + std::to_string(p) + ")");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(y_[i])) throw Error(Errc::invalid_argument, "non-finite response at row " + std::to_string(i));
    if (x_(i, 0) != 1.0) throw Error(Errc::invalid_argument, "first design column must be all ones");
    for (double v : x_.row(i))
      if (!std::isfinite(v)) throw Error(Errc::invalid_argument, "non-finite design entry at row " + std::to_string(i));
  }
  if (numerical_rank(x_) < p) throw Error(Errc::invalid_argument, "design matrix is rank deficient");
  if (labels_.empty()) {
    labels_.push_back("(intercept)");
    for (std::size_t k = 1; k < p; ++k) labels_.push_back("x" + std::to_string(k));
  }
  if (labels_.size() != p) throw Error(Errc::invalid_argument, "label count does not match design width");
}

RegressionData RegressionData::without_row(std::size_t index) const {
  if (index >= n()) throw Error(Errc::invalid_argument, "row index out of range");
  std::vector<double> y;
  Matrix x(n() - 1, p());
  for (std::size_t i = 0, r = 0; i < n(); ++i) {
    if (i == index) continue;
    y.push_back(y_[i]);
    std::copy(x_.row(i).begin(), x_.row(i).end(), x.row(r++).begin());
  }
  return RegressionData(std::move(y), std::move(x), labels_);
}

RegressionData RegressionData::with_response(std::vector<double> y) const {
  return RegressionData(std::move(y), x_, labels_);
}

RegressionData RegressionData::with_design(Matrix x) const { return RegressionData(y_, std::move(x), labels_); }

Matrix design_with_intercept(const std::vector<std::vector<double>>& covariates, std::size_t n) {
  Matrix x(n, covariates.size() + 1);
  for (std::size_t i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    for (std::size_t k = 0; k < covariates.size(); ++k) {
      if (covariates[k].size() != n) throw Error(Errc::invalid_argument, "covariate length mismatch");
      x(i, k + 1) = covariates[k][i];
    }
  }
  return x;
}

std::size_t num_params(std::size_t p, Mode mode) { return p + (mode == Mode::full ? 2 : 1); }

std::vector<double> pack(const ThetaParams& theta, Mode mode) {
  std::vector<double> v = theta.beta;
  v.push_back(theta.alpha);
  if (mode == Mode::full) v.push_back(theta.gamma);
  return v;
}

ThetaParams unpack(std::span<const double> v, std::size_t p, Mode mode) {
  if (v.size() != num_params(p, mode)) throw Error(Errc::invalid_argument, "parameter vector has wrong length");
  ThetaParams t;
  t.beta.assign(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(p));
  t.alpha = v[p];
  t.gamma = mode == Mode::full ? v[p + 1] : 0.0;
  return t;
}

XiTerms xi_terms(const ThetaParams& theta, const RegressionData& data) {
  check_theta(theta, data);
  XiTerms out{std::vector<double>(data.n()), std::vector<double>(data.n())};
  const double k = 2.0 / theta.alpha;
  for (std::size_t i = 0; i < data.n(); ++i) {
    const double u = 0.5 * residual(theta, data, i);
    out.xi1[i] = k * std::cosh(u);
    out.xi2[i] = k * std::sinh(u);
    if (!(1.0 + theta.gamma * out.xi2[i] > 0.0))
      throw FeasibilityError(i, "observation " + std::to_string(i) + " lies outside the support (1 + gamma*xi2 <= 0)");
  }
  return out;
}

ObservationDerivs observation_derivatives(double r, double alpha, double gamma) {
  ObservationDerivs d;
  const double u = 0.5 * r;
  const double c = std::cosh(u), s = std::sinh(u);
  const double xi1 = (2.0 / alpha) * c;
  const double xi2 = (2.0 / alpha) * s;
  const GevKernel k = gev_log_kernel(xi2, gamma);
  if (!k.feasible || !std::isfinite(xi1)) return d;
  d.feasible = true;
  const double th = std::tanh(u);
  const double a2 = alpha * alpha;

  d.l = log_cosh(u) - std::log(alpha) + k.logpdf;
  d.l_r = 0.5 * th + 0.5 * k.d_z * xi1;
  d.l_a = -1.0 / alpha - k.d_z * xi2 / alpha;
  d.l_g = k.d_g;
  d.l_rr = 0.25 * (1.0 - th * th) + 0.25 * k.d_zz * xi1 * xi1 + 0.25 * k.d_z * xi2;
  d.l_ra = -(k.d_zz * xi1 * xi2 + k.d_z * xi1) / (2.0 * alpha);
  d.l_aa = (1.0 + k.d_zz * xi2 * xi2 + 2.0 * k.d_z * xi2) / a2;
  d.l_rg = 0.5 * k.d_zg * xi1;
  d.l_ag = -k.d_zg * xi2 / alpha;
  d.l_gg = k.d_gg;
  return d;
}

double loglik(const ThetaParams& theta, const RegressionData& data, std::span<const double> weights) {
  check_theta(theta, data);
  check_weights(weights, data);
  double total = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    const ObservationDerivs d = observation_derivatives(residual(theta, data, i), theta.alpha, theta.gamma);
    if (!d.feasible)
      throw FeasibilityError(i, "observation " + std::to_string(i) + " lies outside the support (1 + gamma*xi2 <= 0)");
    total += weight_at(weights, i) * d.l;
  }
  return total;
}

double loglik_or_neg_inf(const ThetaParams& theta, const RegressionData& data, std::span<const double> weights) {
  if (!(theta.alpha > 0.0) || !std::isfinite(theta.gamma)) return kNegInf;
  double total = 0.0;
  const double k = 2.0 / theta.alpha;
  const double log_alpha = std::log(theta.alpha);
  for (std::size_t i = 0; i < data.n(); ++i) {
    const double u = 0.5 * residual(theta, data, i);
    const GevKernel g = gev_log_kernel(k * std::sinh(u), theta.gamma);
    if (!g.feasible) return kNegInf;
    total += weight_at(weights, i) * (log_cosh(u) - log_alpha + g.logpdf);
  }
  return std::isfinite(total) ? total : kNegInf;
}

std::vector<double> score(const ThetaParams& theta, const RegressionData& data, Mode mode,
                          std::span<const double> weights) {
  check_theta(theta, data);
  check_weights(weights, data);
  const std::size_t p = data.p();
  const double gamma = mode == Mode::full ? theta.gamma : 0.0;
  std::vector<double> u(num_params(p, mode), 0.0);
  for (std::size_t i = 0; i < data.n(); ++i) {
    const ObservationDerivs d = observation_derivatives(residual(theta, data, i), theta.alpha, gamma);
    if (!d.feasible)
      throw FeasibilityError(i, "observation " + std::to_string(i) + " lies outside the support (1 + gamma*xi2 <= 0)");
    const double w = weight_at(weights, i);
    auto xi = data.x().row(i);
    for (std::size_t j = 0; j < p; ++j) u[j] -= w * xi[j] * d.l_r;
    u[p] += w * d.l_a;
    if (mode == Mode::full) u[p + 1] += w * d.l_g;
  }
  return u;
}

SymMatrix hessian(const ThetaParams& theta, const RegressionData& data, Mode mode,
                  std::span<const double> weights) {
  check_theta(theta, data);
  check_weights(weights, data);
  const std::size_t p = data.p();
  const std::size_t m = num_params(p, mode);
  const double gamma = mode == Mode::full ? theta.gamma : 0.0;
  Matrix h(m, m);
  for (std::size_t i = 0; i < data.n(); ++i) {
    const ObservationDerivs d = observation_derivatives(residual(theta, data, i), theta.alpha, gamma);
    if (!d.feasible)
      throw FeasibilityError(i, "observation " + std::to_string(i) + " lies outside the support (1 + gamma*xi2 <= 0)");
    const double w = weight_at(weights, i);
    auto xi = data.x().row(i);
    // dr/dbeta = -x
    for (std::size_t j = 0; j < p; ++j) {
      for (std::size_t k = 0; k <= j; ++k) h(j, k) += w * xi[j] * xi[k] * d.l_rr;
      h(p, j) -= w * xi[j] * d.l_ra;
      if (mode == Mode::full) h(p + 1, j) -= w * xi[j] * d.l_rg;
    }
    h(p, p) += w * d.l_aa;
    if (mode == Mode::full) {
      h(p + 1, p) += w * d.l_ag;
      h(p + 1, p + 1) += w * d.l_gg;
    }
  }
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t k = 0; k < j; ++k) h(k, j) = h(j, k);
  return SymMatrix(std::move(h));
}

Matrix observation_scores(const ThetaParams& theta, const RegressionData& data, Mode mode) {
  check_theta(theta, data);
  const std::size_t p = data.p();
  const double gamma = mode == Mode::full ? theta.gamma : 0.0;
  Matrix s(num_params(p, mode), data.n());
  for (std::size_t i = 0; i < data.n(); ++i) {
    const ObservationDerivs d = observation_derivatives(residual(theta, data, i), theta.alpha, gamma);
    if (!d.feasible)
      throw FeasibilityError(i, "observation " + std::to_string(i) + " lies outside the support (1 + gamma*xi2 <= 0)");
    auto xi = data.x().row(i);
    for (std::size_t j = 0; j < p; ++j) s(j, i) = -xi[j] * d.l_r;
    s(p, i) = d.l_a;
    if (mode == Mode::full) s(p + 1, i) = d.l_g;
  }
  return s;
}

ThetaParams default_init(const RegressionData& data) {
  ThetaParams t;
  t.beta = least_squares(data.x(), data.y());
  std::vector<double> v(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) v[i] = 2.0 * std::sinh(0.5 * residual(t, data, i));
  // Var of a standard Gumbel variate is pi^2 / 6.
  const double spread = sample_sd(v);
  t.alpha = std::clamp(spread / (std::numbers::pi / std::sqrt(6.0)), 0.05, 2.0);

  double best = kNegInf;
  t.gamma = 0.0;
  for (double g : {-0.3, -0.15, 0.0, 0.1, 0.2}) {
    ThetaParams trial = t;
    trial.gamma = g;
    const double ll = loglik_or_neg_inf(trial, data);
    if (ll > best) {
      best = ll;
      t.gamma = g;
    }
  }
  return t;
}

namespace {

// Centres and scales the non-intercept columns so that BFGS sees a well
// conditioned problem; the likelihood is invariant under this map.
struct Standardizer {
  std::vector<double> center, scale;

  explicit Standardizer(const Matrix& x) : center(x.cols(), 0.0), scale(x.cols(), 1.0) {
    for (std::size_t k = 1; k < x.cols(); ++k) {
      const auto col = x.column(k);
      const double sd = sample_sd(col);
      if (sd > 0.0) {
        center[k] = mean(col);
        scale[k] = sd;
      }
    }
  }

  Matrix apply(const Matrix& x) const {
    Matrix z = x;
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t k = 1; k < x.cols(); ++k) z(i, k) = (x(i, k) - center[k]) / scale[k];
    return z;
  }

  std::vector<double> to_internal(const std::vector<double>& beta) const {
    std::vector<double> b(beta.size());
    b[0] = beta[0];
    for (std::size_t k = 1; k < beta.size(); ++k) {
      b[k] = beta[k] * scale[k];
      b[0] += beta[k] * center[k];
    }
    return b;
  }

  std::vector<double> to_external(std::span<const double> b) const {
    std::vector<double> beta(b.size());
    beta[0] = b[0];
    for (std::size_t k = 1; k < b.size(); ++k) {
      beta[k] = b[k] / scale[k];
      beta[0] -= beta[k] * center[k];
    }
    return beta;
  }
};

bool in_box(const ThetaParams& t, const FitOptions& o, Mode mode) {
  if (!(t.alpha > 0.0 && t.alpha <= o.alpha_max)) return false;
  if (mode == Mode::full && !(t.gamma >= o.gamma_min && t.gamma <= o.gamma_max)) return false;
  return true;
}

FitResult run_bfgs(const RegressionData& data, ThetaParams start, const FitOptions& options, Mode mode,
                   std::span<const double> weights) {
  const Standardizer st(data.x());
  const RegressionData internal = data.with_design(st.apply(data.x()));
  const std::size_t p = data.p();

  ThetaParams s0 = start;
  s0.beta = st.to_internal(start.beta);
  if (mode == Mode::gamma_zero) s0.gamma = 0.0;

  auto objective = [&](std::span<const double> v) {
    return loglik_or_neg_inf(unpack(v, p, mode), internal, weights);
  };
  auto gradient = [&](std::span<const double> v, std::span<double> g) {
    const auto u = score(unpack(v, p, mode), internal, mode, weights);
    std::copy(u.begin(), u.end(), g.begin());
  };
  auto feasible = [&](std::span<const double> v) { return in_box(unpack(v, p, mode), options, mode); };

  // alpha > 0 stays with the feasibility predicate (open end).
  const std::size_t m = num_params(p, mode);
  Bounds box{std::vector<double>(m, -std::numeric_limits<double>::infinity()),
             std::vector<double>(m, std::numeric_limits<double>::infinity())};
  box.upper[p] = options.alpha_max;
  if (mode == Mode::full) {
    box.lower[p + 1] = options.gamma_min;
    box.upper[p + 1] = options.gamma_max;
  }
  const OptimResult r = maximize(objective, gradient, pack(s0, mode), feasible, options.optim, box);

  FitResult fit;
  ThetaParams ti = unpack(r.argmax, p, mode);
  fit.theta_hat = ti;
  fit.theta_hat.beta = st.to_external(ti.beta);
  fit.converged = r.converged;
  fit.iterations = r.iterations;
  fit.gamma_zero_mode = mode == Mode::gamma_zero;
  fit.message = r.message;
  const double tol = 1e-7;
  fit.box_active = fit.theta_hat.alpha >= options.alpha_max - tol ||
                   (mode == Mode::full && (fit.theta_hat.gamma <= options.gamma_min + tol ||
                                           fit.theta_hat.gamma >= options.gamma_max - tol));
  return fit;
}

}  // namespace

void finalize_fit(FitResult& fit, const RegressionData& data, std::span<const double> weights) {
  const Mode mode = fit.mode();
  const std::size_t p = data.p();
  const std::size_t m = num_params(p, mode);
  fit.loglik = loglik(fit.theta_hat, data, weights);
  fit.score_inf_norm = norm_inf(score(fit.theta_hat, data, mode, weights));
  fit.hessian = hessian(fit.theta_hat, data, mode, weights);

  fit.std_errors.assign(m, kNaN);
  fit.wald_z.assign(p, kNaN);
  fit.p_values.assign(p, kNaN);
  fit.observed_info_inverse = Matrix();
  fit.hessian_negative_definite = false;
  try {
    const SymMatrix info(-1.0 * fit.hessian.matrix());
    fit.observed_info_inverse = inverse_spd(info);
    fit.hessian_negative_definite = true;
  } catch (const PivotError&) {
    return;
  }
  for (std::size_t j = 0; j < m; ++j) fit.std_errors[j] = std::sqrt(fit.observed_info_inverse(j, j));
  for (std::size_t j = 0; j < p; ++j) {
    fit.wald_z[j] = fit.theta_hat.beta[j] / fit.std_errors[j];
    fit.p_values[j] = std::min(1.0, 2.0 * normal_sf(std::abs(fit.wald_z[j])));
  }
}

FitResult fit_mle(const RegressionData& data, const std::optional<ThetaParams>& init, const FitOptions& options,
                  std::span<const double> weights) {
  check_weights(weights, data);
  options.optim.validate();
  if (!(options.alpha_max > 0.0) || !(options.gamma_min < options.gamma_max))
    throw Error(Errc::invalid_argument, "invalid parameter box");

  ThetaParams start = init ? *init : default_init(data);
  check_theta(start, data);
  const Mode first_mode = options.fix_gamma_zero ? Mode::gamma_zero : Mode::full;
  if (first_mode == Mode::gamma_zero) start.gamma = 0.0;
  start.alpha = std::min(start.alpha, options.alpha_max);
  if (first_mode == Mode::full) start.gamma = std::clamp(start.gamma, options.gamma_min, options.gamma_max);
  if (!std::isfinite(loglik_or_neg_inf(start, data, weights))) {
    if (init) {
      (void)xi_terms(start, data);  // throws with the violating index
      throw Error(Errc::infeasible, "start point has a non-finite log-likelihood");
    }
    start.gamma = 0.0;
  }

  FitResult fit = run_bfgs(data, start, options, first_mode, weights);
  if (first_mode == Mode::full && options.allow_gamma_zero_submodel &&
      std::abs(fit.theta_hat.gamma) < options.gamma_zero_threshold) {
    ThetaParams s = fit.theta_hat;
    s.gamma = 0.0;
    const int prior_iterations = fit.iterations;
    fit = run_bfgs(data, s, options, Mode::gamma_zero, weights);
    fit.iterations += prior_iterations;
  }
  finalize_fit(fit, data, weights);
  return fit;
}

double predict_response(const FitResult& fit, std::span<const double> x_new) {
  if (x_new.size() != fit.theta_hat.beta.size())
    throw Error(Errc::invalid_argument, "covariate row length does not match the fitted coefficients");
  return std::exp(dot(x_new, fit.theta_hat.beta));
}

}  // namespace evbs
