#include "evbs/influence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "evbs/error.hpp"
#include "evbs/stats.hpp"

namespace evbs {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_omega(std::span<const double> omega, const RegressionData& data) {
  if (omega.size() != data.n())
    throw Error(Errc::invalid_argument, "perturbation vector length " + std::to_string(omega.size()) +
                                            " does not match n = " + std::to_string(data.n()));
  for (double w : omega)
    if (!std::isfinite(w)) throw Error(Errc::invalid_argument, "perturbation vector has a non-finite entry");
}

RegressionData perturbed_data(const RegressionData& data, const PerturbationScheme& scheme,
                              std::span<const double> omega) {
  return std::visit(overloaded{
                        [&](const CaseWeights&) { return data; },
                        [&](const ResponsePerturbation& s) {
                          std::vector<double> y = data.y();
                          for (std::size_t i = 0; i < y.size(); ++i) y[i] += omega[i] * s.scale;
                          return data.with_response(std::move(y));
                        },
                        [&](const CovariatePerturbation& s) {
                          Matrix x = data.x();
                          for (std::size_t i = 0; i < x.rows(); ++i) x(i, s.column) += omega[i] * s.scale;
                          return data.with_design(std::move(x));
                        },
                    },
                    scheme);
}

std::string echo(std::span<const double> v) {
  std::ostringstream os;
  os.precision(6);
  os << '[';
  const std::size_t shown = std::min<std::size_t>(v.size(), 8);
  for (std::size_t i = 0; i < shown; ++i) os << (i ? ", " : "") << v[i];
  if (v.size() > shown) os << ", ... (" << v.size() << " entries)";
  os << ']';
  return os.str();
}

double sum_sq(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

}  // namespace

ResponsePerturbation response_scheme(const RegressionData& data) { return {sample_sd(data.y())}; }

CovariatePerturbation covariate_scheme(const RegressionData& data, std::size_t column) {
  if (column == 0 || column >= data.p())
    throw Error(Errc::invalid_argument, "covariate perturbation needs a non-intercept column");
  return {column, sample_sd(data.x().column(column))};
}

std::string scheme_name(const PerturbationScheme& scheme) {
  return std::visit(overloaded{
                        [](const CaseWeights&) { return std::string("case-weights"); },
                        [](const ResponsePerturbation&) { return std::string("response"); },
                        [](const CovariatePerturbation&) { return std::string("covariate"); },
                    },
                    scheme);
}

std::vector<double> null_perturbation(const PerturbationScheme& scheme, std::size_t n) {
  return std::vector<double>(n, std::holds_alternative<CaseWeights>(scheme) ? 1.0 : 0.0);
}

void validate_scheme(const PerturbationScheme& scheme, const RegressionData& data) {
  std::visit(overloaded{
                 [](const CaseWeights&) {},
                 [](const ResponsePerturbation& s) {
                   if (!(s.scale > 0.0) || !std::isfinite(s.scale))
                     throw Error(Errc::invalid_argument, "response perturbation scale must be positive");
                 },
                 [&](const CovariatePerturbation& s) {
                   if (!(s.scale > 0.0) || !std::isfinite(s.scale))
                     throw Error(Errc::invalid_argument, "covariate perturbation scale must be positive");
                   if (s.column == 0) throw Error(Errc::invalid_argument, "cannot perturb the intercept column");
                   if (s.column >= data.p())
                     throw Error(Errc::invalid_argument, "covariate column " + std::to_string(s.column) +
                                                             " out of range");
                   const auto col = data.x().column(s.column);
                   const std::set<double> distinct(col.begin(), col.end());
                   if (distinct.size() <= 2)
                     throw Error(Errc::invalid_argument, "covariate column " + std::to_string(s.column) +
                                                             " is constant or binary, not continuous");
                 },
             },
             scheme);
}

double perturbed_loglik(const ThetaParams& theta, const RegressionData& data, const PerturbationScheme& scheme,
                        std::span<const double> omega) {
  check_omega(omega, data);
  if (std::holds_alternative<CaseWeights>(scheme)) return loglik(theta, data, omega);
  return loglik(theta, perturbed_data(data, scheme, omega));
}

std::vector<double> perturbed_score(const ThetaParams& theta, const RegressionData& data, Mode mode,
                                    const PerturbationScheme& scheme, std::span<const double> omega) {
  check_omega(omega, data);
  if (std::holds_alternative<CaseWeights>(scheme)) return score(theta, data, mode, omega);
  return score(theta, perturbed_data(data, scheme, omega), mode);
}

DeltaMatrix delta_at(const PerturbationScheme& scheme, const ThetaParams& theta, const RegressionData& data,
                     Mode mode) {
  validate_scheme(scheme, data);
  const std::size_t p = data.p(), n = data.n();
  DeltaMatrix out;
  out.scheme = scheme;
  out.mode = mode;
  out.omega0 = null_perturbation(scheme, n);

  if (std::holds_alternative<CaseWeights>(scheme)) {
    out.entries = observation_scores(theta, data, mode);
    return out;
  }

  const double gamma = mode == Mode::full ? theta.gamma : 0.0;
  out.entries = Matrix(num_params(p, mode), n);
  Matrix& d = out.entries;
  for (std::size_t i = 0; i < n; ++i) {
    auto xi = data.x().row(i);
    const double r = data.y()[i] - dot(xi, theta.beta);
    const ObservationDerivs o = observation_derivatives(r, theta.alpha, gamma);
    if (!o.feasible)
      throw FeasibilityError(i, "observation " + std::to_string(i) + " lies outside the support (1 + gamma*xi2 <= 0)");

    // dr_i / d omega_i, plus the direct dependence of the beta score on x_it.
    double dr = 0.0;
    if (const auto* s = std::get_if<ResponsePerturbation>(&scheme)) {
      dr = s->scale;
    } else {
      const auto& c = std::get<CovariatePerturbation>(scheme);
      dr = -c.scale * theta.beta[c.column];
      d(c.column, i) -= c.scale * o.l_r;
    }
    for (std::size_t k = 0; k < p; ++k) d(k, i) += -xi[k] * o.l_rr * dr;
    d(p, i) = o.l_ra * dr;
    if (mode == Mode::full) d(p + 1, i) = o.l_rg * dr;
  }
  return out;
}

DeltaMatrix delta_matrix(const PerturbationScheme& scheme, const FitResult& fit, const RegressionData& data) {
  if (!fit.converged) throw Error(Errc::not_converged, "influence analysis needs a converged fit");
  if (!fit.hessian_negative_definite)
    throw Error(Errc::not_at_maximum, "Hessian is not negative definite at the estimate; curvature is undefined");
  return delta_at(scheme, fit.theta_hat, data, fit.mode());
}

SymMatrix influence_matrix(const DeltaMatrix& delta, const SymMatrix& hessian) {
  const Matrix& d = delta.entries;
  if (hessian.order() != d.rows())
    throw Error(Errc::invalid_argument, "Hessian order does not match the Delta matrix");
  const SymMatrix info(-1.0 * hessian.matrix());
  const Matrix solved = solve_spd(info, d);  // throws PivotError if -H is not PD
  Matrix f = d.transpose() * solved;
  return SymMatrix::symmetrized(f);
}

namespace {

void check_unit(std::span<const double> l, std::size_t n) {
  if (l.size() != n) throw Error(Errc::invalid_argument, "direction length does not match n");
  if (std::abs(norm2(l) - 1.0) > 1e-10) throw Error(Errc::invalid_argument, "direction must have unit norm");
}

double quad_form(const SymMatrix& f, std::span<const double> l) {
  const auto fl = f.matrix() * l;
  return dot(l, fl);
}

double frobenius(const SymMatrix& f) { return std::sqrt(sum_sq(f.matrix().data())); }

}  // namespace

double curvature_normal(const DeltaMatrix& delta, const SymMatrix& hessian, std::span<const double> l) {
  check_unit(l, delta.entries.cols());
  return 2.0 * quad_form(influence_matrix(delta, hessian), l);
}

double curvature_conformal(const DeltaMatrix& delta, const SymMatrix& hessian, std::span<const double> l) {
  check_unit(l, delta.entries.cols());
  const SymMatrix f = influence_matrix(delta, hessian);
  // tr(F^2) is the squared Frobenius norm for symmetric F.
  const double norm = frobenius(f);
  if (!(norm > 0.0)) throw Error(Errc::numeric, "degenerate Delta: tr(F^2) is zero");
  return quad_form(f, l) / norm;
}

int default_q(double top, std::size_t n) {
  const double root = std::sqrt(static_cast<double>(n));
  int q_max = static_cast<int>(std::ceil(root)) - 1;
  int q = static_cast<int>(std::floor(top * root));
  return std::clamp(q, 1, std::max(1, q_max));
}

InfluenceReport influence_report(const DeltaMatrix& delta, const SymMatrix& hessian, std::optional<int> q) {
  const std::size_t n = delta.entries.cols();
  const double root = std::sqrt(static_cast<double>(n));
  const SymMatrix f = influence_matrix(delta, hessian);
  EigenDecomposition eig = sym_eigen(f);

  InfluenceReport rep;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return eig.values[a] > eig.values[b]; });
  rep.eigenvalues.resize(n);
  rep.eigenvectors = Matrix(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    rep.eigenvalues[c] = eig.values[order[c]];
    for (std::size_t r = 0; r < n; ++r) rep.eigenvectors(r, c) = eig.vectors(r, order[c]);
  }
  const double norm = std::sqrt(sum_sq(rep.eigenvalues));
  if (!(norm > 0.0)) throw Error(Errc::numeric, "degenerate Delta: all curvature eigenvalues are zero");
  rep.normalized_eigenvalues.resize(n);
  for (std::size_t i = 0; i < n; ++i) rep.normalized_eigenvalues[i] = rep.eigenvalues[i] / norm;

  rep.default_q = default_q(rep.normalized_eigenvalues[0], n);
  rep.q = q.value_or(rep.default_q);
  if (rep.q < 1 || !(static_cast<double>(rep.q) < root))
    throw Error(Errc::invalid_argument, "q must satisfy 1 <= q < sqrt(n) = " + std::to_string(root));

  const double threshold = rep.q / root;
  rep.k = 0;
  while (rep.k < n && rep.normalized_eigenvalues[rep.k] >= threshold) ++rep.k;

  rep.contributions.assign(n, 0.0);
  double lambda_sum = 0.0;
  for (std::size_t i = 0; i < rep.k; ++i) {
    const double lam = rep.normalized_eigenvalues[i];
    lambda_sum += lam;
    for (std::size_t j = 0; j < n; ++j) rep.contributions[j] += lam * rep.eigenvectors(j, i) * rep.eigenvectors(j, i);
  }
  rep.benchmark = lambda_sum / static_cast<double>(n);
  if (rep.k > 0)
    for (std::size_t j = 0; j < n; ++j)
      if (rep.contributions[j] >= rep.benchmark) rep.flagged.push_back(j);
  return rep;
}

double likelihood_displacement(const FitResult& fit, const RegressionData& data, std::span<const double> omega,
                               const PerturbationScheme& scheme, const FitOptions& options) {
  check_omega(omega, data);
  validate_scheme(scheme, data);
  FitOptions opts = options;
  opts.fix_gamma_zero = fit.gamma_zero_mode;
  opts.allow_gamma_zero_submodel = false;

  FitResult inner;
  try {
    if (std::holds_alternative<CaseWeights>(scheme))
      inner = fit_mle(data, fit.theta_hat, opts, omega);
    else
      inner = fit_mle(perturbed_data(data, scheme, omega), fit.theta_hat, opts);
  } catch (const Error& e) {
    throw Error(e.code(), std::string("perturbed refit failed at omega = ") + echo(omega) + ": " + e.what());
  }
  if (!inner.converged)
    throw Error(Errc::not_converged, "perturbed refit did not converge at omega = " + echo(omega));
  return 2.0 * (loglik(fit.theta_hat, data) - loglik(inner.theta_hat, data));
}

DeletionImpact deletion_impact(const RegressionData& data, const FitResult& fit, std::size_t index,
                               const FitOptions& options) {
  if (index >= data.n()) throw Error(Errc::invalid_argument, "deletion index out of range");
  if (data.n() - 1 <= data.p())
    throw Error(Errc::invalid_argument, "deleting a row would leave no more rows than coefficients");
  DeletionImpact out;
  out.index = index;
  const RegressionData reduced = data.without_row(index);
  try {
    out.refit = fit_mle(reduced, fit.theta_hat, options);
  } catch (const Error& e) {
    out.message = e.what();
    return out;
  }
  if (!out.refit.converged) {
    out.message = "refit did not converge: " + out.refit.message;
    return out;
  }
  out.ok = true;
  const auto before = pack(fit.theta_hat, Mode::full);
  const auto after = pack(out.refit.theta_hat, Mode::full);
  out.rate_of_change.resize(before.size());
  for (std::size_t j = 0; j < before.size(); ++j)
    out.rate_of_change[j] =
        before[j] == 0.0 ? std::nan("") : (after[j] - before[j]) / std::abs(before[j]) * 100.0;
  return out;
}

}  // namespace evbs
