#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evbs/linalg.hpp"
#include "evbs/optimize.hpp"

namespace evbs {

// Log-linear EVBS regression data: y = log(T), X with an intercept column.
class RegressionData {
 public:
  RegressionData() = default;
  // Validates: n > p >= 1, first column all ones, X full column rank,
  // everything finite.
  RegressionData(std::vector<double> y, Matrix x, std::vector<std::string> labels = {});

  std::size_t n() const noexcept { return y_.size(); }
  std::size_t p() const noexcept { return x_.cols(); }
  const std::vector<double>& y() const noexcept { return y_; }
  const Matrix& x() const noexcept { return x_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  RegressionData without_row(std::size_t index) const;
  RegressionData with_response(std::vector<double> y) const;
  RegressionData with_design(Matrix x) const;

 private:
  std::vector<double> y_;
  Matrix x_;
  std::vector<std::string> labels_;
};

// Builds X = [1, columns...] from covariate columns.
Matrix design_with_intercept(const std::vector<std::vector<double>>& covariates, std::size_t n);

struct ThetaParams {
  std::vector<double> beta;
  double alpha = 1.0;
  double gamma = 0.0;
};

// full: theta = (beta, alpha, gamma); gamma_zero: theta = (beta, alpha), gamma fixed at 0.
enum class Mode { full, gamma_zero };

std::size_t num_params(std::size_t p, Mode mode);
std::vector<double> pack(const ThetaParams& theta, Mode mode);
ThetaParams unpack(std::span<const double> v, std::size_t p, Mode mode);

struct XiTerms {
  std::vector<double> xi1;  // (2/alpha) cosh((y - x'beta)/2)
  std::vector<double> xi2;  // (2/alpha) sinh((y - x'beta)/2)
};

// Throws FeasibilityError carrying the first index with 1 + gamma xi2 <= 0.
XiTerms xi_terms(const ThetaParams& theta, const RegressionData& data);

// Log-density of one observation as a function of its residual r = y - x'beta,
// alpha and gamma, with first and second partial derivatives.
struct ObservationDerivs {
  bool feasible = false;
  double l = 0.0;
  double l_r = 0.0, l_a = 0.0, l_g = 0.0;
  double l_rr = 0.0, l_ra = 0.0, l_rg = 0.0;
  double l_aa = 0.0, l_ag = 0.0, l_gg = 0.0;
};

ObservationDerivs observation_derivatives(double residual, double alpha, double gamma);

// `weights` empty means unit weights (the unperturbed model).
double loglik(const ThetaParams& theta, const RegressionData& data,
              std::span<const double> weights = {});
// Same, but returns -inf instead of throwing when theta is infeasible.
double loglik_or_neg_inf(const ThetaParams& theta, const RegressionData& data,
                         std::span<const double> weights = {});
std::vector<double> score(const ThetaParams& theta, const RegressionData& data,
                          Mode mode = Mode::full, std::span<const double> weights = {});
SymMatrix hessian(const ThetaParams& theta, const RegressionData& data, Mode mode = Mode::full,
                  std::span<const double> weights = {});
// Column j holds the score contribution of observation j.
Matrix observation_scores(const ThetaParams& theta, const RegressionData& data,
                          Mode mode = Mode::full);

struct FitOptions {
  OptimOptions optim{};
  double alpha_max = 2.0;
  double gamma_min = -1.0 + 1e-6;
  double gamma_max = 0.25 - 1e-6;
  bool allow_gamma_zero_submodel = true;
  double gamma_zero_threshold = 1e-4;
  bool fix_gamma_zero = false;  // fit the gamma = 0 submodel directly
};

struct FitResult {
  ThetaParams theta_hat;
  double loglik = 0.0;
  SymMatrix hessian;               // at theta_hat, in the fitted mode
  Matrix observed_info_inverse;    // (-hessian)^-1; empty when not negative definite
  std::vector<double> std_errors;  // NaN when the information is singular
  std::vector<double> wald_z;      // beta entries only
  std::vector<double> p_values;    // beta entries only
  double score_inf_norm = 0.0;
  bool converged = false;
  int iterations = 0;
  bool gamma_zero_mode = false;
  bool hessian_negative_definite = false;
  bool box_active = false;
  std::string message;

  Mode mode() const noexcept { return gamma_zero_mode ? Mode::gamma_zero : Mode::full; }
  std::vector<double> params() const { return pack(theta_hat, mode()); }
};

// Least-squares beta, alpha from the spread of 2 sinh(residual / 2), and the
// best gamma on a five-point grid.
ThetaParams default_init(const RegressionData& data);

FitResult fit_mle(const RegressionData& data, const std::optional<ThetaParams>& init = std::nullopt,
                  const FitOptions& options = {}, std::span<const double> weights = {});

// Recomputes Hessian, information, standard errors and Wald statistics at theta.
void finalize_fit(FitResult& fit, const RegressionData& data, std::span<const double> weights = {});

double predict_response(const FitResult& fit, std::span<const double> x_new);

}  // namespace evbs
