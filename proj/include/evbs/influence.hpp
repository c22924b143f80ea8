#pragma once

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "evbs/linalg.hpp"
#include "evbs/regression.hpp"

namespace evbs {

// omega_i multiplies the log-likelihood contribution of case i; null = ones.
struct CaseWeights {};
// y_i -> y_i + omega_i * scale; null = zeros.
struct ResponsePerturbation {
  double scale = 1.0;
};
// x_it -> x_it + omega_i * scale on one non-intercept column; null = zeros.
struct CovariatePerturbation {
  std::size_t column = 1;
  double scale = 1.0;
};

using PerturbationScheme = std::variant<CaseWeights, ResponsePerturbation, CovariatePerturbation>;

// Scales default to the sample standard deviation of y or of column t.
ResponsePerturbation response_scheme(const RegressionData& data);
CovariatePerturbation covariate_scheme(const RegressionData& data, std::size_t column);

std::string scheme_name(const PerturbationScheme& scheme);
std::vector<double> null_perturbation(const PerturbationScheme& scheme, std::size_t n);

// Validates scales, and that a covariate column is a non-constant,
// non-intercept, non-binary column of the design.
void validate_scheme(const PerturbationScheme& scheme, const RegressionData& data);

// The perturbed model's log-likelihood and score at theta.
double perturbed_loglik(const ThetaParams& theta, const RegressionData& data,
                        const PerturbationScheme& scheme, std::span<const double> omega);
std::vector<double> perturbed_score(const ThetaParams& theta, const RegressionData& data, Mode mode,
                                    const PerturbationScheme& scheme, std::span<const double> omega);

struct DeltaMatrix {
  Matrix entries;  // parameters x observations
  PerturbationScheme scheme;
  std::vector<double> omega0;
  Mode mode = Mode::full;
};

// d^2 l(theta | omega) / d theta d omega at omega0, for any feasible theta.
DeltaMatrix delta_at(const PerturbationScheme& scheme, const ThetaParams& theta, const RegressionData& data,
                     Mode mode);

// Same at the MLE; refuses unconverged fits and fits where -Hessian is not
// positive definite.
DeltaMatrix delta_matrix(const PerturbationScheme& scheme, const FitResult& fit, const RegressionData& data);

// F = Delta' (-H)^-1 Delta, n x n.
SymMatrix influence_matrix(const DeltaMatrix& delta, const SymMatrix& hessian);

// C_l = 2 l' F l.
double curvature_normal(const DeltaMatrix& delta, const SymMatrix& hessian, std::span<const double> l);
// B_l = l' F l / sqrt(tr F^2).
double curvature_conformal(const DeltaMatrix& delta, const SymMatrix& hessian, std::span<const double> l);

struct InfluenceReport {
  std::vector<double> eigenvalues;             // of F, descending
  std::vector<double> normalized_eigenvalues;  // lambda / sqrt(sum lambda^2)
  Matrix eigenvectors;                         // columns match eigenvalues
  int q = 1;
  int default_q = 1;
  std::size_t k = 0;                   // number of q-influential directions
  std::vector<double> contributions;   // B_j(q)
  double benchmark = 0.0;              // b(q)
  std::vector<std::size_t> flagged;    // 0-based, B_j(q) >= b(q)
};

// Largest integer q < sqrt(n) with at least one q-influential direction
// (at least 1).
int default_q(double top_normalized_eigenvalue, std::size_t n);

InfluenceReport influence_report(const DeltaMatrix& delta, const SymMatrix& hessian,
                                 std::optional<int> q = std::nullopt);

// g(omega) = 2 [l(theta_hat) - l(theta_hat_omega)], with an inner refit of
// the perturbed model started at theta_hat.
double likelihood_displacement(const FitResult& fit, const RegressionData& data, std::span<const double> omega,
                               const PerturbationScheme& scheme, const FitOptions& options = {});

struct DeletionImpact {
  std::size_t index = 0;  // 0-based
  FitResult refit;
  std::vector<double> rate_of_change;  // percent, (beta, alpha, gamma) order
  bool ok = false;
  std::string message;
};

DeletionImpact deletion_impact(const RegressionData& data, const FitResult& fit, std::size_t index,
                               const FitOptions& options = {});

}  // namespace evbs
