#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace evbs {

using Objective = std::function<double(std::span<const double>)>;
using GradientFn = std::function<void(std::span<const double>, std::span<double>)>;
using FeasiblePredicate = std::function<bool(std::span<const double>)>;

struct OptimOptions {
  int max_iterations = 1000;
  double gradient_tolerance = 1e-7;  // infinity norm
  double step_tolerance = 1e-14;     // relative, infinity norm
  double contraction = 0.5;          // backtracking ratio, in (0, 1)
  double sufficient_decrease = 1e-4; // Armijo constant
  int max_backtracks = 80;

  void validate() const;
};

// Closed box. Empty vectors mean unbounded; +-inf entries are allowed.
struct Bounds {
  std::vector<double> lower, upper;
};

struct OptimResult {
  std::vector<double> argmax;
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
  std::string message;
};

// BFGS ascent with a backtracking Armijo line search. Trial points that fail
// `feasible` (or produce a non-finite objective) are treated as too long and
// shortened, so the iterate never leaves the feasible set. `feasible` may be
// empty. With bounds, trial points are projected onto the box, coordinates
// held at a bound by the gradient are frozen, and convergence is judged on the
// projected gradient. Throws Error(numeric) when the start or an accepted
// point yields a non-finite objective or gradient.
OptimResult maximize(const Objective& objective, const GradientFn& gradient,
                     std::vector<double> start, const FeasiblePredicate& feasible,
                     const OptimOptions& options = {}, const Bounds& bounds = {});

}  // namespace evbs
