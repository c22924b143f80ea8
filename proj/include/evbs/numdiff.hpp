#pragma once

#include <functional>
#include <span>
#include <vector>

#include "evbs/linalg.hpp"
#include "evbs/optimize.hpp"

namespace evbs {

using VectorFn = std::function<std::vector<double>(std::span<const double>)>;

struct FdGradient {
  std::vector<double> values;
  bool one_sided = false;  // some coordinate fell back to a one-sided stencil
};

struct FdJacobian {
  Matrix values;  // outputs x inputs
  bool one_sided = false;
};

// Central differences with per-coordinate step h * max(1, |x_i|). Where the
// stencil leaves the feasible region the coordinate falls back to a
// one-sided difference and the result is flagged.
FdGradient fd_gradient(const Objective& f, std::span<const double> x, double h,
                       const FeasiblePredicate& feasible = {});
FdJacobian fd_jacobian(const VectorFn& f, std::span<const double> x, double h,
                       const FeasiblePredicate& feasible = {});

}  // namespace evbs
