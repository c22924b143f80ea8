#include "evbs/numdiff.hpp"

#include <algorithm>
#include <cmath>

#include "evbs/error.hpp"

namespace evbs {

namespace {

enum class Stencil { central, forward, backward };

Stencil choose(std::vector<double>& probe, std::size_t i, double step,
               const FeasiblePredicate& feasible) {
  if (!feasible) return Stencil::central;
  const double xi = probe[i];
  probe[i] = xi + step;
  const bool up = feasible(probe);
  probe[i] = xi - step;
  const bool down = feasible(probe);
  probe[i] = xi;
  if (up && down) return Stencil::central;
  if (up) return Stencil::forward;
  if (down) return Stencil::backward;
  throw Error(Errc::domain, "finite-difference stencil leaves the feasible region on both sides");
}

}  // namespace

FdGradient fd_gradient(const Objective& f, std::span<const double> x, double h,
                       const FeasiblePredicate& feasible) {
  FdGradient out;
  out.values.resize(x.size());
  std::vector<double> probe(x.begin(), x.end());
  const double f0 = f(x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double step = h * std::max(1.0, std::abs(x[i]));
    const double xi = probe[i];
    switch (choose(probe, i, step, feasible)) {
      case Stencil::central: {
        probe[i] = xi + step;
        const double fp = f(probe);
        probe[i] = xi - step;
        const double fm = f(probe);
        out.values[i] = (fp - fm) / (2.0 * step);
        break;
      }
      case Stencil::forward:
        probe[i] = xi + step;
        out.values[i] = (f(probe) - f0) / step;
        out.one_sided = true;
        break;
      case Stencil::backward:
        probe[i] = xi - step;
        out.values[i] = (f0 - f(probe)) / step;
        out.one_sided = true;
        break;
    }
    probe[i] = xi;
  }
  return out;
}

FdJacobian fd_jacobian(const VectorFn& f, std::span<const double> x, double h,
                       const FeasiblePredicate& feasible) {
  std::vector<double> probe(x.begin(), x.end());
  const std::vector<double> f0 = f(x);
  FdJacobian out{Matrix(f0.size(), x.size()), false};
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double step = h * std::max(1.0, std::abs(x[i]));
    const double xi = probe[i];
    std::vector<double> col(f0.size());
    switch (choose(probe, i, step, feasible)) {
      case Stencil::central: {
        probe[i] = xi + step;
        const auto fp = f(probe);
        probe[i] = xi - step;
        const auto fm = f(probe);
        for (std::size_t r = 0; r < col.size(); ++r) col[r] = (fp[r] - fm[r]) / (2.0 * step);
        break;
      }
      case Stencil::forward: {
        probe[i] = xi + step;
        const auto fp = f(probe);
        for (std::size_t r = 0; r < col.size(); ++r) col[r] = (fp[r] - f0[r]) / step;
        out.one_sided = true;
        break;
      }
      case Stencil::backward: {
        probe[i] = xi - step;
        const auto fm = f(probe);
        for (std::size_t r = 0; r < col.size(); ++r) col[r] = (f0[r] - fm[r]) / step;
        out.one_sided = true;
        break;
      }
    }
    probe[i] = xi;
    for (std::size_t r = 0; r < col.size(); ++r) out.values(r, i) = col[r];
  }
  return out;
}

}  // namespace evbs
