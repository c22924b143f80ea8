#include "evbs/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "evbs/error.hpp"
#include "evbs/linalg.hpp"

namespace evbs {

void OptimOptions::validate() const {
  if (max_iterations <= 0) throw Error(Errc::invalid_argument, "max_iterations must be positive");
  if (!(gradient_tolerance > 0.0) || !(step_tolerance > 0.0))
    throw Error(Errc::invalid_argument, "tolerances must be positive");
  if (!(contraction > 0.0 && contraction < 1.0))
    throw Error(Errc::invalid_argument, "contraction ratio must lie in (0, 1)");
  if (!(sufficient_decrease > 0.0 && sufficient_decrease < 1.0))
    throw Error(Errc::invalid_argument, "sufficient-decrease constant must lie in (0, 1)");
}

namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

OptimResult maximize(const Objective& objective, const GradientFn& gradient,
                     std::vector<double> start, const FeasiblePredicate& feasible,
                     const OptimOptions& options, const Bounds& bounds) {
  options.validate();
  const std::size_t n = start.size();
  auto is_feasible = [&](std::span<const double> x) { return !feasible || feasible(x); };

  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> lo = bounds.lower.empty() ? std::vector<double>(n, -inf) : bounds.lower;
  std::vector<double> hi = bounds.upper.empty() ? std::vector<double>(n, inf) : bounds.upper;
  if (lo.size() != n || hi.size() != n) throw Error(Errc::invalid_argument, "maximize: bounds size mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(lo[i] <= hi[i])) throw Error(Errc::invalid_argument, "maximize: lower bound above upper bound");
    if (start[i] < lo[i] || start[i] > hi[i]) throw Error(Errc::infeasible, "maximize: start point outside bounds");
  }
  // g is the gradient of the minimised function, so a coordinate at its
  // lower bound is held when g > 0 and at its upper bound when g < 0.
  auto held = [&](const std::vector<double>& x, const std::vector<double>& g, std::size_t i) {
    return (x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0);
  };
  auto projected_norm = [&](const std::vector<double>& x, const std::vector<double>& g) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (!held(x, g, i)) m = std::max(m, std::abs(g[i]));
    return m;
  };

  if (!is_feasible(start)) throw Error(Errc::infeasible, "maximize: start point is infeasible");

  // Internally minimise f = -objective.
  std::vector<double> x = std::move(start);
  double fx = -objective(x);
  std::vector<double> g(n);
  gradient(x, g);
  for (double& v : g) v = -v;
  if (!std::isfinite(fx) || !all_finite(g))
    throw Error(Errc::numeric, "maximize: non-finite objective or gradient at start");

  OptimResult result;
  Matrix hinv = Matrix::identity(n);
  bool scaled = false;
  bool fresh_restart = true;
  int stalls = 0;

  std::vector<double> dir(n), xt(n), gt(n), s(n), y(n), hy(n), gf(n);
  std::vector<bool> frozen(n);
  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    if (projected_norm(x, g) < options.gradient_tolerance) {
      result.converged = true;
      result.message = "gradient tolerance reached";
      break;
    }

    for (std::size_t i = 0; i < n; ++i) {
      frozen[i] = held(x, g, i);
      gf[i] = frozen[i] ? 0.0 : g[i];
    }
    dir = hinv * std::span<const double>(gf);
    for (std::size_t i = 0; i < n; ++i) dir[i] = frozen[i] ? 0.0 : -dir[i];
    double slope = dot(g, dir);
    if (!(slope < 0.0)) {
      hinv = Matrix::identity(n);
      scaled = false;
      for (std::size_t i = 0; i < n; ++i) dir[i] = -gf[i];
      slope = dot(g, dir);
    }

    double step = 1.0;
    if (!scaled) {
      // Keep the very first steepest-descent step modest.
      const double gn = norm_inf(gf);
      if (gn > 0.0) step = std::min(1.0, 0.1 * std::max(1.0, norm_inf(x)) / gn);
    }

    bool accepted = false;
    bool have_gt = false;
    double ft = 0.0;
    // Below this the objective difference is rounding noise (sums of many terms).
    const double noise = 1e-12 * std::max(1.0, std::abs(fx));
    for (int bt = 0; bt < options.max_backtracks; ++bt) {
      bool clipped = false;
      double lin = 0.0;  // g'(xt - x), the predicted change
      for (std::size_t i = 0; i < n; ++i) {
        xt[i] = std::clamp(x[i] + step * dir[i], lo[i], hi[i]);
        clipped = clipped || xt[i] != x[i] + step * dir[i];
        lin += g[i] * (xt[i] - x[i]);
      }
      if (is_feasible(xt) && lin < 0.0) {
        ft = -objective(xt);
        if (std::isfinite(ft) && ft <= fx + options.sufficient_decrease * lin) {
          accepted = true;
          break;
        }
        if (!clipped && std::isfinite(ft) && ft <= fx + noise) {
          // Approximate Wolfe test (Hager-Zhang) on the directional derivative.
          gradient(xt, gt);
          for (double& v : gt) v = -v;
          if (all_finite(gt)) {
            const double dphi = dot(gt, dir);
            if (dphi >= 0.9 * slope && dphi <= (2.0 * options.sufficient_decrease - 1.0) * slope) {
              accepted = true;
              have_gt = true;
              break;
            }
          }
        }
      }
      step *= options.contraction;
    }

    if (!accepted) {
      if (!fresh_restart) {
        hinv = Matrix::identity(n);
        scaled = false;
        fresh_restart = true;
        continue;
      }
      result.message = "line search failed";
      break;
    }

    if (!have_gt) {
      gradient(xt, gt);
      for (double& v : gt) v = -v;
    }
    if (!all_finite(gt)) throw Error(Errc::numeric, "maximize: non-finite gradient at accepted point");

    double max_rel_step = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = xt[i] - x[i];
      y[i] = gt[i] - g[i];
      max_rel_step = std::max(max_rel_step, std::abs(s[i]) / std::max(1.0, std::abs(xt[i])));
    }
    x = xt;
    fx = ft;
    g = gt;
    fresh_restart = false;

    const double sy = dot(s, y);
    if (sy > 1e-12 * norm2(s) * norm2(y)) {
      if (!scaled) {
        const double yy = dot(y, y);
        hinv = (sy / yy) * Matrix::identity(n);
        scaled = true;
      }
      hy = hinv * std::span<const double>(y);
      const double yhy = dot(y, hy);
      const double rho = 1.0 / sy;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          hinv(i, j) += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
        }
      }
    }

    if (max_rel_step < options.step_tolerance) {
      if (projected_norm(x, g) < options.gradient_tolerance) {
        result.converged = true;
        result.message = "gradient tolerance reached";
        ++iter;
        break;
      }
      // Stalled with a large gradient: restart from steepest descent, and
      // give up if that stalls too.
      if (++stalls >= 2) {
        result.message = "no progress: step below tolerance";
        ++iter;
        break;
      }
      hinv = Matrix::identity(n);
      scaled = false;
      fresh_restart = true;
    } else {
      stalls = 0;
    }
  }
  if (iter >= options.max_iterations && !result.converged) {
    result.converged = projected_norm(x, g) < options.gradient_tolerance;
    result.message = result.converged ? "gradient tolerance reached" : "iteration cap reached";
  }

  result.argmax = std::move(x);
  result.value = -fx;
  result.iterations = iter;
  return result;
}

}  // namespace evbs
