#pragma once

// Bounded nonlinear least squares: minimize 0.5 * ||r(x)||^2 subject to
// lower <= x <= upper. Levenberg-Marquardt on a central-difference Jacobian,
// with bounds enforced by clipping each trial step. If the damped normal
// equations cannot be solved (degenerate or non-finite Jacobian) the solver
// switches to a bounded Nelder-Mead simplex search from the best point.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace dplopt {

/// Writes residuals for parameters `x` into `out` (size fixed per problem).
using ResidualFunction = std::function<void(std::span<const double> x, std::span<double> out)>;

struct NllsOptions {
  int max_iterations = 2000;
  double ftol = 1e-15;   ///< relative cost reduction
  double xtol = 1e-13;   ///< relative step length
  double gtol = 1e-14;   ///< scaled projected-gradient infinity norm
  double fd_relative_step = 1e-6;
  double initial_damping = 1e-3;
  int max_nelder_mead_evaluations = 20000;
};

struct NllsResult {
  std::vector<double> x;
  double initial_cost = 0.0;  ///< 0.5 ||r(x0)||^2
  double cost = 0.0;          ///< 0.5 ||r(x)||^2
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  /// One entry per parameter: true when x sits on a bound at exit.
  std::vector<bool> at_bound;
  bool hit_bounds = false;
  std::string method = "levenberg-marquardt";
  std::string message;

  double residual_norm() const;
};

/// Requires r(x0) finite and lower <= upper. The initial guess is clipped
/// into the box. Throws DivergenceError (with the best point so far) when
/// the Jacobian cannot be evaluated or evaluation keeps failing.
NllsResult nlls_solve(const ResidualFunction& residuals, std::size_t residual_count,
                      std::span<const double> initial_guess, std::span<const double> lower,
                      std::span<const double> upper, const NllsOptions& options = {});

/// Of several solutions, the lowest cost wins; costs equal to within a
/// relative 1e-12 are broken by smaller ||x - reference||.
const NllsResult& pick_best(std::span<const NllsResult> candidates,
                            std::span<const double> reference);

}  // namespace dplopt
