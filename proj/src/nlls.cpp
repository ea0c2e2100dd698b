#include "dplopt/nlls.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dplopt/error.hpp"
#include "dplopt/numeric.hpp"

namespace dplopt {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

class Problem {
 public:
  Problem(const ResidualFunction& fn, std::size_t m, std::span<const double> lower,
          std::span<const double> upper)
      : fn_(fn), m_(m), lower_(lower), upper_(upper), buffer_(m) {}

  std::size_t size() const { return lower_.size(); }
  std::size_t residual_count() const { return m_; }
  int evaluations() const { return evaluations_; }

  /// Returns 0.5 ||r||^2, or +inf when any residual is non-finite.
  double evaluate(std::span<const double> x, std::span<double> out) {
    ++evaluations_;
    fn_(x, out);
    if (!all_finite(out)) return std::numeric_limits<double>::infinity();
    return 0.5 * sum_of_squares(out);
  }

  double cost(std::span<const double> x) { return evaluate(x, buffer_); }

  void clip(std::vector<double>& x) const {
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = std::clamp(x[j], lower_[j], upper_[j]);
  }

  double lower(std::size_t j) const { return lower_[j]; }
  double upper(std::size_t j) const { return upper_[j]; }

 private:
  const ResidualFunction& fn_;
  std::size_t m_;
  std::span<const double> lower_;
  std::span<const double> upper_;
  std::vector<double> buffer_;
  int evaluations_ = 0;
};

/// Central differences, one-sided next to a bound. Returns false when any
/// entry is non-finite.
bool jacobian(Problem& problem, const std::vector<double>& x, std::span<const double> r0,
              double rel_step, MatrixXd& jac) {
  const std::size_t n = x.size();
  const std::size_t m = problem.residual_count();
  jac.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  std::vector<double> xp = x;
  std::vector<double> fwd(m), bwd(m);
  for (std::size_t j = 0; j < n; ++j) {
    double h = rel_step * std::max(std::abs(x[j]), 1e-3);
    const double room_up = problem.upper(j) - x[j];
    const double room_down = x[j] - problem.lower(j);
    const bool can_up = room_up >= h;
    const bool can_down = room_down >= h;
    double hi = x[j], lo = x[j];
    if (can_up && can_down) {
      hi = x[j] + h;
      lo = x[j] - h;
    } else if (can_up || room_up >= room_down) {
      h = std::min(h, room_up);
      hi = x[j] + h;
    } else {
      h = std::min(h, room_down);
      lo = x[j] - h;
    }
    if (!(hi > lo)) {
      jac.col(static_cast<Eigen::Index>(j)).setZero();
      continue;
    }
    xp[j] = hi;
    double c_hi = hi == x[j] ? 0.0 : problem.evaluate(xp, fwd);
    if (hi == x[j]) std::copy(r0.begin(), r0.end(), fwd.begin());
    xp[j] = lo;
    double c_lo = lo == x[j] ? 0.0 : problem.evaluate(xp, bwd);
    if (lo == x[j]) std::copy(r0.begin(), r0.end(), bwd.begin());
    xp[j] = x[j];
    if (!std::isfinite(c_hi) || !std::isfinite(c_lo)) return false;
    const double width = hi - lo;
    for (std::size_t i = 0; i < m; ++i) {
      jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (fwd[i] - bwd[i]) / width;
    }
  }
  return jac.allFinite();
}

bool on_lower(const Problem& p, const std::vector<double>& x, std::size_t j) {
  return x[j] <= p.lower(j);
}
bool on_upper(const Problem& p, const std::vector<double>& x, std::size_t j) {
  return x[j] >= p.upper(j);
}

void finish_bounds(const Problem& problem, NllsResult& result) {
  result.at_bound.assign(result.x.size(), false);
  result.hit_bounds = false;
  for (std::size_t j = 0; j < result.x.size(); ++j) {
    const bool at = on_lower(problem, result.x, j) || on_upper(problem, result.x, j);
    result.at_bound[j] = at;
    result.hit_bounds = result.hit_bounds || at;
  }
}

/// Bounded Nelder-Mead (Lagarias et al. coefficients), vertices clipped
/// into the box.
void nelder_mead(Problem& problem, NllsResult& result, const NllsOptions& options) {
  const std::size_t n = result.x.size();
  std::vector<std::vector<double>> simplex(n + 1, result.x);
  std::vector<double> values(n + 1);
  for (std::size_t j = 0; j < n; ++j) {
    double step = result.x[j] != 0.0 ? 0.05 * std::abs(result.x[j]) : 0.00025;
    if (result.x[j] + step > problem.upper(j)) step = -step;
    simplex[j + 1][j] += step;
    problem.clip(simplex[j + 1]);
  }
  for (std::size_t v = 0; v <= n; ++v) values[v] = problem.cost(simplex[v]);

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), trial(n), trial2(n);
  auto point_at = [&](double t, std::vector<double>& out, const std::vector<double>& worst) {
    for (std::size_t j = 0; j < n; ++j) out[j] = centroid[j] + t * (worst[j] - centroid[j]);
    problem.clip(out);
    return problem.cost(out);
  };

  result.converged = false;
  int iterations = 0;
  while (problem.evaluations() < options.max_nelder_mead_evaluations) {
    ++iterations;
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];

    double spread = std::abs(values[worst] - values[best]);
    double size = 0.0;
    for (std::size_t v = 0; v <= n; ++v) {
      for (std::size_t j = 0; j < n; ++j) {
        size = std::max(size, std::abs(simplex[v][j] - simplex[best][j]) /
                                  std::max(1.0, std::abs(simplex[best][j])));
      }
    }
    if (std::isfinite(values[best]) && spread <= 1e-15 * std::max(values[best], 1e-300) + 1e-300 &&
        size <= 1e-10) {
      result.converged = true;
      break;
    }
    if (size <= 1e-14) {
      result.converged = true;
      break;
    }

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t v = 0; v <= n; ++v) {
      if (v == worst) continue;
      for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[v][j] / static_cast<double>(n);
    }
    const double fr = point_at(-1.0, trial, simplex[worst]);
    if (fr < values[best]) {
      const double fe = point_at(-2.0, trial2, simplex[worst]);
      if (fe < fr) {
        simplex[worst] = trial2;
        values[worst] = fe;
      } else {
        simplex[worst] = trial;
        values[worst] = fr;
      }
      continue;
    }
    if (fr < values[second]) {
      simplex[worst] = trial;
      values[worst] = fr;
      continue;
    }
    const bool outside = fr < values[worst];
    const double fc = point_at(outside ? -0.5 : 0.5, trial2, simplex[worst]);
    if (fc < (outside ? fr : values[worst])) {
      simplex[worst] = trial2;
      values[worst] = fc;
      continue;
    }
    for (std::size_t v = 0; v <= n; ++v) {
      if (v == best) continue;
      for (std::size_t j = 0; j < n; ++j) {
        simplex[v][j] = simplex[best][j] + 0.5 * (simplex[v][j] - simplex[best][j]);
      }
      values[v] = problem.cost(simplex[v]);
    }
  }
  const auto best = static_cast<std::size_t>(
      std::min_element(values.begin(), values.end()) - values.begin());
  if (values[best] <= result.cost) {
    result.x = simplex[best];
    result.cost = values[best];
  }
  result.iterations += iterations;
  result.method = "nelder-mead";
  if (!result.converged) result.message = "simplex search hit its evaluation budget";
}

}  // namespace

double NllsResult::residual_norm() const { return std::sqrt(2.0 * cost); }

NllsResult nlls_solve(const ResidualFunction& residuals, std::size_t residual_count,
                      std::span<const double> initial_guess, std::span<const double> lower,
                      std::span<const double> upper, const NllsOptions& options) {
  const std::size_t n = initial_guess.size();
  if (lower.size() != n || upper.size() != n) {
    throw DimensionError("bounds must match the parameter count");
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (!(lower[j] <= upper[j])) throw DomainError("inconsistent bounds for parameter " + std::to_string(j));
  }
  Problem problem(residuals, residual_count, lower, upper);

  NllsResult result;
  result.x.assign(initial_guess.begin(), initial_guess.end());
  problem.clip(result.x);
  std::vector<double> r(residual_count), r_trial(residual_count);
  result.cost = problem.evaluate(result.x, r);
  if (!std::isfinite(result.cost)) {
    throw DomainError("residuals are not finite at the initial guess");
  }
  result.initial_cost = result.cost;

  MatrixXd jac;
  double mu = -1.0;
  double nu = 2.0;
  int nonfinite_streak = 0;
  bool degenerate = false;
  std::vector<double> trial(n);

  for (result.iterations = 0; result.iterations < options.max_iterations; ++result.iterations) {
    if (result.cost == 0.0) {
      result.converged = true;
      result.message = "zero residual";
      break;
    }
    if (!jacobian(problem, result.x, r, options.fd_relative_step, jac)) {
      throw DivergenceError("non-finite residuals while evaluating the Jacobian", result.x);
    }
    const Eigen::Map<const VectorXd> rv(r.data(), static_cast<Eigen::Index>(residual_count));
    const VectorXd g = jac.transpose() * rv;
    const MatrixXd a = jac.transpose() * jac;

    // Variables pinned on a bound with the gradient pushing outward stay fixed.
    std::vector<Eigen::Index> free;
    double pg = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double gj = g(static_cast<Eigen::Index>(j));
      const bool pinned = (on_lower(problem, result.x, j) && gj > 0.0) ||
                          (on_upper(problem, result.x, j) && gj < 0.0);
      if (!pinned) {
        free.push_back(static_cast<Eigen::Index>(j));
        pg = std::max(pg, std::abs(gj) * std::max(std::abs(result.x[j]), 1.0));
      }
    }
    if (pg <= options.gtol * std::max(result.cost, 1e-300) || free.empty()) {
      // A zero gradient with a nonzero residual on every free column means
      // the local model carries no information.
      bool all_zero = !free.empty();
      for (Eigen::Index j : free) all_zero = all_zero && jac.col(j).isZero(0.0);
      if (all_zero) {
        degenerate = true;
      } else {
        result.converged = true;
        result.message = "projected gradient below tolerance";
      }
      break;
    }

    const auto nf = static_cast<Eigen::Index>(free.size());
    MatrixXd af(nf, nf);
    VectorXd gf(nf);
    double max_diag = 0.0;
    for (Eigen::Index u = 0; u < nf; ++u) {
      gf(u) = g(free[static_cast<std::size_t>(u)]);
      for (Eigen::Index v = 0; v < nf; ++v) af(u, v) = a(free[static_cast<std::size_t>(u)], free[static_cast<std::size_t>(v)]);
      max_diag = std::max(max_diag, af(u, u));
    }
    if (!(max_diag > 0.0)) {
      degenerate = true;
      break;
    }
    VectorXd scale = af.diagonal().cwiseMax(1e-12 * max_diag);
    if (mu < 0.0) mu = options.initial_damping;

    bool accepted = false;
    bool stalled = false;
    while (!accepted) {
      MatrixXd damped = af;
      damped.diagonal() += mu * scale;
      Eigen::LDLT<MatrixXd> ldlt(damped);
      VectorXd step = ldlt.solve(-gf);
      if (ldlt.info() != Eigen::Success || !step.allFinite() || !ldlt.isPositive()) {
        mu *= 10.0;
        if (mu > 1e20) {
          degenerate = true;
          break;
        }
        continue;
      }
      trial = result.x;
      for (Eigen::Index u = 0; u < nf; ++u) trial[static_cast<std::size_t>(free[static_cast<std::size_t>(u)])] += step(u);
      problem.clip(trial);
      const double trial_cost = problem.evaluate(trial, r_trial);
      if (!std::isfinite(trial_cost)) {
        if (++nonfinite_streak > 60) {
          throw DivergenceError("residuals stayed non-finite along every trial step", result.x);
        }
        mu *= nu;
        nu *= 2.0;
        continue;
      }
      nonfinite_streak = 0;
      if (trial_cost < result.cost) {
        // Gain ratio against the linear model (Nielsen's damping update).
        VectorXd actual(nf);
        for (Eigen::Index u = 0; u < nf; ++u) {
          const auto j = static_cast<std::size_t>(free[static_cast<std::size_t>(u)]);
          actual(u) = trial[j] - result.x[j];
        }
        const double predicted = -gf.dot(actual) - 0.5 * actual.dot(af * actual);
        const double rho = predicted > 0.0 ? (result.cost - trial_cost) / predicted : 0.5;
        mu *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
        nu = 2.0;

        double step_norm = 0.0, x_norm = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          step_norm += (trial[j] - result.x[j]) * (trial[j] - result.x[j]);
          x_norm += result.x[j] * result.x[j];
        }
        const double reduction = result.cost - trial_cost;
        result.x = trial;
        std::swap(r, r_trial);
        const double old_cost = result.cost;
        result.cost = trial_cost;
        accepted = true;
        if (reduction <= options.ftol * old_cost) {
          result.converged = true;
          result.message = "relative cost reduction below tolerance";
        } else if (std::sqrt(step_norm) <= options.xtol * (std::sqrt(x_norm) + options.xtol)) {
          result.converged = true;
          result.message = "step length below tolerance";
        }
      } else {
        mu *= nu;
        nu *= 2.0;
        if (mu > 1e16) {
          stalled = true;
          break;
        }
      }
    }
    if (degenerate) break;
    if (stalled) {
      // No descent at any damping: the current point is a minimum to
      // working precision.
      result.converged = true;
      result.message = "no further descent at maximal damping";
      break;
    }
    if (result.converged) {
      ++result.iterations;
      break;
    }
  }

  if (degenerate) {
    nelder_mead(problem, result, options);
  } else if (!result.converged) {
    result.message = "iteration limit reached";
  }
  result.evaluations = problem.evaluations();
  finish_bounds(problem, result);
  return result;
}

const NllsResult& pick_best(std::span<const NllsResult> candidates,
                            std::span<const double> reference) {
  if (candidates.empty()) throw Error("pick_best: no candidates");
  auto distance = [&](const NllsResult& c) {
    double d = 0.0;
    for (std::size_t j = 0; j < c.x.size() && j < reference.size(); ++j) {
      d += (c.x[j] - reference[j]) * (c.x[j] - reference[j]);
    }
    return d;
  };
  const NllsResult* best = &candidates.front();
  for (const auto& c : candidates.subspan(1)) {
    const double tol = 1e-12 * std::max(std::abs(best->cost), std::abs(c.cost));
    if (c.cost < best->cost - tol) {
      best = &c;
    } else if (std::abs(c.cost - best->cost) <= tol && distance(c) < distance(*best)) {
      best = &c;
    }
  }
  return *best;
}

}  // namespace dplopt
