#include "dplopt/ratio_optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dplopt/error.hpp"
#include "dplopt/numeric.hpp"
#include "dplopt/rng.hpp"

namespace dplopt {
namespace {

void check_aligned(std::size_t n, const MetricWeights& weights,
                   std::span<const DirectionSpec> directions) {
  if (directions.size() != n || weights.r.size() != n) {
    throw DimensionError("ratios, weights and directions must have the same length (" +
                         std::to_string(n) + ", " + std::to_string(weights.r.size()) + ", " +
                         std::to_string(directions.size()) + ")");
  }
}

/// Weighted part of the problem: coordinates with r_i > 0.
struct Subproblem {
  const DplParams* params;
  std::vector<DirectionSpec> directions;
  std::vector<double> weights;
  double floor = 0.0;
  double mass = 0.0;    ///< upper limit (inequality) or exact total of sum p
  bool equality = true;  ///< no zero-weight directions to absorb slack

  std::size_t size() const { return weights.size(); }
  double upper() const { return mass - floor * static_cast<double>(size() - 1); }

  double gradient(std::size_t i, double p) const {
    return weights[i] * dpl_derivative(*params, p, directions[i]);
  }
  double value(std::span<const double> p) const {
    CompensatedSum s;
    for (std::size_t i = 0; i < size(); ++i) s.add(weights[i] * dpl_shape(*params, p[i], directions[i]));
    return s.value();
  }
};

/// p in [lo, hi] with g(p) = target for increasing g, clamped at the ends.
template <class G>
double solve_increasing(const G& g, double target, double lo, double hi) {
  if (g(lo) >= target) return lo;
  if (g(hi) <= target) return hi;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (g(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct KktResult {
  std::vector<double> p;
  double lambda = 0.0;
  int iterations = 0;
};

KktResult solve_kkt(const Subproblem& sp) {
  const std::size_t n = sp.size();
  const double lo = sp.floor, hi = sp.upper();
  KktResult out;
  out.p.resize(n);
  auto allocate = [&](double lambda) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      out.p[i] = solve_increasing([&](double p) { return sp.gradient(i, p); }, -lambda, lo, hi);
      total += out.p[i];
    }
    return total;
  };

  if (!sp.equality && allocate(0.0) <= sp.mass) {
    out.lambda = 0.0;
    return out;
  }
  // sum p(lambda) is non-increasing; bracket with all-at-upper / all-at-floor.
  double lam_lo = std::numeric_limits<double>::infinity();
  double lam_hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    lam_lo = std::min(lam_lo, -sp.gradient(i, hi));
    lam_hi = std::max(lam_hi, -sp.gradient(i, lo));
  }
  if (!sp.equality) lam_lo = std::max(lam_lo, 0.0);
  for (out.iterations = 0; out.iterations < 300; ++out.iterations) {
    const double mid = 0.5 * (lam_lo + lam_hi);
    if (mid <= lam_lo || mid >= lam_hi) break;
    (allocate(mid) > sp.mass ? lam_lo : lam_hi) = mid;
  }
  out.lambda = 0.5 * (lam_lo + lam_hi);
  allocate(out.lambda);

  // Close the remaining sum gap on coordinates strictly inside their range.
  double gap = sp.mass - std::accumulate(out.p.begin(), out.p.end(), 0.0);
  std::vector<std::size_t> movable;
  for (std::size_t i = 0; i < n; ++i) {
    if (out.p[i] > lo && out.p[i] < hi) movable.push_back(i);
  }
  if (movable.empty()) {
    for (std::size_t i = 0; i < n; ++i) movable.push_back(i);
  }
  for (std::size_t i : movable) out.p[i] += gap / static_cast<double>(movable.size());
  return out;
}

std::vector<double> project_capped(const Subproblem& sp, std::span<const double> x) {
  if (!sp.equality) {
    std::vector<double> clipped(x.begin(), x.end());
    double total = 0.0;
    for (double& v : clipped) {
      v = std::max(v, sp.floor);
      total += v;
    }
    if (total <= sp.mass) return clipped;
  }
  return project_floored_simplex(x, sp.floor, sp.mass);
}

struct PgdResult {
  std::vector<double> p;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

PgdResult projected_gradient(const Subproblem& sp, std::vector<double> x, int max_iterations) {
  const std::size_t n = sp.size();
  PgdResult out;
  x = project_capped(sp, x);
  double fx = sp.value(x);
  double step = 1e-2;
  std::vector<double> g(n), trial(n), moved(n);
  for (out.iterations = 0; out.iterations < max_iterations; ++out.iterations) {
    for (std::size_t i = 0; i < n; ++i) g[i] = sp.gradient(i, x[i]);
    bool accepted = false;
    double ft = fx;
    for (int bt = 0; bt < 80; ++bt) {
      for (std::size_t i = 0; i < n; ++i) moved[i] = x[i] - step * g[i];
      trial = project_capped(sp, moved);
      ft = sp.value(trial);
      double lin = 0.0, sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = trial[i] - x[i];
        lin += g[i] * d;
        sq += d * d;
      }
      if (ft <= fx + lin + sq / (2.0 * step)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      out.converged = true;
      break;
    }
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) change = std::max(change, std::abs(trial[i] - x[i]));
    x = trial;
    fx = ft;
    if (change <= 1e-14) {
      out.converged = true;
      ++out.iterations;
      break;
    }
    step *= 1.5;
  }
  out.p = std::move(x);
  out.value = fx;
  return out;
}

double kkt_residual(const Subproblem& sp, std::span<const double> p, double& lambda) {
  const std::size_t n = sp.size();
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  const double hi = sp.upper();
  std::vector<double> g(n);
  CompensatedSum interior_sum;
  int interior = 0;
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = sp.gradient(i, p[i]);
    if (p[i] > sp.floor + 1e-12 && p[i] < hi - 1e-12) {
      interior_sum.add(g[i]);
      ++interior;
    }
  }
  if (!sp.equality && total < sp.mass - 1e-12) {
    lambda = 0.0;
  } else if (interior > 0) {
    lambda = -interior_sum.value() / interior;
    if (!sp.equality) lambda = std::max(lambda, 0.0);
  }
  double residual = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = g[i] + lambda;
    if (p[i] <= sp.floor + 1e-12) {
      residual = std::max(residual, std::max(0.0, -s));
    } else if (p[i] >= hi - 1e-12) {
      residual = std::max(residual, std::max(0.0, s));
    } else {
      residual = std::max(residual, std::abs(s));
    }
  }
  return residual;
}

bool lexicographically_less(std::span<const double> a, std::span<const double> b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

long long binomial(long long n, long long k) {
  if (k < 0 || n < k) return 0;
  long double r = 1.0L;
  for (long long i = 1; i <= k; ++i) r = r * static_cast<long double>(n - k + i) / static_cast<long double>(i);
  return static_cast<long long>(std::llround(r));
}

}  // namespace

MetricWeights MetricWeights::uniform(std::size_t n) {
  return {std::vector<double>(n, 1.0 / static_cast<double>(n))};
}

void MetricWeights::validate(std::size_t n) const {
  if (r.size() != n) {
    throw DimensionError("expected " + std::to_string(n) + " metric weights, got " +
                         std::to_string(r.size()));
  }
  CompensatedSum total;
  for (double v : r) {
    if (!(std::isfinite(v) && v >= 0.0)) throw DomainError("metric weights must be >= 0");
    total.add(v);
  }
  if (std::abs(total.value() - 1.0) > 1e-12) {
    throw DomainError("metric weights must sum to 1 (got " + std::to_string(total.value()) +
                      "); normalize them first");
  }
}

double objective(const DplParams& params, std::span<const double> p, const MetricWeights& weights,
                 std::span<const DirectionSpec> directions) {
  check_aligned(p.size(), weights, directions);
  CompensatedSum total, mass;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] > 0.0)) throw DomainError("objective requires every sampling ratio > 0");
    mass.add(p[i]);
    total.add(weights.r[i] * eval_dpl(params, p[i], directions[i]));
  }
  if (std::abs(mass.value() - 1.0) > 1e-9) throw DomainError("sampling ratios must sum to 1");
  return total.value();
}

bool weighted_term_convex(const DplParams& params, const DirectionSpec& direction, double weight,
                          double lo, double hi) {
  if (weight == 0.0) return true;
  const int samples = 64;
  const double llo = std::log(lo), lhi = std::log(hi);
  for (int s = 0; s < samples; ++s) {
    const double p = std::exp(llo + (lhi - llo) * s / (samples - 1));
    if (weight * dpl_second_derivative(params, std::min(p, hi), direction) < 0.0) return false;
  }
  return true;
}

std::vector<double> project_floored_simplex(std::span<const double> x, double floor, double total) {
  const std::size_t n = x.size();
  const double budget = total - floor * static_cast<double>(n);
  if (budget < 0.0) throw InfeasibleError("floor * n exceeds the total mass");
  // Standard sort-based simplex projection on y = x - floor.
  std::vector<double> y(n), sorted(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] - floor;
  sorted = y;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double running = 0.0, theta = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    running += sorted[j];
    const double t = (running - budget) / static_cast<double>(j + 1);
    if (sorted[j] - t > 0.0) theta = t;
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::max(y[i] - theta, 0.0) + floor;
  return out;
}

RatioSolution optimize_ratios(const DplParams& params, std::span<const DirectionSpec> directions,
                              const MetricWeights& weights, const OptimizerOptions& options) {
  const std::size_t n = directions.size();
  if (n < 2) throw DimensionError("ratio optimization needs at least 2 directions");
  params.validate();
  weights.validate(n);
  for (const auto& d : directions) d.validate();
  if (!(options.floor > 0.0)) throw InfeasibleError("floor must be > 0 (ratios must stay positive)");
  if (!(options.floor * static_cast<double>(n) < 1.0)) {
    throw InfeasibleError("floor * number of directions must be < 1");
  }

  std::vector<std::size_t> weighted, zero;
  for (std::size_t i = 0; i < n; ++i) (weights.r[i] > 0.0 ? weighted : zero).push_back(i);

  Subproblem sp;
  sp.params = &params;
  sp.floor = options.floor;
  sp.mass = 1.0 - options.floor * static_cast<double>(zero.size());
  sp.equality = zero.empty();
  for (std::size_t i : weighted) {
    sp.directions.push_back(directions[i]);
    sp.weights.push_back(weights.r[i]);
  }

  RatioSolution sol;
  sol.floor = options.floor;
  std::vector<double> pw;

  const double hi = sp.upper();
  bool convex = true;
  for (std::size_t i = 0; i < sp.size(); ++i) {
    convex = convex && weighted_term_convex(params, sp.directions[i], sp.weights[i], sp.floor, hi);
  }
  SolverMethod method = options.method;
  if (method == SolverMethod::kAuto) {
    method = convex ? SolverMethod::kKktBisection : SolverMethod::kProjectedGradient;
  }
  if (method == SolverMethod::kKktBisection && !convex) {
    sol.warnings.push_back("KKT bisection forced on a non-convex instance");
  }

  if (method == SolverMethod::kKktBisection) {
    KktResult k = solve_kkt(sp);
    pw = std::move(k.p);
    sol.iterations = k.iterations;
    sol.method = "kkt-bisection";
  } else {
    // Starts: data share, uniform, then Dirichlet(1) draws.
    std::vector<std::vector<double>> starts;
    double total_size = 0.0;
    for (const auto& d : sp.directions) total_size += d.data_size;
    std::vector<double> share;
    for (const auto& d : sp.directions) share.push_back(sp.mass * d.data_size / total_size);
    starts.push_back(share);
    starts.emplace_back(sp.size(), sp.mass / static_cast<double>(sp.size()));
    Rng rng(derive_seed(options.seed, 0x5ea7));
    while (static_cast<int>(starts.size()) < std::max(options.starts, 2)) {
      auto d = rng.dirichlet_ones(sp.size());
      for (double& v : d) v *= sp.mass;
      starts.push_back(std::move(d));
    }
    PgdResult best;
    best.value = std::numeric_limits<double>::infinity();
    bool any_converged = false;
    for (const auto& start : starts) {
      PgdResult r = projected_gradient(sp, start, options.max_iterations);
      sol.iterations += r.iterations;
      any_converged = any_converged || r.converged;
      if (r.value < best.value || (r.value == best.value && lexicographically_less(r.p, best.p))) {
        best = std::move(r);
      }
    }
    pw = std::move(best.p);
    sol.converged = any_converged;
    if (!any_converged) sol.warnings.push_back("no projected-gradient start converged");
    sol.method = "projected-gradient";
  }

  sol.kkt_residual = kkt_residual(sp, pw, sol.multiplier);

  // Assemble the full vector; unused mass goes to zero-weight directions.
  sol.p.assign(n, options.floor);
  double used = 0.0;
  for (std::size_t u = 0; u < weighted.size(); ++u) {
    sol.p[weighted[u]] = pw[u];
    used += pw[u];
  }
  if (!zero.empty()) {
    const double slack = std::max(0.0, sp.mass - used);
    double zero_total = 0.0;
    for (std::size_t i : zero) zero_total += directions[i].data_size;
    for (std::size_t i : zero) {
      const double share = options.spread == ZeroWeightSpread::kDataShare
                               ? directions[i].data_size / zero_total
                               : 1.0 / static_cast<double>(zero.size());
      sol.p[i] += slack * share;
    }
  }
  // Exact feasibility: last-bit renormalization on the largest coordinate.
  const double total = std::accumulate(sol.p.begin(), sol.p.end(), 0.0);
  auto largest = std::max_element(sol.p.begin(), sol.p.end());
  *largest += 1.0 - total;
  for (double& v : sol.p) v = std::max(v, options.floor);

  sol.objective = objective(params, sol.p, weights, directions);
  for (std::size_t i = 0; i < n; ++i) sol.losses.push_back(eval_dpl(params, sol.p[i], directions[i]));
  return sol;
}

RatioSolution grid_oracle(const DplParams& params, std::span<const DirectionSpec> directions,
                          const MetricWeights& weights, const GridOptions& options) {
  const std::size_t n = directions.size();
  if (n < 2 || n > 4) throw BudgetError("grid oracle supports 2 to 4 directions, got " + std::to_string(n));
  params.validate();
  weights.validate(n);
  if (!(options.resolution > 0.0)) throw DomainError("grid resolution must be > 0");
  const double steps = 1.0 / options.resolution;
  const auto N = static_cast<long long>(std::llround(steps));
  if (N < 1 || std::abs(steps - static_cast<double>(N)) > 1e-6 * steps) {
    throw DomainError("grid resolution must divide 1 evenly");
  }
  const long long jmin = std::max<long long>(1, static_cast<long long>(
                                                    std::ceil(options.floor * static_cast<double>(N) - 1e-9)));
  const long long free_steps = N - static_cast<long long>(n) * jmin;
  if (free_steps < 0) throw InfeasibleError("no grid point satisfies the floor");
  const long long points = binomial(free_steps + static_cast<long long>(n) - 1, static_cast<long long>(n) - 1);
  if (points > 250'000'000LL) {
    throw BudgetError("grid oracle would visit " + std::to_string(points) +
                      " points (limit 2.5e8); coarsen the resolution");
  }
  const kernels::KernelTable& kt = options.kernels ? *options.kernels : kernels::active();

  // tables[i][j] = r_i F_i(j / N); the last table is stored reversed so the
  // innermost loop reads both operands contiguously.
  const auto width = static_cast<std::size_t>(N + 1);
  std::vector<std::vector<double>> tables(n, std::vector<double>(width, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (long long j = jmin; j <= N; ++j) {
      const double p = static_cast<double>(j) / static_cast<double>(N);
      tables[i][static_cast<std::size_t>(j)] = weights.r[i] * eval_dpl(params, p, directions[i]);
    }
  }
  std::vector<double> reversed(width);
  for (std::size_t j = 0; j < width; ++j) reversed[j] = tables[n - 1][width - 1 - j];

  double best = std::numeric_limits<double>::infinity();
  std::vector<long long> best_j(n, 0), outer(n, 0);
  // Inner scan over j_{n-2} in [jmin, rem - jmin] with j_{n-1} = rem - j_{n-2}.
  auto scan = [&](double base, long long rem) {
    const long long count = rem - 2 * jmin + 1;
    if (count <= 0) return;
    const double* a = tables[n - 2].data() + jmin;
    const double* b = reversed.data() + (N - rem) + jmin;
    const kernels::MinLocation loc = kt.min_sum(base, a, b, static_cast<std::size_t>(count));
    if (loc.value < best) {
      best = loc.value;
      best_j = outer;
      best_j[n - 2] = jmin + static_cast<long long>(loc.index);
      best_j[n - 1] = rem - best_j[n - 2];
    }
  };
  if (n == 2) {
    scan(0.0, N);
  } else if (n == 3) {
    for (long long j0 = jmin; j0 <= N - 2 * jmin; ++j0) {
      outer[0] = j0;
      scan(tables[0][static_cast<std::size_t>(j0)], N - j0);
    }
  } else {
    for (long long j0 = jmin; j0 <= N - 3 * jmin; ++j0) {
      outer[0] = j0;
      for (long long j1 = jmin; j1 <= N - j0 - 2 * jmin; ++j1) {
        outer[1] = j1;
        scan(tables[0][static_cast<std::size_t>(j0)] + tables[1][static_cast<std::size_t>(j1)],
             N - j0 - j1);
      }
    }
  }

  RatioSolution sol;
  sol.method = "grid";
  sol.floor = options.floor;
  sol.evaluations = points;
  for (std::size_t i = 0; i < n; ++i) {
    sol.p.push_back(static_cast<double>(best_j[i]) / static_cast<double>(N));
  }
  sol.objective = objective(params, sol.p, weights, directions);
  for (std::size_t i = 0; i < n; ++i) sol.losses.push_back(eval_dpl(params, sol.p[i], directions[i]));
  return sol;
}

std::vector<TemperatureCandidate> temperature_candidates(const DplParams& params,
                                                         std::span<const DirectionSpec> directions,
                                                         const MetricWeights& weights,
                                                         std::span<const double> temperatures) {
  std::vector<double> sizes;
  for (const auto& d : directions) sizes.push_back(d.data_size);
  std::vector<TemperatureCandidate> out;
  for (double t : temperatures) {
    TemperatureCandidate c;
    c.temperature = t;
    c.p = temperature_weights_from_sizes(sizes, t);
    c.objective = objective(params, c.p, weights, directions);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace dplopt
