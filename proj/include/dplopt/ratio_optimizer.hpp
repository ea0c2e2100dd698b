#pragma once

// Sampling-ratio selection: minimize sum_i r_i F_i(p_i, D_i) over the
// floored simplex {p_i >= floor, sum p_i = 1}.
//
// The objective is separable. When every weighted F_i is convex on its
// feasible interval the KKT condition r_i F_i'(p_i) = -lambda is solved by
// nested bisection (per coordinate, then over lambda). Otherwise a
// multi-start projected gradient descent is used.
//
// Directions with r_i = 0 do not enter the objective. They receive the
// floor; the weighted directions are then optimized with the remaining
// mass as an upper limit on their total, and any mass they leave unused is
// spread over the zero-weight directions.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dplopt/dpl_model.hpp"
#include "dplopt/kernels.hpp"

namespace dplopt {

struct MetricWeights {
  std::vector<double> r;

  static MetricWeights uniform(std::size_t n);
  /// Throws DomainError unless entries are >= 0 and sum to 1 within 1e-12.
  void validate(std::size_t n) const;
};

enum class SolverMethod { kAuto, kKktBisection, kProjectedGradient };

enum class ZeroWeightSpread { kEqual, kDataShare };

struct OptimizerOptions {
  double floor = 0.01;
  SolverMethod method = SolverMethod::kAuto;
  ZeroWeightSpread spread = ZeroWeightSpread::kEqual;
  int starts = 16;  ///< projected-gradient starts: data share, uniform, then Dirichlet(1)
  std::uint64_t seed = 0;
  int max_iterations = 20000;
};

struct RatioSolution {
  std::vector<double> p;
  double objective = 0.0;
  std::vector<double> losses;  ///< eval_dpl per direction at p
  std::string method;
  int iterations = 0;
  long long evaluations = 0;  ///< grid points visited (grid oracle)
  double kkt_residual = 0.0;
  double multiplier = 0.0;  ///< lambda of the sum constraint
  double floor = 0.0;
  bool converged = true;
  std::vector<std::string> warnings;
};

/// sum_i r_i F_i(p_i); biases are included (missing ones count as 0).
double objective(const DplParams& params, std::span<const double> p, const MetricWeights& weights,
                 std::span<const DirectionSpec> directions);

/// True when r_i F_i'' > 0 on a 64-point log grid over [lo, hi].
bool weighted_term_convex(const DplParams& params, const DirectionSpec& direction, double weight,
                          double lo, double hi);

RatioSolution optimize_ratios(const DplParams& params, std::span<const DirectionSpec> directions,
                              const MetricWeights& weights, const OptimizerOptions& options = {});

struct GridOptions {
  double resolution = 1e-3;
  double floor = 0.01;
  const kernels::KernelTable* kernels = nullptr;  ///< nullptr: kernels::active()
};

/// Exhaustive minimizer over {p = j / N : sum j = N, p_i >= floor}, N = 1 /
/// resolution. At most 4 directions and 2.5e8 grid points.
RatioSolution grid_oracle(const DplParams& params, std::span<const DirectionSpec> directions,
                          const MetricWeights& weights, const GridOptions& options = {});

struct TemperatureCandidate {
  double temperature = 0.0;
  std::vector<double> p;
  double objective = 0.0;
};

/// Objective at the temperature-sampling point for each T.
std::vector<TemperatureCandidate> temperature_candidates(const DplParams& params,
                                                         std::span<const DirectionSpec> directions,
                                                         const MetricWeights& weights,
                                                         std::span<const double> temperatures);

/// Euclidean projection onto {x_i >= floor, sum x = total}.
std::vector<double> project_floored_simplex(std::span<const double> x, double floor, double total);

}  // namespace dplopt
