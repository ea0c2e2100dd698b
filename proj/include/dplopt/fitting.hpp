#pragma once

// Staged estimation of Double Power Law parameters from experiment logs.
//
//   step 1  capacity term (k, alpha) on the largest-D series, ignoring the
//           over-fitting term;
//   step 2  with (k, alpha) fixed, beta and a composite scale
//           s = (D^gamma + b) q^beta on the smallest-D series, then the scale
//           alone (beta fixed) on every other low-resource series;
//   step 3  (gamma, b, q) from the collected (D_j, s_j) pairs;
//   step 4  joint refinement of all shared parameters and per-series biases,
//           started from steps 1-3.
//
// The composite scale makes the (D^gamma + b) vs q gauge explicit: step 2
// never has to separate them, step 3 does so with >= 3 data sizes.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dplopt/dpl_model.hpp"
#include "dplopt/nlls.hpp"
#include "dplopt/observations.hpp"

namespace dplopt {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct FitConfig {
  double k0 = 0.1;
  double alpha0 = 0.3;
  double beta0 = 1.0;
  std::optional<double> scale0;  ///< step-2 scale start; range(loss) when empty
  double q0 = 1.0;
  double gamma0 = -0.3;

  Interval k_bounds{1e-4, 1e2};
  Interval alpha_bounds{0.01, 2.0};
  Interval q_bounds{1e-4, 1e2};
  Interval beta_bounds{0.1, 10.0};
  Interval gamma_bounds{-5.0, 5.0};
  Interval b_bounds{-100.0, 100.0};
  Interval scale_bounds{0.0, 1e3};
  Interval bias_bounds{-1e3, 1e3};

  bool joint_refinement = true;
  NllsOptions solver;
};

struct CapacityFit {
  double k = 0.0;
  double alpha = 0.0;
  double bias = 0.0;
  NllsResult solver;
  bool flagged = false;  ///< not converged or a bound is active
};

struct OverfitFit {
  double beta = 0.0;
  double scale = 0.0;  ///< (D^gamma + b) q^beta for the series
  double bias = 0.0;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = true;
  bool flagged = false;
};

struct ScalePoint {
  double data_size = 0.0;
  double scale = 0.0;
};

struct DataScalingFit {
  double gamma = 0.0;
  double b = 0.0;
  double q = 0.0;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = true;
  bool data_size_independent = false;  ///< all scales equal: gamma set to 0
  bool flagged = false;
};

struct SeriesReport {
  std::string direction;
  double data_size = 0.0;
  std::size_t count = 0;
  std::string role;    ///< "capacity", "overfit-shape", "overfit-scale" or "refit"
  double scale = 0.0;  ///< step-2 composite scale (0 for the capacity series)
  double bias = 0.0;
  std::optional<double> r2;  ///< empty when the series losses are constant
};

struct StepReport {
  std::string name;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = true;
  bool flagged = false;
};

struct FitReport {
  DplParams params;
  std::vector<SeriesReport> series;
  std::vector<StepReport> steps;
  std::vector<std::string> warnings;
  bool converged = false;
  bool flagged = false;  ///< non-convergence or a final parameter on a bound
};

/// Step 1: loss ~ (k p)^(-alpha) + M on one high-resource series.
CapacityFit fit_capacity(std::span<const Observation> observations, const FitConfig& config = {});

/// Step 2: loss ~ (k p)^(-alpha) + s p^beta + M with (k, alpha) fixed.
OverfitFit fit_overfit_shape(std::span<const Observation> observations, double k, double alpha,
                             const FitConfig& config = {});

/// Step 2 with beta also fixed; the model is linear in (s, M) and s may be
/// negative (high-resource series).
OverfitFit fit_overfit_scale(std::span<const Observation> observations, double k, double alpha,
                             double beta);

/// Step 3: s_j ~ (D_j^gamma + b) q^beta.
DataScalingFit fit_data_scaling(std::span<const ScalePoint> points, double beta,
                                const FitConfig& config = {});

/// All steps on a dataset with one high-resource series (largest D) and
/// low-resource series at >= 3 distinct smaller sizes. Errors are rethrown
/// as FitStepError carrying the step index.
FitReport fit_full(std::span<const Observation> observations, const FitConfig& config = {});

/// Closed-form bias for new observations: mean of loss - shape(p, D).
double fit_bias(const DplParams& params, std::span<const Observation> observations);

/// 1 - SS_res / SS_tot of eval_dpl predictions.
double goodness_of_fit(const DplParams& params, std::span<const Observation> observations);

}  // namespace dplopt
