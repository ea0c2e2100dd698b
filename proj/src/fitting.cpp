#include "dplopt/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "dplopt/error.hpp"
#include "dplopt/numeric.hpp"

namespace dplopt {
namespace {

void check_series(std::span<const Observation> obs, const char* what) {
  if (obs.size() < 4) {
    throw InsufficientDataError(std::string(what) + " needs at least 4 observations, got " +
                                std::to_string(obs.size()));
  }
  std::set<double> ratios;
  for (const auto& o : obs) {
    o.validate();
    if (o.direction != obs.front().direction || o.data_size != obs.front().data_size) {
      throw InsufficientDataError(std::string(what) +
                                  " expects observations from a single direction and data size");
    }
    ratios.insert(o.sampling_ratio);
  }
  if (ratios.size() < 3) {
    throw InsufficientDataError(std::string(what) + " needs at least 3 distinct sampling ratios");
  }
}

double capacity_term(double k, double alpha, double p) { return std::pow(k * p, -alpha); }

double loss_range(std::span<const Observation> obs) {
  auto [lo, hi] = std::minmax_element(obs.begin(), obs.end(), [](const auto& a, const auto& b) {
    return a.eval_loss < b.eval_loss;
  });
  return hi->eval_loss - lo->eval_loss;
}

std::vector<double> starts_around(double x0, const Interval& iv) {
  std::vector<double> out;
  for (double f : {1.0, 0.5, 2.0}) {
    const double v = std::clamp(x0 * f, iv.lo, iv.hi);
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  }
  return out;
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double sse = 0.0;
  bool ok = false;
};

/// Least squares y ~ slope * x + intercept.
LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  LinearFit fit;
  const auto n = static_cast<double>(x.size());
  CompensatedSum sx, sy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx.add(x[i]);
    sy.add(y[i]);
  }
  const double mx = sx.value() / n, my = sy.value() / n;
  CompensatedSum sxx, sxy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx.add((x[i] - mx) * (x[i] - mx));
    sxy.add((x[i] - mx) * (y[i] - my));
  }
  if (!(sxx.value() > 0.0)) return fit;
  fit.slope = sxy.value() / sxx.value();
  fit.intercept = my - fit.slope * mx;
  CompensatedSum sse;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - fit.slope * x[i] - fit.intercept;
    sse.add(r * r);
  }
  fit.sse = sse.value();
  fit.ok = std::isfinite(fit.slope) && std::isfinite(fit.intercept);
  return fit;
}

double mean_residual_bias(const DplParams& params, std::span<const Observation> obs) {
  CompensatedSum s;
  for (const auto& o : obs) {
    s.add(o.eval_loss - dpl_shape(params, o.sampling_ratio, {o.direction, o.data_size}));
  }
  return s.value() / static_cast<double>(obs.size());
}

}  // namespace

CapacityFit fit_capacity(std::span<const Observation> obs, const FitConfig& config) {
  check_series(obs, "capacity fit");
  const std::size_t m = obs.size();
  auto residuals = [&](std::span<const double> x, std::span<double> out) {
    for (std::size_t i = 0; i < m; ++i) {
      out[i] = capacity_term(x[0], x[1], obs[i].sampling_ratio) + x[2] - obs[i].eval_loss;
    }
  };
  const std::vector<double> lower = {config.k_bounds.lo, config.alpha_bounds.lo, config.bias_bounds.lo};
  const std::vector<double> upper = {config.k_bounds.hi, config.alpha_bounds.hi, config.bias_bounds.hi};

  std::vector<NllsResult> candidates;
  std::vector<double> reference;
  for (double alpha0 : starts_around(config.alpha0, config.alpha_bounds)) {
    const double k0 = std::clamp(config.k0, config.k_bounds.lo, config.k_bounds.hi);
    CompensatedSum s;
    for (const auto& o : obs) s.add(o.eval_loss - capacity_term(k0, alpha0, o.sampling_ratio));
    const double m0 = std::clamp(s.value() / static_cast<double>(m), config.bias_bounds.lo,
                                 config.bias_bounds.hi);
    const std::vector<double> x0 = {k0, alpha0, m0};
    if (reference.empty()) reference = x0;
    candidates.push_back(nlls_solve(residuals, m, x0, lower, upper, config.solver));
  }
  const NllsResult& best = pick_best(candidates, reference);
  CapacityFit fit;
  fit.k = best.x[0];
  fit.alpha = best.x[1];
  fit.bias = best.x[2];
  fit.solver = best;
  fit.flagged = !best.converged || best.at_bound[0] || best.at_bound[1];
  return fit;
}

OverfitFit fit_overfit_shape(std::span<const Observation> obs, double k, double alpha,
                             const FitConfig& config) {
  check_series(obs, "over-fitting shape fit");
  if (!(k > 0.0 && alpha > 0.0)) throw DomainError("fixed capacity parameters must be > 0");
  const std::size_t m = obs.size();
  std::vector<double> target(m);
  for (std::size_t i = 0; i < m; ++i) {
    target[i] = obs[i].eval_loss - capacity_term(k, alpha, obs[i].sampling_ratio);
  }
  auto residuals = [&](std::span<const double> x, std::span<double> out) {
    for (std::size_t i = 0; i < m; ++i) {
      out[i] = x[1] * std::pow(obs[i].sampling_ratio, x[0]) + x[2] - target[i];
    }
  };
  const std::vector<double> lower = {config.beta_bounds.lo, config.scale_bounds.lo, config.bias_bounds.lo};
  const std::vector<double> upper = {config.beta_bounds.hi, config.scale_bounds.hi, config.bias_bounds.hi};
  const double s0 = std::clamp(config.scale0.value_or(loss_range(obs)), config.scale_bounds.lo,
                               config.scale_bounds.hi);

  std::vector<NllsResult> candidates;
  std::vector<double> reference;
  for (double beta0 : starts_around(config.beta0, config.beta_bounds)) {
    CompensatedSum s;
    for (std::size_t i = 0; i < m; ++i) s.add(target[i] - s0 * std::pow(obs[i].sampling_ratio, beta0));
    const double m0 = std::clamp(s.value() / static_cast<double>(m), config.bias_bounds.lo,
                                 config.bias_bounds.hi);
    const std::vector<double> x0 = {beta0, s0, m0};
    if (reference.empty()) reference = x0;
    candidates.push_back(nlls_solve(residuals, m, x0, lower, upper, config.solver));
  }
  const NllsResult& best = pick_best(candidates, reference);
  OverfitFit fit;
  fit.beta = best.x[0];
  fit.scale = best.x[1];
  fit.bias = best.x[2];
  fit.residual_norm = best.residual_norm();
  fit.iterations = best.iterations;
  fit.converged = best.converged;
  fit.flagged = !best.converged || best.at_bound[0] || best.at_bound[1];
  return fit;
}

OverfitFit fit_overfit_scale(std::span<const Observation> obs, double k, double alpha,
                             double beta) {
  check_series(obs, "over-fitting scale fit");
  std::vector<double> x(obs.size()), y(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    x[i] = std::pow(obs[i].sampling_ratio, beta);
    y[i] = obs[i].eval_loss - capacity_term(k, alpha, obs[i].sampling_ratio);
  }
  const LinearFit lf = linear_fit(x, y);
  if (!lf.ok) throw InsufficientDataError("over-fitting scale fit is degenerate");
  OverfitFit fit;
  fit.beta = beta;
  fit.scale = lf.slope;
  fit.bias = lf.intercept;
  fit.residual_norm = std::sqrt(lf.sse);
  return fit;
}

DataScalingFit fit_data_scaling(std::span<const ScalePoint> points, double beta,
                                const FitConfig& config) {
  std::set<double> sizes;
  for (const auto& pt : points) {
    if (!(pt.data_size > 0.0)) throw DomainError("data sizes must be > 0");
    if (!std::isfinite(pt.scale)) throw DomainError("scales must be finite");
    sizes.insert(pt.data_size);
  }
  if (sizes.size() < 3) {
    throw IdentifiabilityError("data-scaling fit has 3 unknowns (gamma, b, q) and needs at least "
                               "3 distinct data sizes, got " + std::to_string(sizes.size()));
  }
  if (!(beta > 0.0)) throw DomainError("beta must be > 0");
  const std::size_t m = points.size();
  std::vector<double> y(m);
  CompensatedSum sy;
  for (std::size_t i = 0; i < m; ++i) {
    y[i] = points[i].scale;
    sy.add(y[i]);
  }
  const double mean = sy.value() / static_cast<double>(m);

  DataScalingFit fit;
  double spread = 0.0;
  for (double v : y) spread = std::max(spread, std::abs(v - mean));
  if (spread <= 1e-9 * std::max(std::abs(mean), 1e-300)) {
    // Size-independent scales: only (1 + b) q^beta is determined.
    fit.gamma = 0.0;
    fit.q = std::clamp(config.q0, config.q_bounds.lo, config.q_bounds.hi);
    fit.b = mean / std::pow(fit.q, beta) - 1.0;
    fit.data_size_independent = true;
    fit.flagged = true;
    return fit;
  }

  // For fixed gamma the model A D^gamma + B is linear, with A = q^beta > 0
  // and B = b q^beta. Scan gamma, then polish all three jointly.
  std::vector<double> x(m);
  double best_sse = std::numeric_limits<double>::infinity();
  double best_gamma = config.gamma0, best_a = 0.0, best_b = 0.0;
  const double step = 0.01;
  const auto count = static_cast<int>(std::floor((config.gamma_bounds.hi - config.gamma_bounds.lo) / step));
  for (int i = 0; i <= count; ++i) {
    const double gamma = config.gamma_bounds.lo + step * i;
    for (std::size_t j = 0; j < m; ++j) x[j] = std::pow(points[j].data_size, gamma);
    const LinearFit lf = linear_fit(x, y);
    if (!lf.ok || !(lf.slope > 0.0)) continue;
    const double tol = 1e-12 * std::max(best_sse, 1e-300);
    if (lf.sse < best_sse - tol ||
        (std::abs(lf.sse - best_sse) <= tol &&
         std::abs(gamma - config.gamma0) < std::abs(best_gamma - config.gamma0))) {
      best_sse = lf.sse;
      best_gamma = gamma;
      best_a = lf.slope;
      best_b = lf.intercept;
    }
  }
  std::vector<double> x0;
  if (std::isfinite(best_sse)) {
    const double q0 = std::clamp(std::pow(best_a, 1.0 / beta), config.q_bounds.lo, config.q_bounds.hi);
    x0 = {best_gamma, std::clamp(best_b / best_a, config.b_bounds.lo, config.b_bounds.hi), q0};
  } else {
    // Every gamma needs a negative q^beta: no admissible fit.
    fit.flagged = true;
    x0 = {config.gamma0, 0.0, config.q0};
  }

  auto residuals = [&](std::span<const double> v, std::span<double> out) {
    const double qb = std::pow(v[2], beta);
    for (std::size_t j = 0; j < m; ++j) {
      out[j] = (std::pow(points[j].data_size, v[0]) + v[1]) * qb - y[j];
    }
  };
  const std::vector<double> lower = {config.gamma_bounds.lo, config.b_bounds.lo, config.q_bounds.lo};
  const std::vector<double> upper = {config.gamma_bounds.hi, config.b_bounds.hi, config.q_bounds.hi};
  const NllsResult res = nlls_solve(residuals, m, x0, lower, upper, config.solver);
  fit.gamma = res.x[0];
  fit.b = res.x[1];
  fit.q = res.x[2];
  fit.residual_norm = res.residual_norm();
  fit.iterations = res.iterations;
  fit.converged = res.converged;
  fit.flagged = fit.flagged || !res.converged || res.hit_bounds;
  return fit;
}

FitReport fit_full(std::span<const Observation> observations, const FitConfig& config) {
  if (observations.empty()) throw InsufficientDataError("no observations");
  for (const auto& o : observations) o.validate();
  std::vector<Series> series = group_series(observations);

  // Step 1 series: largest data size, first in input order on ties.
  std::size_t high = 0;
  for (std::size_t i = 1; i < series.size(); ++i) {
    if (series[i].data_size > series[high].data_size) high = i;
  }
  std::vector<std::size_t> low;
  std::set<double> low_sizes;
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (i == high) continue;
    low.push_back(i);
    if (series[i].data_size < series[high].data_size) low_sizes.insert(series[i].data_size);
  }

  FitReport report;
  std::vector<SeriesReport> reports(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    reports[i].direction = series[i].direction;
    reports[i].data_size = series[i].data_size;
    reports[i].count = series[i].observations.size();
  }

  CapacityFit cap;
  try {
    cap = fit_capacity(series[high].observations, config);
  } catch (const Error& e) {
    throw FitStepError(1, e.what());
  }
  report.steps.push_back({"capacity", cap.solver.residual_norm(), cap.solver.iterations,
                          cap.solver.converged, cap.flagged});
  reports[high].role = "capacity";
  reports[high].bias = cap.bias;
  if (cap.flagged) report.warnings.push_back("step 1: capacity fit flagged (bound or non-convergence)");

  if (low.empty()) throw FitStepError(2, "no low-resource series in the dataset");
  if (low_sizes.size() < 3) {
    throw FitStepError(3, "identifiability: need low-resource series at >= 3 distinct data sizes "
                          "below the high-resource size, got " + std::to_string(low_sizes.size()));
  }

  // Step 2: beta from the smallest-D series, scales for the rest.
  std::size_t smallest = low.front();
  for (std::size_t i : low) {
    if (series[i].data_size < series[smallest].data_size) smallest = i;
  }
  OverfitFit shape;
  std::vector<ScalePoint> scales;
  StepReport step2{"overfit", 0.0, 0, true, false};
  CompensatedSum step2_sq;
  try {
    shape = fit_overfit_shape(series[smallest].observations, cap.k, cap.alpha, config);
    step2_sq.add(shape.residual_norm * shape.residual_norm);
    step2.iterations += shape.iterations;
    step2.converged = shape.converged;
    step2.flagged = shape.flagged;
    reports[smallest].role = "overfit-shape";
    reports[smallest].scale = shape.scale;
    reports[smallest].bias = shape.bias;
    if (shape.flagged) {
      report.warnings.push_back("step 2: over-fitting shape fit flagged on " +
                                series[smallest].direction + " (no identifiable U shape?)");
    }
    for (std::size_t i : low) {
      OverfitFit f = i == smallest ? shape
                                   : fit_overfit_scale(series[i].observations, cap.k, cap.alpha,
                                                       shape.beta);
      if (i != smallest) {
        step2_sq.add(f.residual_norm * f.residual_norm);
        reports[i].role = "overfit-scale";
        reports[i].scale = f.scale;
        reports[i].bias = f.bias;
      }
      if (series[i].data_size < series[high].data_size) scales.push_back({series[i].data_size, f.scale});
    }
  } catch (const Error& e) {
    throw FitStepError(2, e.what());
  }
  step2.residual_norm = std::sqrt(step2_sq.value());
  report.steps.push_back(step2);

  DataScalingFit scaling;
  try {
    scaling = fit_data_scaling(scales, shape.beta, config);
  } catch (const Error& e) {
    throw FitStepError(3, e.what());
  }
  report.steps.push_back({"data-scaling", scaling.residual_norm, scaling.iterations,
                          scaling.converged, scaling.flagged});
  if (scaling.data_size_independent) {
    report.warnings.push_back("step 3: scales do not depend on data size; gamma set to 0");
  } else if (scaling.flagged) {
    report.warnings.push_back("step 3: data-scaling fit flagged");
  }

  DplParams params;
  params.k = cap.k;
  params.alpha = cap.alpha;
  params.q = scaling.q;
  params.beta = shape.beta;
  params.gamma = scaling.gamma;
  params.b = scaling.b;

  std::vector<double> biases(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    biases[i] = mean_residual_bias(params, series[i].observations);
  }

  bool final_flag = cap.flagged || step2.flagged || scaling.flagged;
  report.converged = cap.solver.converged && step2.converged && scaling.converged;

  if (config.joint_refinement) {
    std::size_t total = observations.size();
    auto residuals = [&](std::span<const double> x, std::span<double> out) {
      DplParams p;
      p.k = x[0];
      p.alpha = x[1];
      p.q = x[2];
      p.beta = x[3];
      p.gamma = x[4];
      p.b = x[5];
      std::size_t r = 0;
      for (std::size_t s = 0; s < series.size(); ++s) {
        for (const auto& o : series[s].observations) {
          out[r++] = dpl_shape(p, o.sampling_ratio, {o.direction, o.data_size}) + x[6 + s] - o.eval_loss;
        }
      }
    };
    std::vector<double> x0 = {params.k, params.alpha, params.q, params.beta, params.gamma, params.b};
    std::vector<double> lower = {config.k_bounds.lo, config.alpha_bounds.lo, config.q_bounds.lo,
                                 config.beta_bounds.lo, config.gamma_bounds.lo, config.b_bounds.lo};
    std::vector<double> upper = {config.k_bounds.hi, config.alpha_bounds.hi, config.q_bounds.hi,
                                 config.beta_bounds.hi, config.gamma_bounds.hi, config.b_bounds.hi};
    for (std::size_t s = 0; s < series.size(); ++s) {
      x0.push_back(std::clamp(biases[s], config.bias_bounds.lo, config.bias_bounds.hi));
      lower.push_back(config.bias_bounds.lo);
      upper.push_back(config.bias_bounds.hi);
    }
    NllsResult joint;
    try {
      joint = nlls_solve(residuals, total, x0, lower, upper, config.solver);
    } catch (const Error& e) {
      throw FitStepError(4, e.what());
    }
    params.k = joint.x[0];
    params.alpha = joint.x[1];
    params.q = joint.x[2];
    params.beta = joint.x[3];
    params.gamma = joint.x[4];
    params.b = joint.x[5];
    report.steps.push_back({"joint", joint.residual_norm(), joint.iterations, joint.converged,
                            !joint.converged || joint.hit_bounds});
    report.converged = joint.converged;
    final_flag = !joint.converged || joint.hit_bounds;
    if (joint.hit_bounds) report.warnings.push_back("joint refinement ended on a parameter bound");
  }

  // Biases keyed by name, or by name@size when a name has several sizes.
  std::map<std::string, int> sizes_per_name;
  for (const auto& s : series) ++sizes_per_name[s.direction];
  for (std::size_t i = 0; i < series.size(); ++i) {
    reports[i].bias = mean_residual_bias(params, series[i].observations);
    const std::string key = sizes_per_name[series[i].direction] > 1
                                ? bias_key(series[i].direction, series[i].data_size)
                                : series[i].direction;
    params.biases[key] = reports[i].bias;
    if (reports[i].role.empty()) reports[i].role = "refit";
  }
  for (std::size_t i = 0; i < series.size(); ++i) {
    try {
      reports[i].r2 = goodness_of_fit(params, series[i].observations);
    } catch (const DomainError&) {
      reports[i].r2.reset();
    }
  }
  report.params = params;
  report.series = std::move(reports);
  report.flagged = final_flag || !report.converged;
  return report;
}

double fit_bias(const DplParams& params, std::span<const Observation> obs) {
  if (obs.empty()) throw InsufficientDataError("bias fit needs at least one observation");
  for (const auto& o : obs) o.validate();
  return mean_residual_bias(params, obs);
}

double goodness_of_fit(const DplParams& params, std::span<const Observation> obs) {
  if (obs.size() < 2) throw InsufficientDataError("r^2 needs at least 2 observations");
  CompensatedSum sum;
  for (const auto& o : obs) sum.add(o.eval_loss);
  const double mean = sum.value() / static_cast<double>(obs.size());
  CompensatedSum ss_res, ss_tot;
  for (const auto& o : obs) {
    const double pred = eval_dpl(params, o.sampling_ratio, {o.direction, o.data_size});
    ss_res.add((o.eval_loss - pred) * (o.eval_loss - pred));
    ss_tot.add((o.eval_loss - mean) * (o.eval_loss - mean));
  }
  if (!(ss_tot.value() > 0.0)) throw DomainError("r^2 is undefined for constant observed losses");
  return 1.0 - ss_res.value() / ss_tot.value();
}

}  // namespace dplopt
