#include "dplopt/dpl_model.hpp"

#include <charconv>
#include <cmath>
#include <numeric>

#include "dplopt/error.hpp"

namespace dplopt {
namespace {

std::string shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void check_ratio_half_open(double p) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw DomainError("sampling ratio must lie in (0, 1], got " + shortest(p));
  }
}

}  // namespace

void DirectionSpec::validate() const {
  if (!(std::isfinite(data_size) && data_size > 0.0)) {
    throw DomainError("direction '" + name + "': data size must be > 0 million, got " +
                      shortest(data_size));
  }
}

void DplParams::validate() const {
  auto positive = [](double v, const char* what) {
    if (!(std::isfinite(v) && v > 0.0)) {
      throw DomainError(std::string(what) + " must be finite and > 0, got " + shortest(v));
    }
  };
  positive(k, "k");
  positive(alpha, "alpha");
  positive(q, "q");
  positive(beta, "beta");
  if (!std::isfinite(gamma)) throw DomainError("gamma must be finite");
  if (!std::isfinite(b)) throw DomainError("b must be finite");
  for (const auto& [key, value] : biases) {
    if (!std::isfinite(value)) throw DomainError("bias for '" + key + "' must be finite");
  }
}

std::string bias_key(const std::string& name, double data_size) {
  return name + "@" + shortest(data_size);
}

std::optional<double> DplParams::find_bias(const DirectionSpec& direction) const {
  if (auto it = biases.find(bias_key(direction.name, direction.data_size)); it != biases.end()) {
    return it->second;
  }
  if (auto it = biases.find(direction.name); it != biases.end()) return it->second;
  return std::nullopt;
}

double overfit_coefficient(const DplParams& params, const DirectionSpec& direction) {
  direction.validate();
  return std::pow(direction.data_size, params.gamma) + params.b;
}

double dpl_shape(const DplParams& params, double p, const DirectionSpec& direction) {
  check_ratio_half_open(p);
  params.validate();
  const double capacity = std::pow(params.k * p, -params.alpha);
  const double overfit = overfit_coefficient(params, direction) * std::pow(params.q * p, params.beta);
  return capacity + overfit;
}

DplValue evaluate_dpl(const DplParams& params, double p, const DirectionSpec& direction,
                      const EvalOptions& options) {
  DplValue out;
  out.loss = dpl_shape(params, p, direction);
  if (auto bias = params.find_bias(direction)) {
    out.loss += *bias;
  } else if (options.strict_bias) {
    throw MissingBiasError("no bias term for direction '" + direction.name + "'");
  } else {
    out.bias_defaulted = true;
  }
  out.extrapolated = p < kValidatedRatioLow || p > kValidatedRatioHigh;
  return out;
}

double eval_dpl(const DplParams& params, double p, const DirectionSpec& direction,
                const EvalOptions& options) {
  return evaluate_dpl(params, p, direction, options).loss;
}

double dpl_derivative(const DplParams& params, double p, const DirectionSpec& direction) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("derivative requires p in (0, 1), got " + shortest(p));
  }
  const double c = overfit_coefficient(params, direction);
  const double capacity = -params.alpha * std::pow(params.k, -params.alpha) *
                          std::pow(p, -params.alpha - 1.0);
  const double overfit =
      params.beta * c * std::pow(params.q, params.beta) * std::pow(p, params.beta - 1.0);
  return capacity + overfit;
}

double dpl_second_derivative(const DplParams& params, double p, const DirectionSpec& direction) {
  check_ratio_half_open(p);
  const double c = overfit_coefficient(params, direction);
  const double a = params.alpha;
  const double capacity = a * (a + 1.0) * std::pow(params.k, -a) * std::pow(p, -a - 2.0);
  const double overfit = params.beta * (params.beta - 1.0) * c * std::pow(params.q, params.beta) *
                         std::pow(p, params.beta - 2.0);
  return capacity + overfit;
}

std::optional<CriticalPoint> critical_point(const DplParams& params,
                                            const DirectionSpec& direction) {
  params.validate();
  const double c = overfit_coefficient(params, direction);
  if (!(c > 0.0)) return std::nullopt;
  const double numer = params.alpha * std::pow(params.k, -params.alpha);
  const double denom = params.beta * c * std::pow(params.q, params.beta);
  CriticalPoint cp;
  cp.ratio = std::pow(numer / denom, 1.0 / (params.alpha + params.beta));
  cp.kind = cp.ratio < 1.0 ? CriticalPoint::Kind::kInterior : CriticalPoint::Kind::kBeyondRange;
  return cp;
}

std::vector<double> temperature_weights(std::span<const double> data_shares, double temperature) {
  if (data_shares.empty()) throw DomainError("temperature sampling needs at least one share");
  if (!(std::isfinite(temperature) && temperature > 0.0)) {
    throw DomainError("temperature must be > 0, got " + shortest(temperature));
  }
  std::vector<double> w(data_shares.size());
  // Scale by the largest share before exponentiating so huge T stays exact.
  double largest = 0.0;
  for (double s : data_shares) {
    if (!(std::isfinite(s) && s > 0.0)) {
      throw DomainError("data shares must be > 0, got " + shortest(s));
    }
    largest = std::max(largest, s);
  }
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::pow(data_shares[i] / largest, 1.0 / temperature);
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= total;
  return w;
}

std::vector<double> temperature_weights_from_sizes(std::span<const double> data_sizes,
                                                   double temperature) {
  double total = 0.0;
  for (double s : data_sizes) {
    if (!(std::isfinite(s) && s > 0.0)) throw DomainError("data sizes must be > 0");
    total += s;
  }
  std::vector<double> shares(data_sizes.begin(), data_sizes.end());
  for (double& s : shares) s /= total;
  return temperature_weights(shares, temperature);
}

Curve predict_curve(const DplParams& params, const DirectionSpec& direction,
                    std::span<const double> grid, const EvalOptions& options) {
  params.validate();
  Curve curve;
  curve.points.reserve(grid.size());
  for (double p : grid) {
    const DplValue v = evaluate_dpl(params, p, direction, options);
    curve.points.push_back({p, v.loss, v.extrapolated});
    curve.bias_defaulted = curve.bias_defaulted || v.bias_defaulted;
  }
  return curve;
}

std::vector<double> ratio_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi >= lo)) throw DomainError("invalid grid specification");
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> grid(n);
  // Snap to 12 decimals so 0.1 + 2 * 0.1 comes out as 0.3.
  for (std::size_t i = 0; i < n; ++i) {
    grid[i] = std::round((lo + static_cast<double>(i) * step) * 1e12) / 1e12;
  }
  return grid;
}

}  // namespace dplopt
