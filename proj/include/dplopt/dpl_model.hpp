#pragma once

// Double Power Law for per-direction generalization loss as a function of
// the direction's sampling ratio p and its training-set size D (millions):
//
//   F(p, D) = (k p)^(-alpha) + (D^gamma + b) (q p)^beta + M
//
// The first term is the capacity-occupation term, the second the intrinsic
// over-fitting term whose scale D^gamma + b shrinks with data size, and M is
// a per-direction bias.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dplopt {

struct DirectionSpec {
  std::string name;
  double data_size = 1.0;  ///< millions of training examples

  /// Throws DomainError unless data_size is finite and > 0.
  void validate() const;
};

struct DplParams {
  double k = 0.07;
  double alpha = 0.20;
  double q = 1.18;
  double beta = 1.21;
  double gamma = -0.33;
  double b = -0.50;
  /// Bias per direction. Keys are either a direction name or
  /// "name@size" (see bias_key) when one name occurs at several sizes.
  std::map<std::string, double> biases;

  /// Throws DomainError unless k, alpha, q, beta > 0 and all fields finite.
  void validate() const;

  /// Bias lookup: "name@size" first, then "name". Empty when absent.
  std::optional<double> find_bias(const DirectionSpec& direction) const;
};

/// Key used for biases fitted per (direction, data size) pair.
std::string bias_key(const std::string& name, double data_size);

struct EvalOptions {
  /// Missing biases raise MissingBiasError instead of defaulting to 0.
  bool strict_bias = false;
};

/// Evaluation with diagnostic flags.
struct DplValue {
  double loss = 0.0;
  bool bias_defaulted = false;  ///< no bias stored; 0 was used
  bool extrapolated = false;    ///< p outside the validated range [0.1, 0.9]
};

inline constexpr double kValidatedRatioLow = 0.1;
inline constexpr double kValidatedRatioHigh = 0.9;

/// D^gamma + b. Positive means the curve can be U-shaped.
double overfit_coefficient(const DplParams& params, const DirectionSpec& direction);

/// Loss without the bias term.
double dpl_shape(const DplParams& params, double p, const DirectionSpec& direction);

DplValue evaluate_dpl(const DplParams& params, double p, const DirectionSpec& direction,
                      const EvalOptions& options = {});

/// Predicted cross-entropy; p must lie in (0, 1].
double eval_dpl(const DplParams& params, double p, const DirectionSpec& direction,
                const EvalOptions& options = {});

/// dF/dp in closed form; p must lie in the open interval (0, 1).
double dpl_derivative(const DplParams& params, double p, const DirectionSpec& direction);

/// d2F/dp2 in closed form; p must lie in (0, 1].
double dpl_second_derivative(const DplParams& params, double p, const DirectionSpec& direction);

struct CriticalPoint {
  enum class Kind {
    kInterior,     ///< minimizer inside (0, 1)
    kBeyondRange,  ///< stationary point exists but p* >= 1
  };
  Kind kind = Kind::kInterior;
  double ratio = 0.0;  ///< unclamped p*
  bool interior() const { return kind == Kind::kInterior; }
};

/// Stationary point of a U-shaped curve; empty for monotone directions
/// (overfit coefficient <= 0).
std::optional<CriticalPoint> critical_point(const DplParams& params, const DirectionSpec& direction);

/// w_i = s_i^(1/T) / sum_j s_j^(1/T).
std::vector<double> temperature_weights(std::span<const double> data_shares, double temperature);

/// Same as temperature_weights after normalizing raw sizes to shares.
std::vector<double> temperature_weights_from_sizes(std::span<const double> data_sizes,
                                                   double temperature);

struct CurvePoint {
  double ratio = 0.0;
  double loss = 0.0;
  bool extrapolated = false;
};

struct Curve {
  std::vector<CurvePoint> points;
  bool bias_defaulted = false;
};

Curve predict_curve(const DplParams& params, const DirectionSpec& direction,
                    std::span<const double> grid, const EvalOptions& options = {});

/// Evenly spaced grid lo, lo+step, ..., hi (inclusive within rounding).
std::vector<double> ratio_grid(double lo, double hi, double step);

}  // namespace dplopt
