#pragma once

// Hutchinson estimate of the Hessian trace: the mean of v^T H v over
// Rademacher probes v, with H v taken as a central difference of the
// gradient, (g(x + h v) - g(x - h v)) / 2h.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>

namespace dplopt {

using GradientFunction = std::function<void(std::span<const double> x, std::span<double> grad)>;

struct SharpnessOptions {
  int probes = 1000;
  /// Finite-difference step; default 1e-4 * (1 + ||x||_inf).
  std::optional<double> step;
  std::uint64_t seed = 0;
};

struct SharpnessEstimate {
  double trace = 0.0;
  double standard_error = 0.0;
  int probes = 0;
  double step = 0.0;
};

SharpnessEstimate sharpness(const GradientFunction& gradient, std::span<const double> point,
                            const SharpnessOptions& options = {});

}  // namespace dplopt
