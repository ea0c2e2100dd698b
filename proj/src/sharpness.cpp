#include "dplopt/sharpness.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "dplopt/error.hpp"
#include "dplopt/numeric.hpp"
#include "dplopt/rng.hpp"

namespace dplopt {

SharpnessEstimate sharpness(const GradientFunction& gradient, std::span<const double> point,
                            const SharpnessOptions& options) {
  if (options.probes < 1) throw DomainError("sharpness needs at least one probe");
  double xmax = 0.0;
  for (double v : point) xmax = std::max(xmax, std::abs(v));
  const double h = options.step.value_or(1e-4 * (1.0 + xmax));
  if (!(h > 0.0)) throw DomainError("finite-difference step must be > 0");

  const std::size_t n = point.size();
  std::vector<double> v(n), plus(n), minus(n), gp(n), gm(n);
  Rng rng(derive_seed(options.seed, 0x4a7c));
  CompensatedSum sum, sum_sq;
  for (int s = 0; s < options.probes; ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = rng.rademacher();
      plus[i] = point[i] + h * v[i];
      minus[i] = point[i] - h * v[i];
    }
    gradient(plus, gp);
    gradient(minus, gm);
    if (!all_finite(gp) || !all_finite(gm)) throw DomainError("gradient is not finite near the point");
    CompensatedSum quad;
    for (std::size_t i = 0; i < n; ++i) quad.add(v[i] * (gp[i] - gm[i]));
    const double sample = quad.value() / (2.0 * h);
    sum.add(sample);
    sum_sq.add(sample * sample);
  }
  SharpnessEstimate est;
  est.probes = options.probes;
  est.step = h;
  est.trace = sum.value() / options.probes;
  if (options.probes > 1) {
    const double var = std::max(0.0, (sum_sq.value() - options.probes * est.trace * est.trace) /
                                         (options.probes - 1));
    est.standard_error = std::sqrt(var / options.probes);
  }
  return est;
}

}  // namespace dplopt
