#include <limits>

#include "dplopt/kernels.hpp"

namespace dplopt::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

MinLocation min_sum_scalar(double base, const double* a, const double* b, std::size_t n) {
  MinLocation best{std::numeric_limits<double>::infinity(), 0};
  for (std::size_t j = 0; j < n; ++j) {
    const double v = (base + a[j]) + b[j];
    if (v < best.value) best = {v, j};
  }
  return best;
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{"scalar", dot_scalar, axpy_scalar, min_sum_scalar};
  return table;
}

}  // namespace dplopt::kernels
