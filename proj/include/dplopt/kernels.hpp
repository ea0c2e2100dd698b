#pragma once

// Data-parallel inner loops with a scalar reference implementation and an
// AVX2/FMA variant chosen at runtime. The environment variable DPLOPT_SIMD
// (auto | scalar | avx2) overrides the choice.
//
// min_sum is bit-identical across variants; dot and axpy may differ in the
// last bits (different summation order / fused multiply-add).

#include <cstddef>
#include <span>
#include <string_view>

namespace dplopt::kernels {

struct MinLocation {
  double value;
  std::size_t index;  ///< lowest index attaining value; 0 when n == 0
};

struct KernelTable {
  const char* name;
  /// sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  /// y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  /// min over j of (base + a[j]) + b[j]; +inf entries allowed, NaN not.
  MinLocation (*min_sum)(double base, const double* a, const double* b, std::size_t n);
};

const KernelTable& scalar_kernels();

/// nullptr when the AVX2 unit was not compiled in.
const KernelTable* avx2_kernels();

bool cpu_supports_avx2();

/// Table selected on first use (honours DPLOPT_SIMD).
const KernelTable& active();

/// Selection rule behind active(), exposed for tests.
const KernelTable& select(std::string_view request);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

inline MinLocation min_sum(double base, std::span<const double> a, std::span<const double> b) {
  return active().min_sum(base, a.data(), b.data(), a.size());
}

}  // namespace dplopt::kernels
