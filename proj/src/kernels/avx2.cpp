// Compiled with -mavx2 -mfma; only reached after a CPUID check.

#include <immintrin.h>

#include <limits>

#include "dplopt/kernels.hpp"

namespace dplopt::kernels {
namespace {

double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  if (i + 4 <= n) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    i += 4;
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

MinLocation min_sum_avx2(double base, const double* a, const double* b, std::size_t n) {
  const double inf = std::numeric_limits<double>::infinity();
  MinLocation best{inf, 0};
  std::size_t j = 0;
  if (n >= 4) {
    // Each lane keeps its own first minimum; the lane reduction below then
    // recovers the globally lowest index.
    const __m256d vbase = _mm256_set1_pd(base);
    const __m256d four = _mm256_set1_pd(4.0);
    __m256d vmin = _mm256_set1_pd(inf);
    __m256d vidx = _mm256_setzero_pd();
    __m256d cur = _mm256_setr_pd(0.0, 1.0, 2.0, 3.0);
    for (; j + 4 <= n; j += 4) {
      const __m256d v = _mm256_add_pd(_mm256_add_pd(vbase, _mm256_loadu_pd(a + j)),
                                      _mm256_loadu_pd(b + j));
      const __m256d lt = _mm256_cmp_pd(v, vmin, _CMP_LT_OQ);
      vmin = _mm256_blendv_pd(vmin, v, lt);
      vidx = _mm256_blendv_pd(vidx, cur, lt);
      cur = _mm256_add_pd(cur, four);
    }
    alignas(32) double mins[4];
    alignas(32) double idx[4];
    _mm256_store_pd(mins, vmin);
    _mm256_store_pd(idx, vidx);
    for (int lane = 0; lane < 4; ++lane) {
      const auto li = static_cast<std::size_t>(idx[lane]);
      if (mins[lane] < best.value || (mins[lane] == best.value && li < best.index && mins[lane] != inf)) {
        best = {mins[lane], li};
      }
    }
  }
  for (; j < n; ++j) {
    const double v = (base + a[j]) + b[j];
    if (v < best.value) best = {v, j};
  }
  return best;
}

}  // namespace

const KernelTable* avx2_kernels() {
  static const KernelTable table{"avx2", dot_avx2, axpy_avx2, min_sum_avx2};
  return &table;
}

}  // namespace dplopt::kernels
