#include <cstdlib>
#include <string>

#include "dplopt/error.hpp"
#include "dplopt/kernels.hpp"

namespace dplopt::kernels {

#ifndef DPLOPT_HAVE_AVX2
const KernelTable* avx2_kernels() { return nullptr; }
#endif

bool cpu_supports_avx2() {
#if defined(DPLOPT_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& select(std::string_view request) {
  if (request == "scalar") return scalar_kernels();
  if (request == "avx2") {
    if (avx2_kernels() == nullptr || !cpu_supports_avx2()) {
      throw Error("DPLOPT_SIMD=avx2 requested but AVX2/FMA is unavailable");
    }
    return *avx2_kernels();
  }
  if (!request.empty() && request != "auto") {
    throw Error("DPLOPT_SIMD must be auto, scalar or avx2, got '" + std::string(request) + "'");
  }
  if (avx2_kernels() != nullptr && cpu_supports_avx2()) return *avx2_kernels();
  return scalar_kernels();
}

const KernelTable& active() {
  static const KernelTable& table = [] () -> const KernelTable& {
    const char* env = std::getenv("DPLOPT_SIMD");
    return select(env ? std::string_view(env) : std::string_view());
  }();
  return table;
}

}  // namespace dplopt::kernels
