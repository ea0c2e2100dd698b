#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <vector>

#include "dplopt/kernels.hpp"

using namespace dplopt;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(gen);
  return v;
}

/// Scalar and, when the CPU has it, AVX2.
std::vector<const kernels::KernelTable*> tables() {
  std::vector<const kernels::KernelTable*> t{&kernels::scalar_kernels()};
  if (kernels::avx2_kernels() && kernels::cpu_supports_avx2()) t.push_back(kernels::avx2_kernels());
  return t;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("selection rule") {
  CHECK(std::strcmp(kernels::select("scalar").name, "scalar") == 0);
  const auto& autosel = kernels::select("auto");
  if (kernels::avx2_kernels() && kernels::cpu_supports_avx2()) {
    CHECK(std::strcmp(autosel.name, "avx2") == 0);
    CHECK(std::strcmp(kernels::select("avx2").name, "avx2") == 0);
  } else {
    CHECK(std::strcmp(autosel.name, "scalar") == 0);
  }
  CHECK_THROWS(kernels::select("neon"));
}

TEST_CASE("min_sum is bit-identical across variants") {
  std::mt19937_64 gen(1);
  const auto& ref = kernels::scalar_kernels();
  for (const auto* k : tables()) {
    for (std::size_t n : {0u, 1u, 2u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 31u, 100u, 1001u}) {
      auto a = random_vec(n, gen), b = random_vec(n, gen);
      const double base = 0.37;
      const auto r = ref.min_sum(base, a.data(), b.data(), n);
      const auto s = k->min_sum(base, a.data(), b.data(), n);
      if (n == 0) {
        CHECK(std::isinf(s.value));
        CHECK(s.index == 0);
        continue;
      }
      CHECK(std::memcmp(&r.value, &s.value, sizeof(double)) == 0);
      CHECK(r.index == s.index);
      // Independent check.
      double best = std::numeric_limits<double>::infinity();
      std::size_t at = 0;
      for (std::size_t j = 0; j < n; ++j) {
        const double v = (base + a[j]) + b[j];
        if (v < best) best = v, at = j;
      }
      CHECK(s.value == best);
      CHECK(s.index == at);
    }
  }
}

TEST_CASE("min_sum ties go to the lowest index, infinities allowed") {
  const double inf = std::numeric_limits<double>::infinity();
  for (const auto* k : tables()) {
    std::vector<double> a(19, 1.0), b(19, 1.0);
    a[3] = inf;
    for (std::size_t j : {6u, 11u, 17u}) b[j] = 0.0;
    const auto r = k->min_sum(0.0, a.data(), b.data(), a.size());
    CHECK(r.value == 1.0);
    CHECK(r.index == 6);
    std::vector<double> all(10, inf);
    const auto s = k->min_sum(0.0, all.data(), all.data(), all.size());
    CHECK(std::isinf(s.value));
    CHECK(s.index == 0);
  }
}

TEST_CASE("dot and axpy agree within rounding") {
  std::mt19937_64 gen(2);
  const auto& ref = kernels::scalar_kernels();
  for (const auto* k : tables()) {
    for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 8u, 13u, 32u, 33u, 257u}) {
      const auto a = random_vec(n, gen), b = random_vec(n, gen);
      double mag = 0.0;
      for (std::size_t i = 0; i < n; ++i) mag += std::abs(a[i] * b[i]);
      CHECK(std::abs(k->dot(a.data(), b.data(), n) - ref.dot(a.data(), b.data(), n)) <= 4e-16 * (mag + 1.0) * n);
      auto y1 = b, y2 = b;
      ref.axpy(0.3, a.data(), y1.data(), n);
      k->axpy(0.3, a.data(), y2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y1[i] - y2[i]) <= 1e-15);
    }
  }
}

TEST_CASE("span wrappers") {
  const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  CHECK(kernels::dot(a, b) == 32.0);
  std::vector<double> y{1, 1, 1};
  kernels::axpy(2.0, a, y);
  CHECK(y == std::vector<double>{3, 5, 7});
  const auto m = kernels::min_sum(1.0, a, b);
  CHECK(m.value == 6.0);
  CHECK(m.index == 0);
}

}  // TEST_SUITE
