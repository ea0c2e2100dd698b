#pragma once

// Reproducible random streams. std::mt19937_64 is fully specified by the
// standard; the distributions in <random> are not, so the transforms below
// are implemented here to keep results identical across standard libraries.

#include <cstdint>
#include <random>
#include <vector>

namespace dplopt {

/// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);

/// Seed for stream `index` under `master`.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1].
  double uniform_open_low();
  double normal();
  /// +1 or -1 with equal probability.
  double rademacher();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  /// Index drawn with probability proportional to weights.
  std::size_t categorical(const std::vector<double>& weights);
  std::vector<double> dirichlet_ones(std::size_t n);

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dplopt
