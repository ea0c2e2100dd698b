#pragma once

// Desk-scale multi-task trainer. A shared tanh trunk (input -> width ->
// width) feeds one linear head per task. Each task regresses a fixed random
// teacher network plus Gaussian noise; tasks differ in training-set size.
// Every minibatch draws each example's task from the sampling ratios, so a
// ratio vector plays the role of scalarization weights.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dplopt/observations.hpp"
#include "dplopt/pareto.hpp"

namespace dplopt {

struct SimTask {
  std::string name;
  std::size_t train_size = 0;
};

struct LrSchedule {
  enum class Kind { kConstant, kInverseSqrt, kLinearDecay };
  Kind kind = Kind::kConstant;
  double base = 0.05;
  int warmup_steps = 0;

  double at(int step, int total_steps) const;
};

enum class ParamSubset { kAll, kTrunk, kHeads };

struct SimConfig {
  std::vector<SimTask> tasks;
  int input_dim = 4;
  int width = 32;
  int teacher_width = 16;
  double noise = 0.1;
  int steps = 12000;
  int batch_size = 32;
  double momentum = 0.9;
  LrSchedule lr{LrSchedule::Kind::kLinearDecay, 0.05, 0};
  std::size_t validation_size = 1000;
  /// Sampling-ratio vectors, one per sweep point, each summing to 1.
  std::vector<std::vector<double>> grid;
  std::vector<std::uint64_t> seeds;
  std::uint64_t master_seed = 0;

  bool compute_sharpness = false;
  int sharpness_probes = 50;
  ParamSubset sharpness_subset = ParamSubset::kAll;

  /// Throws DomainError on a violated invariant (>= 2 tasks, sizes >=
  /// batch size, grid ratios in (0, 1) summing to 1, ...).
  void validate() const;

  /// 10000 vs 200 samples, second task swept 0.1..0.9, 10 seeds.
  static SimConfig imbalanced();
  /// 10000 vs 10000 samples, same sweep.
  static SimConfig balanced();
};

/// Grid sweeping task `swept`'s ratio over [lo, hi] in `step`s; the rest of
/// the mass is split evenly over the other tasks.
std::vector<std::vector<double>> own_ratio_grid(std::size_t tasks, std::size_t swept, double lo,
                                                double hi, double step);

struct TrainResult {
  std::vector<double> validation_losses;  ///< per task
  std::vector<double> initial_losses;     ///< per task, before any step
  std::vector<double> sharpness;          ///< per task, when requested
  bool diverged = false;
};

/// Trains once. `seed` fixes teachers, data, validation sets and the
/// initialization; the minibatch stream is derived from `stream_seed`
/// (defaults to a stream derived from `seed`). Ratios may contain zeros.
TrainResult train_once(const SimConfig& config, std::span<const double> ratios, std::uint64_t seed,
                       std::optional<std::uint64_t> stream_seed = std::nullopt);

struct SweepRecord {
  std::size_t point = 0;
  std::size_t seed_index = 0;
  std::uint64_t seed = 0;
  std::vector<double> ratios;
  TrainResult result;
};

struct SweepResult {
  std::vector<std::string> task_names;
  std::vector<double> data_sizes;  ///< millions of examples
  std::vector<std::vector<double>> grid;
  std::vector<SweepRecord> records;  ///< point-major, then seed
  std::vector<std::vector<double>> median_losses;     ///< [point][task]
  std::vector<std::vector<double>> median_sharpness;  ///< [point][task] when computed
  std::size_t diverged_records = 0;
};

SweepResult run_sweep(const SimConfig& config);

/// Several sweeps concatenated (e.g. one high-resource task paired with
/// low-resource partners of different sizes). Point ids keep counting.
struct SimScenario {
  std::vector<SimConfig> experiments;
};

/// Median losses in the observation-CSV layout, one row per (point, task).
std::vector<Observation> sweep_observations(const SweepResult& sweep, long long first_point_id = 0);

std::vector<SweepPoint> sweep_points(const SweepResult& sweep);

/// Paired high/low-resource experiments whose medians can be fitted
/// end-to-end: one 10000-sample task against 200, 1000 and 4600.
SimScenario scaling_scenario();

}  // namespace dplopt
