#pragma once

// Pareto analysis on per-direction losses (lower is better). Callers with
// higher-is-better metrics such as BLEU must negate them first.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace dplopt {

struct LossVector {
  std::vector<double> losses;
  std::string tag;
};

/// a dominates b: no worse everywhere and strictly better somewhere.
bool dominates(std::span<const double> a, std::span<const double> b);
bool dominates(const LossVector& a, const LossVector& b);

enum class DuplicatePolicy {
  kKeepAll,   ///< identical non-dominated vectors are all returned
  kKeepOnce,  ///< only the first occurrence is returned
};

/// Ascending indices of the non-dominated points.
std::vector<std::size_t> pareto_front(std::span<const LossVector> points,
                                      DuplicatePolicy duplicates = DuplicatePolicy::kKeepAll);

enum class Monotonicity { kMonotoneImproving, kUShaped, kMonotoneDegrading, kIrregular };

std::string to_string(Monotonicity m);
Monotonicity monotonicity_from_string(const std::string& s);

struct SweepPoint {
  std::vector<double> ratios;
  LossVector loss;
};

struct DirectionTrend {
  Monotonicity shape = Monotonicity::kIrregular;
  double argmin_ratio = 0.0;  ///< own ratio at the lowest loss
  double min_loss = 0.0;
};

struct CollapseReport {
  std::vector<std::size_t> dominated_indices;  ///< ascending
  std::vector<DirectionTrend> directions;
  bool collapsed = false;
  /// Delaunay triangles over the ratio simplex when there are 3 directions.
  std::vector<std::array<std::size_t, 3>> triangles;
};

struct CollapseOptions {
  double tolerance = 1e-3;  ///< nats
};

/// Classifies a loss sequence ordered by increasing own ratio.
Monotonicity classify_trend(std::span<const double> losses, double tolerance);

CollapseReport detect_collapse(std::span<const SweepPoint> sweep, const CollapseOptions& options = {});

/// Delaunay triangulation (Bowyer-Watson) of 2-D points; ascending-sorted
/// triangles in lexicographic order.
std::vector<std::array<std::size_t, 3>> delaunay(std::span<const std::array<double, 2>> points);

}  // namespace dplopt
