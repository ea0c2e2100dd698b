#include "dplopt/pareto.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "dplopt/error.hpp"

namespace dplopt {

bool dominates(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("dominance between loss vectors of size " + std::to_string(a.size()) +
                         " and " + std::to_string(b.size()));
  }
  bool strict = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) return false;
    strict = strict || a[i] < b[i];
  }
  return strict;
}

bool dominates(const LossVector& a, const LossVector& b) { return dominates(a.losses, b.losses); }

std::vector<std::size_t> pareto_front(std::span<const LossVector> points, DuplicatePolicy duplicates) {
  if (points.empty()) throw Error("pareto front of an empty point set");
  const std::size_t dim = points.front().losses.size();
  for (const auto& p : points) {
    if (p.losses.size() != dim) throw DimensionError("loss vectors differ in dimension");
  }
  // A dominator precedes what it dominates in (sum, lexicographic) order, so
  // each candidate only needs checking against the front accepted so far.
  std::vector<double> sums(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    sums[i] = std::accumulate(points[i].losses.begin(), points[i].losses.end(), 0.0);
  }
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (sums[a] != sums[b]) return sums[a] < sums[b];
    if (points[a].losses != points[b].losses) return points[a].losses < points[b].losses;
    return a < b;
  });
  std::vector<std::size_t> front;
  for (std::size_t idx : order) {
    bool keep = true;
    for (std::size_t f : front) {
      if (dominates(points[f].losses, points[idx].losses) ||
          (duplicates == DuplicatePolicy::kKeepOnce && points[f].losses == points[idx].losses)) {
        keep = false;
        break;
      }
    }
    if (keep) front.push_back(idx);
  }
  std::sort(front.begin(), front.end());
  return front;
}

std::string to_string(Monotonicity m) {
  switch (m) {
    case Monotonicity::kMonotoneImproving: return "monotone-improving";
    case Monotonicity::kUShaped: return "U-shaped";
    case Monotonicity::kMonotoneDegrading: return "monotone-degrading";
    case Monotonicity::kIrregular: return "irregular";
  }
  return "irregular";
}

Monotonicity monotonicity_from_string(const std::string& s) {
  for (auto m : {Monotonicity::kMonotoneImproving, Monotonicity::kUShaped,
                 Monotonicity::kMonotoneDegrading, Monotonicity::kIrregular}) {
    if (to_string(m) == s) return m;
  }
  throw ParseError("unknown monotonicity class '" + s + "'");
}

Monotonicity classify_trend(std::span<const double> losses, double tolerance) {
  const std::size_t n = losses.size();
  if (n < 2) return Monotonicity::kIrregular;
  const double first = losses.front(), last = losses.back();
  if (n >= 3) {
    const auto interior = std::min_element(losses.begin() + 1, losses.end() - 1);
    if (*interior < std::min(first, last) - tolerance) return Monotonicity::kUShaped;
  }
  bool non_increasing = true, non_decreasing = true;
  for (std::size_t i = 1; i < n; ++i) {
    non_increasing = non_increasing && losses[i] <= losses[i - 1] + tolerance;
    non_decreasing = non_decreasing && losses[i] >= losses[i - 1] - tolerance;
  }
  if (non_increasing && last < first - tolerance) return Monotonicity::kMonotoneImproving;
  if (non_decreasing && last > first + tolerance) return Monotonicity::kMonotoneDegrading;
  return Monotonicity::kIrregular;
}

CollapseReport detect_collapse(std::span<const SweepPoint> sweep, const CollapseOptions& options) {
  if (sweep.size() < 3) {
    throw InsufficientDataError("collapse detection needs at least 3 sweep points, got " +
                                std::to_string(sweep.size()));
  }
  const std::size_t dim = sweep.front().loss.losses.size();
  if (dim < 2) throw DimensionError("sweep loss vectors need at least 2 directions");
  for (const auto& pt : sweep) {
    if (pt.loss.losses.size() != dim || pt.ratios.size() != dim) {
      throw DimensionError("sweep points must all have " + std::to_string(dim) +
                           " ratios and losses");
    }
    for (double l : pt.loss.losses) {
      if (!std::isfinite(l)) throw DomainError("sweep losses must be finite");
    }
    double total = 0.0;
    for (double r : pt.ratios) {
      if (!(r >= 0.0 && r <= 1.0)) throw DomainError("sweep ratios must lie in [0, 1]");
      total += r;
    }
    if (std::abs(total - 1.0) > 1e-6) throw DomainError("sweep ratio vectors must sum to 1");
  }

  CollapseReport report;
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    for (std::size_t j = 0; j < sweep.size(); ++j) {
      if (i != j && dominates(sweep[j].loss.losses, sweep[i].loss.losses)) {
        report.dominated_indices.push_back(i);
        break;
      }
    }
  }
  report.collapsed = !report.dominated_indices.empty();

  // Along each direction's own ratio; repeated ratios are averaged.
  for (std::size_t d = 0; d < dim; ++d) {
    std::map<double, std::pair<double, int>> by_ratio;
    for (const auto& pt : sweep) {
      auto& acc = by_ratio[pt.ratios[d]];
      acc.first += pt.loss.losses[d];
      acc.second += 1;
    }
    std::vector<double> seq;
    DirectionTrend trend;
    trend.min_loss = std::numeric_limits<double>::infinity();
    for (const auto& [ratio, acc] : by_ratio) {
      const double mean = acc.first / acc.second;
      seq.push_back(mean);
      if (mean < trend.min_loss) {
        trend.min_loss = mean;
        trend.argmin_ratio = ratio;
      }
    }
    trend.shape = classify_trend(seq, options.tolerance);
    report.directions.push_back(trend);
  }

  if (dim == 3) {
    std::vector<std::array<double, 2>> xy;
    for (const auto& pt : sweep) xy.push_back({pt.ratios[0], pt.ratios[1]});
    report.triangles = delaunay(xy);
  }
  return report;
}

std::vector<std::array<std::size_t, 3>> delaunay(std::span<const std::array<double, 2>> points) {
  using Tri = std::array<std::size_t, 3>;
  const std::size_t n = points.size();
  if (n < 3) return {};
  double minx = points[0][0], maxx = minx, miny = points[0][1], maxy = miny;
  for (const auto& p : points) {
    minx = std::min(minx, p[0]);
    maxx = std::max(maxx, p[0]);
    miny = std::min(miny, p[1]);
    maxy = std::max(maxy, p[1]);
  }
  const double span = std::max({maxx - minx, maxy - miny, 1e-12});
  const double cx = 0.5 * (minx + maxx), cy = 0.5 * (miny + maxy);
  std::vector<std::array<double, 2>> pts(points.begin(), points.end());
  pts.push_back({cx - 20.0 * span, cy - span});
  pts.push_back({cx, cy + 20.0 * span});
  pts.push_back({cx + 20.0 * span, cy - span});

  auto in_circumcircle = [&](const Tri& t, const std::array<double, 2>& p) {
    const auto& a = pts[t[0]];
    const auto& b = pts[t[1]];
    const auto& c = pts[t[2]];
    const double ax = a[0] - p[0], ay = a[1] - p[1];
    const double bx = b[0] - p[0], by = b[1] - p[1];
    const double cxx = c[0] - p[0], cyy = c[1] - p[1];
    const double det = (ax * ax + ay * ay) * (bx * cyy - cxx * by) -
                       (bx * bx + by * by) * (ax * cyy - cxx * ay) +
                       (cxx * cxx + cyy * cyy) * (ax * by - bx * ay);
    const double orient = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    return orient > 0 ? det > 1e-18 : det < -1e-18;
  };

  std::vector<Tri> tris = {{n, n + 1, n + 2}};
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Tri> bad, keep;
    for (const auto& t : tris) (in_circumcircle(t, pts[i]) ? bad : keep).push_back(t);
    std::map<std::pair<std::size_t, std::size_t>, int> edges;
    for (const auto& t : bad) {
      for (int e = 0; e < 3; ++e) {
        auto u = t[e], v = t[(e + 1) % 3];
        edges[{std::min(u, v), std::max(u, v)}]++;
      }
    }
    for (const auto& [edge, count] : edges) {
      if (count == 1) keep.push_back({edge.first, edge.second, i});
    }
    tris = std::move(keep);
  }
  std::vector<Tri> out;
  for (auto t : tris) {
    if (t[0] >= n || t[1] >= n || t[2] >= n) continue;
    const auto& a = pts[t[0]];
    const auto& b = pts[t[1]];
    const auto& c = pts[t[2]];
    const double area = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    if (std::abs(area) <= 1e-14 * span * span) continue;
    std::sort(t.begin(), t.end());
    out.push_back(t);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace dplopt
