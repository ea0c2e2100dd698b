#pragma once

// Independent reference computations for the tests. None of these call
// into the library's numerical code.

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace oracle {

struct Law {
  long double k = 0.07L, alpha = 0.20L, q = 1.18L, beta = 1.21L, gamma = -0.33L, b = -0.50L;
};

/// Term-by-term extended-precision evaluation.
inline long double dpl(const Law& L, long double p, long double d, long double m = 0.0L) {
  const long double capacity = std::pow(L.k * p, -L.alpha);
  const long double scale = std::pow(d, L.gamma) + L.b;
  const long double overfit = scale * std::pow(L.q * p, L.beta);
  return capacity + overfit + m;
}

/// Root of f on [lo, hi] by bisection; f(lo) and f(hi) must differ in sign.
inline double bisect(const std::function<double(double)>& f, double lo, double hi, int iterations = 200) {
  double flo = f(lo);
  for (int i = 0; i < iterations; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Stationary point of the law via bisection on a central finite difference.
inline double critical_point_fd(const Law& L, double d, double lo = 1e-3, double hi = 0.999) {
  auto deriv = [&](double p) {
    const long double h = 1e-6L * p;
    return static_cast<double>((dpl(L, p + h, d) - dpl(L, p - h, d)) / (2 * h));
  };
  return bisect(deriv, lo, hi);
}

inline bool dominates(const std::vector<double>& a, const std::vector<double>& b) {
  bool strict = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) return false;
    if (a[i] < b[i]) strict = true;
  }
  return strict;
}

/// O(n^2) non-dominated set, ascending indices.
inline std::vector<std::size_t> pareto_brute(const std::vector<std::vector<double>>& pts) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < pts.size() && !dominated; ++j) dominated = j != i && dominates(pts[j], pts[i]);
    if (!dominated) out.push_back(i);
  }
  return out;
}

}  // namespace oracle
