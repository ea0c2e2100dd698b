#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "dplopt/error.hpp"
#include "dplopt/ratio_optimizer.hpp"
#include "dplopt/rng.hpp"
#include "oracles.hpp"

using namespace dplopt;

namespace {

const std::vector<DirectionSpec> kDeHi{{"de", 4.6}, {"hi", 0.26}};

double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

/// Plain double loop over the n=2 grid, independent of grid_oracle.
double brute_two(const DplParams& p, const std::vector<DirectionSpec>& d, const std::vector<double>& r,
                 double step, double floor, double& best_p0) {
  double best = INFINITY;
  const int n = static_cast<int>(std::lround(1.0 / step));
  for (int j = 0; j <= n; ++j) {
    const double a = j * step, b = 1.0 - a;
    if (a < floor - 1e-12 || b < floor - 1e-12) continue;
    const double v = r[0] * eval_dpl(p, a, d[0]) + r[1] * eval_dpl(p, b, d[1]);
    if (v < best) best = v, best_p0 = a;
  }
  return best;
}

}  // namespace

TEST_SUITE("ratio_optimizer") {

TEST_CASE("objective") {
  const DplParams p;
  const std::vector<double> pp{0.72, 0.28};
  const MetricWeights half = MetricWeights::uniform(2);
  const oracle::Law law;
  const double oracle_value =
      static_cast<double>(0.5L * oracle::dpl(law, 0.72L, 4.6L) + 0.5L * oracle::dpl(law, 0.28L, 0.26L));
  CHECK(objective(p, pp, half, kDeHi) == doctest::Approx(oracle_value).epsilon(1e-14));

  const MetricWeights onehot{{0.0, 1.0}};
  CHECK(objective(p, pp, onehot, kDeHi) == eval_dpl(p, 0.28, kDeHi[1]));

  const std::vector<DirectionSpec> same{{"a", 10}, {"b", 10}};
  const std::vector<double> mid{0.5, 0.5};
  CHECK(objective(p, mid, half, same) == doctest::Approx(eval_dpl(p, 0.5, same[0])));

  const std::vector<double> three{0.3, 0.3, 0.4};
  CHECK_THROWS_AS(objective(p, three, half, kDeHi), DimensionError);
}

TEST_CASE("weights validation") {
  const MetricWeights short_sum{{0.5, 0.4}}, negative{{1.2, -0.2}}, one{{1.0}}, ok{{0.25, 0.75}};
  CHECK_THROWS_AS(short_sum.validate(2), DomainError);
  CHECK_THROWS_AS(negative.validate(2), DomainError);
  CHECK_THROWS_AS(one.validate(2), DimensionError);
  CHECK_NOTHROW(ok.validate(2));
}

TEST_CASE("De/Hi uniform weights") {
  const DplParams p;
  const auto sol = optimize_ratios(p, kDeHi, MetricWeights::uniform(2));
  CHECK(sol.method == "kkt-bisection");
  CHECK(std::abs(sol.p[0] - 0.72) < 0.02);
  CHECK(std::abs(sol.p[1] - 0.28) < 0.02);
  CHECK(std::abs(sum(sol.p) - 1.0) <= 1e-10);
  // Stationarity, independent of the solver: bisection on the 1-D derivative.
  const oracle::Law law;
  auto g = [&](double a) {
    const long double h = 1e-7L;
    auto f = [&](long double x) { return 0.5L * oracle::dpl(law, x, 4.6L) + 0.5L * oracle::dpl(law, 1 - x, 0.26L); };
    return static_cast<double>((f(a + h) - f(a - h)) / (2 * h));
  };
  CHECK(std::abs(sol.p[0] - oracle::bisect(g, 0.05, 0.95)) < 1e-6);
  double brute_p0 = 0.0;
  const double brute = brute_two(p, kDeHi, {0.5, 0.5}, 1e-4, 0.01, brute_p0);
  CHECK(sol.objective <= brute + 1e-9);
  CHECK(std::abs(sol.p[0] - brute_p0) < 1e-3);
}

TEST_CASE("identical high-resource directions split evenly") {
  const std::vector<DirectionSpec> same{{"a", 10}, {"b", 10}};
  const auto sol = optimize_ratios(DplParams{}, same, MetricWeights::uniform(2));
  CHECK(sol.p[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(sol.p[1] == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("one-hot weight on a low-resource direction gives its critical point") {
  const DplParams p;
  const auto sol = optimize_ratios(p, kDeHi, MetricWeights{{0.0, 1.0}});
  const double pstar = critical_point(p, kDeHi[1])->ratio;
  CHECK(std::abs(sol.p[1] - pstar) < 1e-6);
  CHECK(std::abs(sol.p[1] - 0.339) < 0.005);
  CHECK(sol.p[0] == doctest::Approx(1.0 - sol.p[1]).epsilon(1e-12));
  double at = 0.0;
  brute_two(p, {kDeHi[1], kDeHi[0]}, {1.0, 0.0}, 1e-4, 0.01, at);
  CHECK(std::abs(at - sol.p[1]) < 1e-3);

  // Same problem with the data-share spread gives the same weighted ratio.
  OptimizerOptions o;
  o.spread = ZeroWeightSpread::kDataShare;
  CHECK(std::abs(optimize_ratios(p, kDeHi, MetricWeights{{0.0, 1.0}}, o).p[1] - pstar) < 1e-6);
}

TEST_CASE("one-hot weight on a monotone direction pushes to the boundary") {
  const std::vector<DirectionSpec> same{{"a", 10}, {"b", 10}};
  const auto sol = optimize_ratios(DplParams{}, same, MetricWeights{{1.0, 0.0}});
  CHECK(sol.p[0] == doctest::Approx(0.99).epsilon(1e-9));
  CHECK(sol.p[1] == doctest::Approx(0.01).epsilon(1e-9));
}

TEST_CASE("floor feasibility") {
  OptimizerOptions o;
  o.floor = 0.5;
  CHECK_THROWS_AS(optimize_ratios(DplParams{}, kDeHi, MetricWeights::uniform(2), o), InfeasibleError);
  o.floor = 0.0;
  CHECK_THROWS_AS(optimize_ratios(DplParams{}, kDeHi, MetricWeights::uniform(2), o), InfeasibleError);
  const std::vector<DirectionSpec> one{{"a", 1}};
  CHECK_THROWS_AS(optimize_ratios(DplParams{}, one, MetricWeights{{1.0}}), DimensionError);
}

TEST_CASE("projected gradient agrees with the KKT path") {
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> logd(std::log(0.1), std::log(10.0));
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 2 + trial % 3;
    std::vector<DirectionSpec> dirs;
    for (std::size_t i = 0; i < n; ++i) dirs.push_back({"d" + std::to_string(i), std::exp(logd(gen))});
    Rng rng(trial);
    const MetricWeights w{rng.dirichlet_ones(n)};
    OptimizerOptions kkt, pgd;
    kkt.method = SolverMethod::kKktBisection;
    pgd.method = SolverMethod::kProjectedGradient;
    const auto a = optimize_ratios(DplParams{}, dirs, w, kkt);
    const auto b = optimize_ratios(DplParams{}, dirs, w, pgd);
    CHECK(std::abs(a.objective - b.objective) < 1e-7);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(a.p[i] - b.p[i]) < 1e-3);
  }
}

TEST_CASE("solutions are feasible and deterministic") {
  const std::vector<DirectionSpec> dirs{{"a", 0.1}, {"b", 2.0}, {"c", 9.0}};
  const MetricWeights w{{0.2, 0.5, 0.3}};
  for (auto m : {SolverMethod::kAuto, SolverMethod::kProjectedGradient}) {
    OptimizerOptions o;
    o.method = m;
    o.seed = 42;
    const auto a = optimize_ratios(DplParams{}, dirs, w, o);
    const auto b = optimize_ratios(DplParams{}, dirs, w, o);
    CHECK(a.p == b.p);
    CHECK(std::abs(sum(a.p) - 1.0) <= 1e-10);
    for (double x : a.p) CHECK(x >= 0.01);
  }
}

TEST_CASE("weight monotonicity") {
  const std::vector<DirectionSpec> dirs{{"a", 0.3}, {"b", 3.0}, {"c", 8.0}};
  double prev = 0.0;
  for (double r0 = 0.1; r0 <= 0.9; r0 += 0.1) {
    const MetricWeights w{{r0, (1 - r0) * 0.5, (1 - r0) * 0.5}};
    const auto sol = optimize_ratios(DplParams{}, dirs, w);
    CHECK(sol.p[0] >= prev - 1e-9);
    prev = sol.p[0];
  }
}

TEST_CASE("bias shifts the objective, not the argmin") {
  DplParams p;
  const auto a = optimize_ratios(p, kDeHi, MetricWeights{{0.3, 0.7}});
  p.biases["de"] = 2.0;
  p.biases["hi"] = -0.4;
  const auto b = optimize_ratios(p, kDeHi, MetricWeights{{0.3, 0.7}});
  CHECK(std::abs(a.p[0] - b.p[0]) < 1e-12);
  CHECK(b.objective - a.objective == doctest::Approx(0.3 * 2.0 + 0.7 * -0.4).epsilon(1e-12));
}

TEST_CASE("grid oracle enumerates the feasible grid") {
  GridOptions g;
  g.resolution = 0.5;
  g.floor = 0.01;
  const auto sol = grid_oracle(DplParams{}, kDeHi, MetricWeights::uniform(2), g);
  // Feasible points: (0.5, 0.5) only, since 0 and 1 violate the floor.
  CHECK(sol.evaluations == 1);
  CHECK(sol.p == std::vector<double>{0.5, 0.5});

  g.resolution = 0.1;
  const auto s2 = grid_oracle(DplParams{}, kDeHi, MetricWeights::uniform(2), g);
  CHECK(s2.evaluations == 9);
  double at = 0.0;
  const double brute = brute_two(DplParams{}, kDeHi, {0.5, 0.5}, 0.1, 0.01, at);
  CHECK(s2.objective == doctest::Approx(brute).epsilon(1e-14));
  CHECK(s2.p[0] == doctest::Approx(at));
}

TEST_CASE("grid oracle budget and shape errors") {
  GridOptions g;
  const std::vector<DirectionSpec> five{{"a", 1}, {"b", 1}, {"c", 1}, {"d", 1}, {"e", 1}};
  CHECK_THROWS_AS(grid_oracle(DplParams{}, five, MetricWeights::uniform(5), g), BudgetError);
  g.resolution = 1e-4;
  const std::vector<DirectionSpec> four{{"a", 1}, {"b", 1}, {"c", 1}, {"d", 1}};
  CHECK_THROWS_AS(grid_oracle(DplParams{}, four, MetricWeights::uniform(4), g), BudgetError);
  g.resolution = 0.3;
  CHECK_THROWS_AS(grid_oracle(DplParams{}, kDeHi, MetricWeights::uniform(2), g), DomainError);
}

TEST_CASE("grid oracle is the same with either kernel table") {
  const std::vector<DirectionSpec> dirs{{"a", 0.2}, {"b", 1.5}, {"c", 6.0}};
  const MetricWeights w{{0.5, 0.3, 0.2}};
  GridOptions g;
  g.resolution = 2e-3;
  g.kernels = &kernels::scalar_kernels();
  const auto a = grid_oracle(DplParams{}, dirs, w, g);
  if (kernels::avx2_kernels() && kernels::cpu_supports_avx2()) {
    g.kernels = kernels::avx2_kernels();
    const auto b = grid_oracle(DplParams{}, dirs, w, g);
    CHECK(a.p == b.p);
    CHECK(a.objective == b.objective);
  }
  const auto sol = optimize_ratios(DplParams{}, dirs, w);
  CHECK(sol.objective <= a.objective + 1e-12);
}

TEST_CASE("floored simplex projection") {
  const std::vector<double> x{0.9, 0.5, -0.3};
  const auto p = project_floored_simplex(x, 0.05, 1.0);
  CHECK(std::abs(sum(p) - 1.0) < 1e-14);
  for (double v : p) CHECK(v >= 0.05);
  const std::vector<double> inside{0.2, 0.3, 0.5};
  CHECK(project_floored_simplex(inside, 0.01, 1.0) == inside);
  CHECK_THROWS_AS(project_floored_simplex(inside, 0.5, 1.0), InfeasibleError);
}

TEST_CASE("convexity check") {
  CHECK(weighted_term_convex(DplParams{}, {"x", 10.0}, 0.5, 0.01, 0.98));
  CHECK(weighted_term_convex(DplParams{}, {"x", 0.1}, 0.5, 0.01, 0.98));
  DplParams odd;
  odd.b = -2.0;  // strongly negative over-fit scale with beta > 1: concave tail
  odd.beta = 3.0;
  CHECK_FALSE(weighted_term_convex(odd, {"x", 10.0}, 0.5, 0.01, 0.98));
}

TEST_CASE("temperature candidates are feasible points the optimizer beats") {
  const std::vector<double> temps{1, 2, 5, 10, 100};
  const auto cands = temperature_candidates(DplParams{}, kDeHi, MetricWeights::uniform(2), temps);
  const auto sol = optimize_ratios(DplParams{}, kDeHi, MetricWeights::uniform(2));
  REQUIRE(cands.size() == 5);
  for (const auto& c : cands) {
    CHECK(std::abs(sum(c.p) - 1.0) < 1e-12);
    CHECK(sol.objective <= c.objective + 1e-12);
  }
}

}  // TEST_SUITE
