#include <doctest.h>

#include <cmath>
#include <vector>

#include "dplopt/dpl_model.hpp"
#include "dplopt/error.hpp"
#include "dplopt/presets.hpp"
#include "oracles.hpp"

using namespace dplopt;

namespace {
const DirectionSpec kHigh{"de", 10.0};
const DirectionSpec kLow{"hi", 0.26};
}  // namespace

TEST_SUITE("dpl_model") {

TEST_CASE("base preset values against the extended-precision oracle") {
  const DplParams base;
  const oracle::Law law;
  CHECK(std::abs(eval_dpl(base, 0.5, kHigh) - 1.9381) < 1e-3);
  CHECK(std::abs(eval_dpl(base, 0.5, kLow) - 2.5149) < 1e-3);
  for (double d : {0.08, 0.26, 1.0, 4.6, 10.0}) {
    for (double p = 0.01; p <= 1.0; p += 0.07) {
      const double lib = eval_dpl(base, p, {"x", d});
      CHECK(std::abs(lib - static_cast<double>(oracle::dpl(law, p, d))) < 1e-13 * std::abs(lib));
    }
  }
}

TEST_CASE("bias is additive") {
  DplParams p;
  p.biases["hi"] = 0.37;
  for (double r : {0.05, 0.3, 0.9, 1.0}) {
    DplParams zero;
    CHECK(eval_dpl(p, r, kLow) - eval_dpl(zero, r, kLow) == doctest::Approx(0.37).epsilon(1e-14));
  }
}

TEST_CASE("domain and strict-bias errors") {
  const DplParams p;
  CHECK_THROWS_AS(eval_dpl(p, 0.0, kLow), DomainError);
  CHECK_THROWS_AS(eval_dpl(p, -0.1, kLow), DomainError);
  CHECK_THROWS_AS(eval_dpl(p, 1.0000001, kLow), DomainError);
  CHECK_NOTHROW(eval_dpl(p, 1.0, kLow));
  CHECK_THROWS_AS(eval_dpl(p, 0.5, {"x", 0.0}), DomainError);
  EvalOptions strict;
  strict.strict_bias = true;
  CHECK_THROWS_AS(eval_dpl(p, 0.5, kLow, strict), MissingBiasError);
  DplParams with = p;
  with.biases["hi"] = 0.1;
  CHECK_NOTHROW(eval_dpl(with, 0.5, kLow, strict));
  CHECK(evaluate_dpl(p, 0.5, kLow).bias_defaulted);
  CHECK_FALSE(evaluate_dpl(with, 0.5, kLow).bias_defaulted);
  CHECK(evaluate_dpl(p, 0.05, kLow).extrapolated);
  CHECK_FALSE(evaluate_dpl(p, 0.5, kLow).extrapolated);
  DplParams bad;
  bad.k = -1;
  CHECK_THROWS_AS(eval_dpl(bad, 0.5, kLow), DomainError);
}

TEST_CASE("bias lookup by name and by name@size") {
  DplParams p;
  p.biases["hi"] = 1.0;
  p.biases[bias_key("hi", 0.26)] = 2.0;
  CHECK(*p.find_bias({"hi", 0.26}) == 2.0);
  CHECK(*p.find_bias({"hi", 1.0}) == 1.0);
  CHECK_FALSE(p.find_bias({"fr", 1.0}).has_value());
}

TEST_CASE("derivative matches central differences") {
  const DplParams p;
  for (double d : {0.08, 0.26, 1.0, 4.6, 10.0}) {
    for (double r = 0.01; r <= 0.99; r *= 1.3) {
      const double h = 1e-6 * r;
      const double fd = (eval_dpl(p, r + h, {"x", d}) - eval_dpl(p, r - h, {"x", d})) / (2 * h);
      const double an = dpl_derivative(p, r, {"x", d});
      CHECK(std::abs(an - fd) <= 1e-5 * std::abs(an));
    }
  }
  CHECK_THROWS_AS(dpl_derivative(p, 1.0, kLow), DomainError);
  CHECK_THROWS_AS(dpl_derivative(p, 0.0, kLow), DomainError);
}

TEST_CASE("second derivative matches differences of the first") {
  const DplParams p;
  for (double d : {0.26, 10.0}) {
    for (double r : {0.05, 0.2, 0.5, 0.8}) {
      const double h = 1e-5 * r;
      const double fd = (dpl_derivative(p, r + h, {"x", d}) - dpl_derivative(p, r - h, {"x", d})) / (2 * h);
      CHECK(dpl_second_derivative(p, r, {"x", d}) == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("high-resource curve is decreasing") {
  const DplParams p;
  for (int i = 1; i <= 9; ++i) CHECK(dpl_derivative(p, i / 10.0, kHigh) < 0.0);
}

TEST_CASE("vanishing over-fit coefficient leaves the capacity derivative") {
  DplParams p;
  const double d0 = std::pow(-p.b, 1.0 / p.gamma);
  const DirectionSpec dir{"x", d0};
  CHECK(std::abs(overfit_coefficient(p, dir)) < 1e-14);
  for (double r : {0.1, 0.5, 0.9}) {
    const double capacity = -p.alpha * std::pow(p.k, -p.alpha) * std::pow(r, -p.alpha - 1);
    CHECK(dpl_derivative(p, r, dir) == doctest::Approx(capacity).epsilon(1e-12));
  }
}

TEST_CASE("over-fit coefficient values and sign change") {
  const DplParams p;
  CHECK(overfit_coefficient(p, kLow) == doctest::Approx(1.0598).epsilon(1e-4 / 1.0598));
  CHECK(overfit_coefficient(p, kHigh) == doctest::Approx(-0.0323).epsilon(1e-4 / 0.0323));
  const double root = oracle::bisect([&](double d) { return overfit_coefficient(p, {"x", d}); }, 1.0, 20.0);
  CHECK(std::abs(root - 8.17) < 0.05);
}

TEST_CASE("critical point") {
  const DplParams p;
  const auto cp = critical_point(p, kLow);
  REQUIRE(cp.has_value());
  CHECK(cp->interior());
  CHECK(std::abs(cp->ratio - 0.3387) < 0.005);
  CHECK(std::abs(cp->ratio - oracle::critical_point_fd({}, 0.26)) < 1e-6);
  CHECK(std::abs(dpl_derivative(p, cp->ratio, kLow)) < 1e-8);
  CHECK_FALSE(critical_point(p, kHigh).has_value());

  // Interior minimum over a fine grid.
  const double at = eval_dpl(p, cp->ratio, kLow);
  for (int i = 1; i < 1000; ++i) CHECK(at <= eval_dpl(p, i / 1000.0, kLow) + 1e-15);

  // A direction just below the sign change has p* beyond 1: reported, not clamped.
  const auto beyond = critical_point(p, {"x", 8.0});
  REQUIRE(beyond.has_value());
  CHECK(beyond->kind == CriticalPoint::Kind::kBeyondRange);
  CHECK(beyond->ratio >= 1.0);
}

TEST_CASE("preset critical points match the finite-difference root") {
  double prev = 0.0;
  for (const char* label : {"base", "medium", "large"}) {
    const auto p = find_preset(label).params;
    oracle::Law law;
    law.alpha = p.alpha;
    law.beta = p.beta;
    const double expected = oracle::critical_point_fd(law, 0.26);
    const auto cp = critical_point(p, kLow);
    REQUIRE(cp.has_value());
    CHECK(std::abs(cp->ratio - expected) < 1e-6);
    // With gamma and b shared, a steeper over-fit exponent moves the
    // minimum toward larger ratios.
    CHECK(cp->ratio > prev);
    prev = cp->ratio;
  }
}

TEST_CASE("temperature weights") {
  const std::vector<double> half{0.5, 0.5};
  for (double t : {0.5, 1.0, 5.0, 100.0}) {
    const auto w = temperature_weights(half, t);
    CHECK(w[0] == doctest::Approx(0.5));
    CHECK(w[1] == doctest::Approx(0.5));
  }
  const std::vector<double> shares{0.2, 0.3, 0.5};
  const auto w1 = temperature_weights(shares, 1.0);
  for (std::size_t i = 0; i < 3; ++i) CHECK(w1[i] == doctest::Approx(shares[i]).epsilon(1e-15));

  const std::vector<double> sizes{10.0, 0.26};
  const auto w5 = temperature_weights_from_sizes(sizes, 5.0);
  CHECK(std::abs(w5[0] - 0.6748) < 1e-4);
  CHECK(std::abs(w5[1] - 0.3252) < 1e-4);
  CHECK(std::abs(w5[0] + w5[1] - 1.0) < 1e-12);
  // Independent: s^(1/T) / sum ignoring the library's rescaling.
  const double s0 = 10.0 / 10.26, s1 = 0.26 / 10.26;
  const double a = std::pow(s0, 0.2), b = std::pow(s1, 0.2);
  CHECK(w5[0] == doctest::Approx(a / (a + b)).epsilon(1e-14));

  CHECK_THROWS_AS(temperature_weights(std::vector<double>{0.5, 0.0}, 1.0), DomainError);
  CHECK_THROWS_AS(temperature_weights(half, 0.0), DomainError);
  CHECK_THROWS_AS(temperature_weights(half, -1.0), DomainError);
}

TEST_CASE("predict_curve") {
  const DplParams p;
  const std::vector<double> one{0.42};
  const auto c = predict_curve(p, kLow, one);
  REQUIRE(c.points.size() == 1);
  CHECK(c.points[0].loss == eval_dpl(p, 0.42, kLow));

  const auto grid = ratio_grid(0.1, 0.9, 0.01);
  const auto low = predict_curve(p, kLow, grid);
  std::size_t best = 0;
  for (std::size_t i = 0; i < low.points.size(); ++i) {
    CHECK(low.points[i].ratio == grid[i]);
    if (low.points[i].loss < low.points[best].loss) best = i;
  }
  CHECK(low.points[best].ratio == doctest::Approx(0.34));

  const auto high = predict_curve(p, kHigh, ratio_grid(0.1, 0.9, 0.1));
  for (std::size_t i = 1; i < high.points.size(); ++i) CHECK(high.points[i].loss < high.points[i - 1].loss);

  CHECK_THROWS_AS(predict_curve(p, kLow, std::vector<double>{0.0, 0.5}), DomainError);
}

TEST_CASE("curves depend on data size, not name") {
  DplParams p;
  p.biases["a"] = 0.1;
  p.biases["b"] = 0.4;
  for (double r : {0.1, 0.5, 0.9}) {
    CHECK(eval_dpl(p, r, {"b", 0.26}) - eval_dpl(p, r, {"a", 0.26}) == doctest::Approx(0.3).epsilon(1e-12));
  }
}

TEST_CASE("loss diverges as p approaches zero") {
  const DplParams p;
  CHECK(eval_dpl(p, 1e-12, kLow) > 100.0);
  CHECK(eval_dpl(p, 1e-12, kLow) > eval_dpl(p, 1e-9, kLow));
}

TEST_CASE("ratio grid") {
  const auto g = ratio_grid(0.1, 0.9, 0.1);
  REQUIRE(g.size() == 9);
  CHECK(g.front() == 0.1);
  CHECK(g[2] == 0.3);
  CHECK(g.back() == 0.9);
}

}  // TEST_SUITE
