// Copyright 2026 The qprop Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "qprop/oracles.hpp"

namespace qprop {
namespace {

// Sixth-order central difference of a scalar function along one axis.
template <typename F>
double central(F&& f, std::vector<double> x, std::size_t i, double h) {
  auto at = [&](double s) {
    auto y = x;
    y[i] += s * h;
    return f(y);
  };
  return (-at(-3) + 9 * at(-2) - 45 * at(-1) + 45 * at(1) - 9 * at(2) + at(3)) / (60.0 * h);
}

TEST(Models, QuadraticFormValue) {
  const auto q = models::quadratic_form({{1.0}});
  EXPECT_NEAR(q(std::vector<double>{0.5}), 0.125, 1e-15);
}

TEST(Models, DipoleFieldSignConvention) {
  const auto o = models::dipole_field({0.3});
  EXPECT_NEAR(o(std::vector<double>{0.1}), -0.03, 1e-15);
  EXPECT_NEAR(o.derivative(1, std::vector<double>{0.0}).entries[0], -0.3, 1e-15);
}

TEST(Models, DipoleFieldPolarizability) {
  // E = e0 - d.F - 1/2 F a F.
  const auto o = models::dipole_field({0.1, 0.2}, {{2.0, 0.5}, {0.5, 1.0}}, 1.0);
  const std::vector<double> f{0.3, -0.2};
  const double want = 1.0 - (0.1 * 0.3 - 0.2 * 0.2) - 0.5 * (2.0 * 0.09 + 2 * 0.5 * 0.3 * -0.2 + 1.0 * 0.04);
  EXPECT_NEAR(o(f), want, 1e-14);
  const auto H = o.derivative(2, f);
  EXPECT_NEAR(H.entries[1], -0.5, 1e-14);
}

TEST(Models, LinearGradient) {
  const auto o = models::linear({0.25, -0.25});
  const auto g = o.derivative(1, std::vector<double>{0.0, 0.0});
  EXPECT_EQ(g.entries, (std::vector<double>{0.25, -0.25}));
  EXPECT_EQ(o.derivative(2, std::vector<double>{0.0, 0.0}).max_abs(), 0.0);
}

TEST(Models, MorseAndLennardJonesMinima) {
  const auto m = models::morse_1d(1.0, 1.0, 1.0);
  EXPECT_NEAR(m(std::vector<double>{1.0}), 0.0, 1e-15);
  EXPECT_NEAR(m.derivative(1, std::vector<double>{1.0}).entries[0], 0.0, 1e-15);
  EXPECT_NEAR(m.derivative(2, std::vector<double>{1.0}).entries[0], 2.0, 1e-14);  // 2 D a^2
  const auto lj = models::lennard_jones_pair(1.0, 1.0);
  const double rmin = std::pow(2.0, 1.0 / 6.0);
  EXPECT_NEAR(lj(std::vector<double>{rmin}), -1.0, 1e-14);
  EXPECT_NEAR(lj.derivative(1, std::vector<double>{rmin}).entries[0], 0.0, 1e-12);
  EXPECT_THROW(lj(std::vector<double>{-1.0}), DomainError);
}

TEST(Models, PolynomialDerivatives) {
  const auto p = models::polynomial_1d({1.0, 2.0, 3.0, 4.0});  // 1 + 2x + 3x^2 + 4x^3
  const std::vector<double> x{0.5};
  EXPECT_NEAR(p(x), 1 + 1 + 0.75 + 0.5, 1e-14);
  EXPECT_NEAR(p.derivative(1, x).entries[0], 2 + 3 + 3, 1e-14);
  EXPECT_NEAR(p.derivative(2, x).entries[0], 6 + 12, 1e-14);
  EXPECT_NEAR(p.derivative(3, x).entries[0], 24, 1e-14);
  EXPECT_NEAR(p.derivative(4, x).entries[0], 0, 1e-14);
}

TEST(Models, MuellerBrownKnownMinimum) {
  // Written out independently of the library.
  const double A[] = {-200, -100, -170, 15}, a[] = {-1, -1, -6.5, 0.7}, b[] = {0, 0, 11, 0.6},
               c[] = {-10, -10, -6.5, 0.7}, x0[] = {1, 0, -0.5, -1}, y0[] = {0, 0.5, 1.5, 1};
  auto mb = [&](double x, double y) {
    double e = 0;
    for (int i = 0; i < 4; ++i) {
      const double dx = x - x0[i], dy = y - y0[i];
      e += A[i] * std::exp(a[i] * dx * dx + b[i] * dx * dy + c[i] * dy * dy);
    }
    return e;
  };
  const auto o = models::mueller_brown_2d();
  for (auto [x, y] : {std::pair{-0.558, 1.442}, std::pair{0.623, 0.028}, std::pair{0.1, 0.9}}) {
    EXPECT_NEAR(o(std::vector<double>{x, y}), mb(x, y), 1e-10);
  }
  EXPECT_NEAR(o(std::vector<double>{-0.558224, 1.441726}), -146.69951, 1e-4);
}

TEST(Models, AnalyticDerivativesMatchFiniteDifferences) {
  std::vector<EnergyOracle> oracles{
      models::linear({0.3, -0.7}, 0.1),
      models::quadratic_form({{2.0, 0.5}, {0.5, 1.0}}, {0.1, -0.2}, {0.3, 0.0}, 0.5),
      models::dipole_field({0.1, -0.2}, {{1.0, 0.2}, {0.2, 0.5}}),
      models::morse_1d(1.2, 0.9, 1.1),
      models::lennard_jones_pair(1.0, 1.0),
      models::polynomial_1d({0.1, -0.5, 0.3, 0.2, -0.05}),
      models::mueller_brown_2d(),
  };
  std::mt19937_64 rng(5);
  for (const auto& o : oracles) {
    const std::size_t d = o.dim();
    for (int probe = 0; probe < 100; ++probe) {
      std::vector<double> x(d);
      std::uniform_real_distribution<double> u(o.name() == "lennard_jones_pair" ? 0.95 : -1.0,
                                               o.name() == "lennard_jones_pair" ? 2.0 : 1.0);
      for (auto& v : x) v = u(rng);
      if (o.name() == "mueller_brown_2d") x[1] += 0.5;
      const double h = 1e-3;
      const auto g = o.derivative(1, x);
      const auto H = o.derivative(2, x);
      auto energy = [&](const std::vector<double>& y) { return o.peek(y); };
      for (std::size_t i = 0; i < d; ++i) {
        const double fd = central(energy, x, i, h);
        EXPECT_NEAR(g.entries[i], fd, 1e-6 * std::max(1.0, std::abs(fd))) << o.name();
        for (std::size_t j = 0; j < d; ++j) {
          auto gj = [&](const std::vector<double>& y) { return o.derivative(1, y).entries[j]; };
          const double fdh = central(gj, x, i, h);
          EXPECT_NEAR(H.entries[i * d + j], fdh, 1e-6 * std::max(1.0, std::abs(fdh))) << o.name();
        }
      }
    }
  }
}

TEST(Models, DerivativeBoundsHold) {
  const Box box{{0.5}, {2.0}};
  const auto m = models::morse_1d(1.0, 1.0, 1.0, box);
  for (int r = 1; r <= 4; ++r) {
    const auto bound = m.derivative_bound(r);
    ASSERT_TRUE(bound.has_value());
    for (double x = 0.5; x <= 2.0; x += 0.01) {
      EXPECT_LE(std::abs(m.derivative(r, std::vector<double>{x}).entries[0]), *bound + 1e-12);
    }
  }
}

TEST(Counter, ClassicalAndCoherentCalls) {
  const auto o = models::linear({1.0});
  const std::vector<double> x{0.0};
  o(x);
  o(x);
  o(x);
  EXPECT_EQ(reset_and_read_counter(o), 3u);
  EXPECT_EQ(reset_and_read_counter(o), 0u);
  const auto q = o.coherent_query();
  for (double v = -1; v <= 1; v += 0.25) q(std::vector<double>{v});
  o.peek(x);
  o.derivative(1, x);
  EXPECT_EQ(o.calls(), 1u);
}

TEST(Shifted, ProbesOriginalAroundNu) {
  const auto lin = models::linear({1.0});
  const auto s = lin.shifted(std::vector<double>{0.5});
  // Sampling the shifted oracle at 0 reads the original at nu.
  EXPECT_NEAR(s(std::vector<double>{0.0}), 0.5, 1e-15);
  EXPECT_NEAR(s(std::vector<double>{-0.5}), 0.0, 1e-15);
  const auto q = models::quadratic_form({{1.0}}).shifted(std::vector<double>{0.25});
  EXPECT_NEAR(q.derivative(1, std::vector<double>{0.0}).entries[0], 0.25, 1e-15);
  EXPECT_EQ(lin.calls(), 2u);  // counter is shared
}

TEST(Shifted, NestedShiftsCompose) {
  const auto o = models::mueller_brown_2d();
  const std::vector<double> n1{0.1, -0.2}, n2{-0.3, 0.05}, sum{-0.2, -0.15};
  const auto a = o.shifted(n1).shifted(n2);
  const auto b = o.shifted(sum);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int i = 0; i < 50; ++i) {
    const std::vector<double> x{u(rng), u(rng) + 0.5};
    EXPECT_NEAR(a.peek(x), b.peek(x), 1e-12);
  }
}

TEST(Shifted, DomainViolation) {
  const auto o = models::linear({1.0}, 0.0, Box{{-1.0}, {1.0}});
  EXPECT_THROW(o.shifted(std::vector<double>{2.0}), DomainError);
  const auto s = o.shifted(std::vector<double>{0.5});
  EXPECT_THROW(s(std::vector<double>{0.6}), DomainError);
  EXPECT_NO_THROW(s(std::vector<double>{0.4}));
}

TEST(Quantize, LevelArithmetic) {
  const auto o = models::constant(1, 0.1234).with_energy_bounds({0.0, 1.0});
  const auto q = quantize(o, 8);
  EXPECT_DOUBLE_EQ(q(std::vector<double>{0.0}), 32.0 / 256.0);
}

TEST(Quantize, DegenerateRangePassesThrough) {
  const auto o = models::constant(2, -3.5).with_energy_bounds({-3.5, -3.5});
  for (int bits : {1, 8, 60}) EXPECT_EQ(quantize(o, bits)(std::vector<double>{0.0, 0.0}), -3.5);
}

TEST(Quantize, ErrorBoundAndLimit) {
  const auto o = models::morse_1d(1.0, 1.0, 1.0).with_energy_bounds({0.0, 2.0});
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.6, 2.0);
  for (int bits : {1, 4, 12, 40}) {
    const auto q = quantize(o, bits);
    for (int i = 0; i < 100; ++i) {
      const std::vector<double> x{u(rng)};
      EXPECT_LE(std::abs(q(x) - o.peek(x)), 2.0 / std::ldexp(1.0, bits + 1) + 1e-15);
    }
  }
  EXPECT_THROW(quantize(o, 1100), NumericError);
}

TEST(Quantize, OutsideBoundsIsDomainError) {
  const auto o = models::linear({1.0}).with_energy_bounds({-0.5, 0.5});
  const auto q = quantize(o, 8);
  EXPECT_THROW(q(std::vector<double>{0.75}), DomainError);
  EXPECT_THROW(quantize(models::linear({1.0}), 8), ConfigError);
}

TEST(Config, MakeModelAndOracleFromJson) {
  const auto o = oracle_from_json(nlohmann::json::parse(R"({
    "name": "quadratic_form", "params": {"A": [[1.0]]},
    "bounds": [0.0, 1.0], "derivative_bounds": [0.5, 1.0], "box": {"lo": [-1], "hi": [1]}})"));
  EXPECT_NEAR(o(std::vector<double>{0.5}), 0.125, 1e-15);
  EXPECT_EQ(o.derivative_bound(1), 0.5);
  ASSERT_TRUE(o.energy_bounds().has_value());
  EXPECT_THROW(make_model("no_such_model", {}), ConfigError);
  EXPECT_THROW(make_model("linear", nlohmann::json::parse(R"({"g": [1], "slope": 2})")), ConfigError);
  EXPECT_THROW(make_model("quadratic_form", nlohmann::json::parse(R"({"A": [[1, 2], [0, 1]]})")), ConfigError);
}

}  // namespace
}  // namespace qprop
