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
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "qprop/derivatives.hpp"

namespace qprop {
namespace {

PrecisionPlan level(int n, double m, double h, bool quantize = true) {
  auto p = make_plan(n, m, h);
  p.quantize_energy = quantize;
  return p;
}

TEST(GradientBlackBox, IdealizedChargesTwo) {
  const auto o = models::quadratic_form({{0.5}});
  const auto box = gradient_blackbox(o, level(4, 1.0, 1.0), DerivativeMode::idealized);
  const auto out = box(std::vector<double>{0.25});
  EXPECT_EQ(out.decoded, std::vector<double>{0.125});
  EXPECT_EQ(out.queries, 2u);
}

TEST(GradientBlackBox, NestedIsPhaseClean) {
  for (const auto& o : {models::constant(1, 0.7), models::linear({0.25}, 0.3)}) {
    const auto box = gradient_blackbox(o, level(4, 1.0, 1.0, false), DerivativeMode::nested);
    for (double nu : {-0.5, 0.0, 0.375, 1.0}) {
      const auto out = box(std::vector<double>{nu});
      EXPECT_NEAR(out.probability, 1.0, 1e-10);
      EXPECT_NEAR(out.residual_phase, 0.0, 1e-9) << o.name() << " nu=" << nu;
      EXPECT_EQ(out.queries, 2u);
    }
  }
}

TEST(GradientBlackBox, NestedQuadraticPhaseIndependentOfNu) {
  const auto o = models::quadratic_form({{0.5}});
  const auto box = gradient_blackbox(o, level(4, 2.0, 0.5, false), DerivativeMode::nested);
  const auto ref = box(std::vector<double>{0.0});
  for (double nu : {0.25, 0.5, -0.5}) {
    const auto out = box(std::vector<double>{nu});
    EXPECT_NEAR(out.decoded[0], 0.5 * nu, 1e-12);
    EXPECT_NEAR(out.probability, ref.probability, 1e-10);
    EXPECT_NEAR(std::remainder(out.residual_phase - ref.residual_phase, 2 * std::numbers::pi), 0.0, 1e-9);
  }
}

TEST(GradientBlackBox, NestedAndIdealizedAgree) {
  const auto o = models::quadratic_form({{0.5}});
  const auto p = level(4, 1.0, 0.25);
  const auto ideal = gradient_blackbox(o, p, DerivativeMode::idealized);
  const auto nested = gradient_blackbox(o, p, DerivativeMode::nested);
  for (double nu : {-0.6, -0.2, 0.0, 0.13, 0.5}) {
    const std::vector<double> at{nu};
    EXPECT_LE(std::abs(ideal(at).decoded[0] - nested(at).decoded[0]), p.resolution() + 1e-12) << nu;
  }
}

TEST(GradientBlackBox, NestedRejectsHigherDimension) {
  EXPECT_THROW(gradient_blackbox(models::linear({1.0, 1.0}), level(2, 1.0, 1.0), DerivativeMode::nested),
               ConfigError);
}

TEST(Hessian, OneDimensionBothModes) {
  const auto o = models::quadratic_form({{0.5}});
  const std::vector<PrecisionPlan> levels{level(4, 0.5, 32.0, false), level(4, 2.0, 1.0)};
  for (auto mode : {DerivativeMode::idealized, DerivativeMode::nested}) {
    DerivativeOptions opt;
    opt.mode = mode;
    const auto t = estimate_hessian(o, PerturbationDomain::origin(1, 1.0), levels, opt);
    EXPECT_NEAR(t.tensor.entries[0], 0.5, 2.0 / 16) << to_string(mode);
    EXPECT_EQ(t.queries, 2u);
    EXPECT_EQ(t.order(), 2);
  }
}

TEST(Hessian, NestedIsExactForRepresentableQuadratic) {
  const auto o = models::quadratic_form({{0.5}});
  const std::vector<PrecisionPlan> levels{level(4, 0.5, 32.0, false), level(4, 2.0, 1.0)};
  DerivativeOptions opt;
  opt.mode = DerivativeMode::nested;
  const auto t = estimate_hessian(o, PerturbationDomain::origin(1, 1.0), levels, opt);
  EXPECT_EQ(t.tensor.entries[0], 0.5);
  EXPECT_NEAR(t.success_probability, 1.0, 1e-9);
  EXPECT_GE(t.cleanup_passes, 1u);
}

TEST(Hessian, TwoDimensionalIdealized) {
  const auto o = models::quadratic_form({{2.0, 0.5}, {0.5, 1.0}});
  const std::vector<PrecisionPlan> levels{level(7, 4.0, 1.0), level(4, 8.0, 1.0)};
  const auto t = estimate_hessian(o, PerturbationDomain::origin(2, 1.0), levels);
  const double step = 8.0 / 16;
  const double A[] = {2.0, 0.5, 0.5, 1.0};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(t.tensor.entries[static_cast<std::size_t>(i)], A[i], step);
  EXPECT_LE(t.tensor.asymmetry(), 2 * step);
  EXPECT_EQ(t.queries, 2u);
}

TEST(Hessian, LinearIsZero) {
  const auto o = models::linear({0.25, -0.5});
  const std::vector<PrecisionPlan> levels{level(4, 2.0, 1.0), level(4, 1.0, 1.0)};
  const auto t = estimate_hessian(o, PerturbationDomain::origin(2, 1.0), levels);
  EXPECT_EQ(t.tensor.max_abs(), 0.0);
}

TEST(Hessian, SymmetryOnModelSurfaces) {
  struct Case {
    EnergyOracle oracle;
    std::vector<double> at;
  };
  const std::vector<Case> cases{
      {models::mueller_brown_2d(), {-0.5, 1.4}},
      {models::dipole_field({0.1, 0.2}, {{1.0, 0.3}, {0.3, 2.0}}), {0.0, 0.0}},
      {models::quadratic_form({{1.0, -0.3, 0.1}, {-0.3, 2.0, 0.2}, {0.1, 0.2, 0.5}}), {0.1, 0.2, -0.1}},
  };
  for (const auto& c : cases) {
    const double m2 = 4.0 * c.oracle.derivative(2, c.at).max_abs() + 1.0;
    const double m1 = 2.0 * c.oracle.derivative(1, c.at).max_abs() + 2.0 * m2 * 0.02;
    const std::vector<PrecisionPlan> levels{level(10, m1, 0.02), level(4, m2, 0.02)};
    const auto t = estimate_hessian(c.oracle, PerturbationDomain(c.at, 0.02), levels);
    EXPECT_LE(t.tensor.asymmetry(), 2.0 * m2 / 16) << c.oracle.name();
  }
}

TEST(Derivative, OrderOneMatchesGradient) {
  const auto o = models::linear({0.25, -0.25});
  const auto p = level(4, 1.0, 1.0);
  const auto t = estimate_derivative(o, PerturbationDomain::origin(2, 1.0), 1, {p});
  const auto g = estimate_gradient(o, PerturbationDomain::origin(2, 1.0), p);
  EXPECT_EQ(t.tensor.entries, g.decoded);
  EXPECT_EQ(t.raw, g.raw);
  EXPECT_EQ(t.queries, 1u);
}

TEST(Derivative, CubicThirdDerivative) {
  const auto o = models::polynomial_1d({0.0, 0.0, 0.0, 1.0 / 6.0});
  const std::vector<PrecisionPlan> levels{level(4, 1.0, 1.0, false), level(4, 2.0, 1.0), level(4, 4.0, 1.0)};
  for (auto mode : {DerivativeMode::idealized, DerivativeMode::nested}) {
    DerivativeOptions opt;
    opt.mode = mode;
    const auto t = estimate_derivative(o, PerturbationDomain::origin(1, 1.0), 3, levels, opt);
    EXPECT_NEAR(t.tensor.entries[0], 1.0, 4.0 / 16) << to_string(mode);
    EXPECT_EQ(t.queries, 4u);
  }
}

TEST(Derivative, NestedPolynomialExactness) {
  // 0.3 + 0.25 mu + 0.25 mu^2: every level readout is representable and the
  // inner curvature phase is a whole number of turns.
  const auto o = models::polynomial_1d({0.3, 0.25, 0.25});
  const std::vector<PrecisionPlan> levels{level(5, 1.0, 128.0, false), level(4, 2.0, 1.0)};
  DerivativeOptions opt;
  opt.mode = DerivativeMode::nested;
  const auto t = estimate_derivative(o, PerturbationDomain::origin(1, 1.0), 2, levels, opt);
  EXPECT_EQ(t.tensor.entries[0], 0.5);
  EXPECT_NEAR(t.success_probability, 1.0, 1e-9);
}

TEST(Derivative, NestedAndIdealizedAgreeAtOrderThree) {
  const auto o = models::polynomial_1d({0.0, 0.1, -0.2, 0.25});
  const std::vector<PrecisionPlan> levels{level(4, 2.0, 0.5, false), level(4, 4.0, 0.5), level(4, 4.0, 0.5)};
  DerivativeOptions nested;
  nested.mode = DerivativeMode::nested;
  const auto a = estimate_derivative(o, PerturbationDomain::origin(1, 0.5), 3, levels);
  const auto b = estimate_derivative(o, PerturbationDomain::origin(1, 0.5), 3, levels, nested);
  EXPECT_LE(std::abs(a.tensor.entries[0] - b.tensor.entries[0]), 4.0 / 16 + 1e-12);
  EXPECT_EQ(b.queries, 4u);
}

TEST(Derivative, ConstantOrderFour) {
  const auto o = models::constant(2, 1.5);
  std::vector<PrecisionPlan> levels(4, level(2, 1.0, 1.0));
  const auto t = estimate_derivative(o, PerturbationDomain::origin(2, 1.0), 4, levels);
  EXPECT_EQ(t.tensor.size(), 16u);
  EXPECT_EQ(t.tensor.max_abs(), 0.0);
  EXPECT_EQ(t.queries, 8u);
}

TEST(Derivative, QueryLawIndependentOfDimension) {
  for (std::size_t d : {1u, 2u, 3u}) {
    std::vector<std::vector<double>> a(d, std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < d; ++i) a[i][i] = 1.0;
    const auto o = models::quadratic_form(a);
    for (int r = 1; r <= 5; ++r) {
      std::vector<PrecisionPlan> levels(static_cast<std::size_t>(r), level(2, 4.0, 1.0, false));
      const auto t = estimate_derivative(o, PerturbationDomain::origin(d, 1.0), r, levels);
      EXPECT_EQ(t.queries, std::uint64_t{1} << (r - 1)) << "d=" << d << " r=" << r;
    }
  }
}

TEST(Derivative, NestedLimits) {
  const std::vector<PrecisionPlan> levels(4, level(2, 1.0, 1.0));
  DerivativeOptions opt;
  opt.mode = DerivativeMode::nested;
  EXPECT_THROW(estimate_derivative(models::constant(1, 0.0), PerturbationDomain::origin(1, 1.0), 4, levels, opt),
               ConfigError);
  EXPECT_THROW(estimate_derivative(models::constant(2, 0.0), PerturbationDomain::origin(2, 1.0), 2, levels, opt),
               ConfigError);
  const std::vector<PrecisionPlan> big(3, level(5, 1.0, 1.0));
  EXPECT_THROW(estimate_derivative(models::constant(1, 0.0), PerturbationDomain::origin(1, 1.0), 3, big, opt),
               CapacityError);
}

TEST(Ablation, QuadraticNeedsUncomputation) {
  const auto o = models::quadratic_form({{0.5}});
  const std::vector<PrecisionPlan> levels{level(4, 0.5, 32.0, false), level(4, 2.0, 1.0)};
  const auto r = uncomputation_ablation(o, PerturbationDomain::origin(1, 1.0), levels);
  EXPECT_GE(r.with_uncompute, 0.85);
  EXPECT_LT(r.without_uncompute, r.with_uncompute - 0.1);
  EXPECT_EQ(r.with_queries, 2u);
}

TEST(Ablation, ConstantIsHarmless) {
  const auto o = models::constant(1, 0.37);
  const std::vector<PrecisionPlan> levels{level(3, 1.0, 1.0), level(3, 1.0, 1.0)};
  const auto r = uncomputation_ablation(o, PerturbationDomain::origin(1, 1.0), levels);
  EXPECT_NEAR(r.with_uncompute, 1.0, 1e-10);
  EXPECT_NEAR(r.without_uncompute, 1.0, 1e-10);
}

TEST(Ablation, LinearShiftsOuterReading) {
  // Without uncomputation the inner energy phase N1 E(mu)/(h1 m1) is left on
  // each outer branch; for E = g mu it is linear with outer slope
  // N1 g h2 / (h1 m1) readout units.
  const double g = 0.25, m1 = 1.0, h1 = 1.0, h2 = 1.0;
  const int n = 4;
  const auto o = models::linear({g});
  const std::vector<PrecisionPlan> levels{level(n, m1, h1, false), level(n, 1.0, h2)};
  const auto r = uncomputation_ablation(o, PerturbationDomain::origin(1, h2), levels);
  const auto shift = static_cast<std::size_t>(std::llround(16 * g * h2 / (h1 * m1))) % 16;
  EXPECT_EQ(r.with_readout, 0u);
  EXPECT_EQ(r.without_readout, shift);
  EXPECT_NEAR(r.with_uncompute, 1.0, 1e-10);
}

}  // namespace
}  // namespace qprop
