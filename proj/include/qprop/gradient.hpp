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

// Single-query gradient estimation over a phase oracle.
//
// The d registers start in uniform superposition; one coherent oracle
// application multiplies |k> by exp(2*pi*i * N/(h*m) * E(mu(k))) with
// mu(k) = center + h*(k - N/2)/N; the per-register inverse QFT then leaves
// register i near N/m * dE/dmu_i (mod N). Readout is two's-complement style,
// decoded = m * signed(y) / N with signed(y) = y - N for y >= N/2.

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "qprop/errors.hpp"
#include "qprop/oracles.hpp"
#include "qprop/qstate.hpp"

namespace qprop {

/// Sampling grid: center plus a box of width h per axis.
struct PerturbationDomain {
  std::vector<double> center;
  double h = 1.0;

  PerturbationDomain(std::vector<double> center_, double h_) : center(std::move(center_)), h(h_) {
    if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("sampling width h must be positive");
    if (center.empty()) throw ConfigError("domain dimension must be >= 1");
  }

  static PerturbationDomain origin(std::size_t d, double h) { return {std::vector<double>(d, 0.0), h}; }

  std::size_t dim() const { return center.size(); }

  /// Grid point for an integer vector k: center + h*(k - N/2)/N.
  std::vector<double> point(std::span<const std::size_t> k, std::size_t points) const {
    std::vector<double> mu(center);
    const double N = static_cast<double>(points);
    for (std::size_t i = 0; i < mu.size(); ++i) mu[i] += h * (static_cast<double>(k[i]) - N / 2.0) / N;
    return mu;
  }
};

/// Bits needed in the energy for n-bit output at failure angle theta,
/// ceil(n + log2(2*pi/theta)).
inline int energy_bits_for(int n, double theta) {
  const double extra = std::log2(2.0 * std::numbers::pi / theta);
  return n + static_cast<int>(std::ceil(extra - 1e-9));
}

struct PrecisionPlan {
  int bits = 1;               // n, output bits per register
  double scale = 1.0;         // m, readout covers [-m/2, m/2)
  double width = 1.0;         // h
  double failure_angle = std::numbers::pi / 8.0;  // theta; success ~ cos^2(theta)
  int energy_bits = 1;        // n_E
  bool quantize_energy = true;
  std::vector<std::string> warnings;

  std::size_t points() const { return std::size_t{1} << bits; }
  double resolution() const { return scale / static_cast<double>(points()); }

  void validate() const {
    if (bits < 1 || bits > 30) throw ConfigError("plan: n must be in [1, 30]");
    if (!(scale > 0.0) || !std::isfinite(scale)) throw ConfigError("plan: m must be positive");
    if (!(width > 0.0) || !std::isfinite(width)) throw ConfigError("plan: h must be positive");
    if (!(failure_angle > 0.0 && failure_angle < std::numbers::pi / 2.0)) {
      throw ConfigError("plan: theta must lie in (0, pi/2)");
    }
    if (quantize_energy && energy_bits < bits) throw ConfigError("plan: n_E must be >= n");
  }

  /// Signed value of a raw register reading.
  std::int64_t signed_value(std::size_t y) const {
    const auto N = static_cast<std::int64_t>(points());
    const auto v = static_cast<std::int64_t>(y);
    return v < N / 2 ? v : v - N;
  }

  double decode(std::size_t y) const {
    return scale * static_cast<double>(signed_value(y)) / static_cast<double>(points());
  }

  /// Register value an exact readout of `value` would produce.
  std::size_t encode(double value) const {
    const auto N = static_cast<std::int64_t>(points());
    auto r = static_cast<std::int64_t>(std::llround(value * static_cast<double>(N) / scale));
    r %= N;
    if (r < 0) r += N;
    return static_cast<std::size_t>(r);
  }
};

/// Plan with an explicit scale m.
inline PrecisionPlan make_plan(int n, double m, double h, double theta = std::numbers::pi / 8.0) {
  if (!(theta > 0.0 && theta < std::numbers::pi / 2.0)) throw ConfigError("plan: theta must lie in (0, pi/2)");
  PrecisionPlan p;
  p.bits = n;
  p.scale = m;
  p.width = h;
  p.failure_angle = theta;
  p.energy_bits = energy_bits_for(n, theta);
  p.validate();
  return p;
}

/// Plan from the oracle's declared first-derivative bound; m is twice that
/// bound so every true derivative decodes without sign ambiguity.
inline PrecisionPlan plan(int n, double theta, const EnergyOracle& oracle, double h) {
  const auto bound = oracle.derivative_bound(1);
  if (!bound) throw ConfigError(oracle.name() + ": no first-derivative bound declared");
  auto p = make_plan(n, 2.0 * std::max(*bound, std::numeric_limits<double>::min()), h, theta);
  if (auto curvature = oracle.derivative_bound(2)) {
    // Quadratic term of the phase across half a box, in turns.
    const double quad_turns = h * *curvature * static_cast<double>(p.points()) / (2.0 * p.scale);
    if (quad_turns > 0.25) {
      p.warnings.push_back("curvature phase " + std::to_string(quad_turns) +
                           " turns exceeds 1/4; reduce h for a reliable readout");
    }
  }
  return p;
}

/// Energy range over the closed sampling lattice center + h*(k - N/2)/N,
/// k = 0..N per axis, restricted to the validity box. Uses uncounted
/// evaluations: it stands in for bounds declared on the sampling box.
inline EnergyBounds sampling_window(const EnergyOracle& oracle, const PerturbationDomain& domain,
                                    std::size_t points, std::size_t cap = kDefaultDimensionCap) {
  const std::size_t d = domain.dim();
  std::size_t total = 1;
  for (std::size_t i = 0; i < d; ++i) {
    if (total > cap / (points + 1)) throw CapacityError("sampling lattice exceeds the dimension cap");
    total *= points + 1;
  }
  const Box box = oracle.box();
  EnergyBounds w{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  std::vector<std::size_t> k(d, 0);
  for (std::size_t f = 0; f < total; ++f) {
    const auto mu = domain.point(k, points);
    if (box.contains(mu)) {
      const double e = oracle.peek(mu);
      w.min = std::min(w.min, e);
      w.max = std::max(w.max, e);
    }
    for (std::size_t i = d; i-- > 0;) {
      if (++k[i] <= points) break;
      k[i] = 0;
    }
  }
  if (!(w.min <= w.max)) throw DomainError(oracle.name() + ": sampling box lies outside the validity box");
  return w;
}

enum class Readout { statevector, sampling };

struct GradientOptions {
  Readout readout = Readout::statevector;
  std::uint64_t seed = 0;
  std::size_t dimension_cap = kDefaultDimensionCap;
};

struct GradientEstimate {
  std::vector<std::size_t> raw;
  std::vector<double> decoded;
  double success_probability = 0.0;  // probability of the reported outcome
  std::uint64_t queries = 0;
  PrecisionPlan plan;
  Readout readout = Readout::statevector;
  std::optional<EnergyBounds> energy_window;
  RegisterArray state;               // post-QFT state
  OutcomeDistribution distribution;

  double probability_of(std::span<const std::size_t> outcome) const { return distribution.probability(outcome); }
};

/// Uniform superposition after one coherent phase-oracle call.
template <typename Oracle>
RegisterArray prepare_phased_state(const Oracle& oracle, const PerturbationDomain& domain,
                                   const PrecisionPlan& plan, std::size_t cap = kDefaultDimensionCap) {
  const RegisterLayout layout(static_cast<int>(domain.dim()), plan.bits, cap);
  auto state = uniform_superposition(layout);
  const auto query = oracle.coherent_query();
  const double factor = static_cast<double>(plan.points()) / (domain.h * plan.scale);
  apply_diagonal_phase(state, [&](std::span<const std::size_t> k) {
    return factor * query(domain.point(k, plan.points()));
  });
  return state;
}

namespace detail {

inline void check_dims(const EnergyOracle& oracle, const PerturbationDomain& domain, const PrecisionPlan& plan) {
  plan.validate();
  if (domain.dim() != oracle.dim()) throw ConfigError("domain dimension does not match the oracle");
  if (std::abs(domain.h - plan.width) > 1e-12 * std::max(1.0, plan.width)) {
    throw ConfigError("domain width h differs from the plan width");
  }
}

}  // namespace detail

/// Jordan gradient estimate at domain.center with exactly one oracle query.
inline GradientEstimate estimate_gradient(const EnergyOracle& oracle, const PerturbationDomain& domain,
                                          const PrecisionPlan& plan, const GradientOptions& options = {}) {
  detail::check_dims(oracle, domain, plan);
  const RegisterLayout layout(static_cast<int>(domain.dim()), plan.bits, options.dimension_cap);
  const auto before = oracle.calls();
  std::optional<EnergyBounds> window;
  RegisterArray state = [&] {
    if (!plan.quantize_energy) return prepare_phased_state(oracle, domain, plan, options.dimension_cap);
    window = oracle.energy_bounds() ? *oracle.energy_bounds()
                                    : sampling_window(oracle, domain, plan.points(), options.dimension_cap);
    const QuantizedOracle q(oracle.with_energy_bounds(*window), plan.energy_bits);
    return prepare_phased_state(q, domain, plan, options.dimension_cap);
  }();
  const auto queries = oracle.calls() - before;
  inverse_qft_all(state);
  auto dist = outcome_distribution(state);

  std::vector<std::size_t> raw;
  if (options.readout == Readout::statevector) {
    raw = dist.argmax();
  } else {
    std::mt19937_64 rng(options.seed);
    raw = dist.sample(rng);
  }
  std::vector<double> decoded(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) decoded[i] = plan.decode(raw[i]);
  const double p = dist.probability(raw);
  return GradientEstimate{std::move(raw), std::move(decoded), p,      queries,         plan,
                          options.readout, window,            std::move(state), std::move(dist)};
}

/// Global phase of the post-QFT state at the reported outcome, in [0, 2*pi).
inline double phase_of(const GradientEstimate& run) {
  if (run.readout != Readout::statevector) throw Error("phase_of is defined for statevector runs only");
  const auto& layout = run.state.layout();
  const double a = std::arg(run.state[layout.flatten(run.raw)]);
  return a < 0.0 ? a + 2.0 * std::numbers::pi : a;
}

/// Expected register readout for a known gradient.
inline std::vector<std::size_t> expected_outcome(std::span<const double> gradient, const PrecisionPlan& plan) {
  std::vector<std::size_t> out(gradient.size());
  for (std::size_t i = 0; i < gradient.size(); ++i) out[i] = plan.encode(gradient[i]);
  return out;
}

}  // namespace qprop
