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

// Dense multi-register statevector engine.
//
// A RegisterArray holds d registers of n qubits each, N = 2^n basis states per
// register, N^d amplitudes in total. The flat index of the integer vector
// (k_1, ..., k_d) is k_1 * N^(d-1) + ... + k_d, i.e. k_1 is the most
// significant block. Phases handed to apply_diagonal_phase are in turns
// (multiples of 2*pi).

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "qprop/errors.hpp"

namespace qprop {

using Complex = std::complex<double>;

inline constexpr std::size_t kDefaultDimensionCap = std::size_t{1} << 26;

/// Shape of a register array: d registers of n qubits.
class RegisterLayout {
 public:
  RegisterLayout(int registers, int qubits_per_register,
                 std::size_t dimension_cap = kDefaultDimensionCap)
      : d_(registers), n_(qubits_per_register) {
    if (d_ < 1 || n_ < 1) throw ConfigError("register layout needs d >= 1 and n >= 1");
    if (static_cast<long>(n_) * d_ > 62 ||
        (std::size_t{1} << (static_cast<std::size_t>(n_) * d_)) > dimension_cap) {
      throw CapacityError("state dimension 2^" + std::to_string(n_ * d_) +
                          " exceeds the cap of " + std::to_string(dimension_cap));
    }
  }

  int registers() const { return d_; }
  int qubits() const { return n_; }
  std::size_t points() const { return std::size_t{1} << n_; }
  std::size_t dimension() const { return std::size_t{1} << (static_cast<std::size_t>(n_) * d_); }

  /// Stride of register i in the flat index (register 0 is most significant).
  std::size_t stride(int i) const {
    return std::size_t{1} << (static_cast<std::size_t>(n_) * static_cast<std::size_t>(d_ - 1 - i));
  }

  std::vector<std::size_t> unflatten(std::size_t flat) const {
    std::vector<std::size_t> k(static_cast<std::size_t>(d_));
    const std::size_t mask = points() - 1;
    for (int i = d_ - 1; i >= 0; --i) {
      k[static_cast<std::size_t>(i)] = flat & mask;
      flat >>= n_;
    }
    return k;
  }

  std::size_t flatten(std::span<const std::size_t> k) const {
    std::size_t flat = 0;
    for (std::size_t v : k) flat = (flat << n_) | v;
    return flat;
  }

  friend bool operator==(const RegisterLayout& a, const RegisterLayout& b) {
    return a.d_ == b.d_ && a.n_ == b.n_;
  }

 private:
  int d_;
  int n_;
};

/// Amplitudes over a RegisterLayout.
class RegisterArray {
 public:
  explicit RegisterArray(const RegisterLayout& layout)
      : layout_(layout), amplitudes_(layout.dimension(), Complex{0.0, 0.0}) {}

  RegisterArray(const RegisterLayout& layout, std::vector<Complex> amplitudes)
      : layout_(layout), amplitudes_(std::move(amplitudes)) {
    if (amplitudes_.size() != layout_.dimension()) {
      throw ConfigError("amplitude vector does not match the register layout");
    }
  }

  const RegisterLayout& layout() const { return layout_; }
  std::span<Complex> amplitudes() { return amplitudes_; }
  std::span<const Complex> amplitudes() const { return amplitudes_; }
  Complex& operator[](std::size_t i) { return amplitudes_[i]; }
  const Complex& operator[](std::size_t i) const { return amplitudes_[i]; }
  std::size_t size() const { return amplitudes_.size(); }

  double norm_squared() const {
    double s = 0.0;
    for (const auto& a : amplitudes_) s += std::norm(a);
    return s;
  }

 private:
  RegisterLayout layout_;
  std::vector<Complex> amplitudes_;
};

/// Basis state |k> for a flat index.
inline RegisterArray basis_state(const RegisterLayout& layout, std::size_t flat) {
  RegisterArray state(layout);
  state[flat] = 1.0;
  return state;
}

inline RegisterArray uniform_superposition(const RegisterLayout& layout) {
  RegisterArray state(layout);
  const double amp = 1.0 / std::sqrt(static_cast<double>(layout.dimension()));
  for (auto& a : state.amplitudes()) a = amp;
  return state;
}

/// Multiplies the amplitude at k by exp(2*pi*i*phase(k)), phase in turns.
template <typename PhaseFn>
  requires std::invocable<PhaseFn, std::span<const std::size_t>>
void apply_diagonal_phase(RegisterArray& state, PhaseFn&& phase) {
  const auto& layout = state.layout();
  std::vector<std::size_t> k(static_cast<std::size_t>(layout.registers()), 0);
  for (std::size_t flat = 0; flat < state.size(); ++flat) {
    const double turns = phase(std::span<const std::size_t>(k));
    if (!std::isfinite(turns)) throw NumericError("non-finite phase");
    // Reduce to [0, 1) before scaling so large turn counts keep full precision.
    const double frac = turns - std::floor(turns);
    state[flat] *= std::polar(1.0, 2.0 * std::numbers::pi * frac);
    for (int i = layout.registers() - 1; i >= 0; --i) {
      auto& ki = k[static_cast<std::size_t>(i)];
      if (++ki < layout.points()) break;
      ki = 0;
    }
  }
}

namespace detail {

// In-place radix-2 transform a[y] <- sum_k exp(sign*2*pi*i*k*y/N) a[k] / sqrt(N).
inline void unitary_dft(std::vector<Complex>& a, int sign) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    for (std::size_t s = 0; s < half; ++s) {
      const Complex w = std::polar(1.0, sign * 2.0 * std::numbers::pi *
                                            static_cast<double>(s) / static_cast<double>(len));
      for (std::size_t i = s; i < n; i += len) {
        const Complex u = a[i];
        const Complex v = a[i + half] * w;
        a[i] = u + v;
        a[i + half] = u - v;
      }
    }
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (auto& x : a) x *= scale;
}

inline void transform_register(RegisterArray& state, int reg, int sign) {
  const auto& layout = state.layout();
  const std::size_t N = layout.points();
  const std::size_t stride = layout.stride(reg);
  const std::size_t block = stride * N;
  std::vector<Complex> slice(N);
  for (std::size_t base = 0; base < state.size(); base += block) {
    for (std::size_t off = 0; off < stride; ++off) {
      for (std::size_t k = 0; k < N; ++k) slice[k] = state[base + off + k * stride];
      unitary_dft(slice, sign);
      for (std::size_t k = 0; k < N; ++k) state[base + off + k * stride] = slice[k];
    }
  }
}

}  // namespace detail

/// Per-register inverse QFT: (1/sqrt N) sum_k exp(2*pi*i*k*y/N)|k> -> |y>.
inline void inverse_qft_all(RegisterArray& state) {
  for (int r = 0; r < state.layout().registers(); ++r) detail::transform_register(state, r, -1);
}

/// Per-register forward QFT: |y> -> (1/sqrt N) sum_k exp(2*pi*i*k*y/N)|k>.
inline void forward_qft_all(RegisterArray& state) {
  for (int r = 0; r < state.layout().registers(); ++r) detail::transform_register(state, r, +1);
}

/// Measurement statistics in the computational basis.
class OutcomeDistribution {
 public:
  OutcomeDistribution(const RegisterLayout& layout, std::vector<double> probabilities)
      : layout_(layout), probabilities_(std::move(probabilities)) {}

  const RegisterLayout& layout() const { return layout_; }
  std::span<const double> probabilities() const { return probabilities_; }

  double probability(std::span<const std::size_t> outcome) const {
    return probabilities_[layout_.flatten(outcome)];
  }

  double total() const {
    double s = 0.0;
    for (double p : probabilities_) s += p;
    return s;
  }

  /// Most probable flat index; the lowest index wins ties.
  std::size_t argmax_flat() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < probabilities_.size(); ++i) {
      if (probabilities_[i] > probabilities_[best]) best = i;
    }
    return best;
  }

  std::vector<std::size_t> argmax() const { return layout_.unflatten(argmax_flat()); }

  /// Distribution of register `reg` alone.
  std::vector<double> marginal(int reg) const {
    std::vector<double> m(layout_.points(), 0.0);
    const std::size_t stride = layout_.stride(reg);
    const std::size_t mask = layout_.points() - 1;
    for (std::size_t i = 0; i < probabilities_.size(); ++i) m[(i / stride) & mask] += probabilities_[i];
    return m;
  }

  template <typename Rng>
  std::vector<std::size_t> sample(Rng& rng) const {
    std::discrete_distribution<std::size_t> pick(probabilities_.begin(), probabilities_.end());
    return layout_.unflatten(pick(rng));
  }

  /// `draws` samples, returned as flat indices.
  template <typename Rng>
  std::vector<std::size_t> sample_flat(Rng& rng, std::size_t draws) const {
    std::discrete_distribution<std::size_t> pick(probabilities_.begin(), probabilities_.end());
    std::vector<std::size_t> out(draws);
    for (auto& o : out) o = pick(rng);
    return out;
  }

 private:
  RegisterLayout layout_;
  std::vector<double> probabilities_;
};

inline OutcomeDistribution outcome_distribution(const RegisterArray& state) {
  std::vector<double> p(state.size());
  for (std::size_t i = 0; i < state.size(); ++i) p[i] = std::norm(state[i]);
  return OutcomeDistribution(state.layout(), std::move(p));
}

/// Writes "index,re,im" rows for debugging.
template <typename Stream>
void dump_amplitudes_csv(const RegisterArray& state, Stream& out) {
  out << "index,re,im\n";
  for (std::size_t i = 0; i < state.size(); ++i) {
    out << i << ',' << state[i].real() << ',' << state[i].imag() << '\n';
  }
}

}  // namespace qprop
