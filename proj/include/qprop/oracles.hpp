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

// Model energy surfaces standing in for an electronic-structure black box.
//
// An EnergyOracle wraps a model with a validity box, optional declared energy
// and derivative bounds, an optional coordinate shift and a shared call
// counter. Two ways of asking for energies are counted identically:
//
//   oracle(mu)                one classical evaluation, one call
//   oracle.coherent_query()   one coherent application of the phase oracle to
//                             a whole superposition, one call, after which the
//                             returned EnergyQuery may be evaluated at every
//                             branch point for free
//
// Ground-truth derivatives (derivative()) and peek() are never counted; they
// exist for tests, diagnostics and bound declarations.

#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qprop/errors.hpp"
#include "qprop/tensor.hpp"

namespace qprop {

/// Axis-aligned box; empty lo/hi means unbounded.
struct Box {
  std::vector<double> lo;
  std::vector<double> hi;

  bool bounded() const { return !lo.empty(); }

  bool contains(std::span<const double> x) const {
    if (!bounded()) return true;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!(x[i] >= lo[i] && x[i] <= hi[i])) return false;
    }
    return true;
  }

  /// Largest |x_i - c_i| over the box along axis i.
  double reach(std::size_t i, double c) const {
    if (!bounded()) return std::numeric_limits<double>::infinity();
    return std::max(std::abs(lo[i] - c), std::abs(hi[i] - c));
  }

  Box translated(std::span<const double> by) const {
    if (!bounded()) return *this;
    Box b = *this;
    for (std::size_t i = 0; i < by.size(); ++i) {
      b.lo[i] += by[i];
      b.hi[i] += by[i];
    }
    return b;
  }
};

struct EnergyBounds {
  double min = 0.0;
  double max = 0.0;
};

/// Analytic model surface. Implementations are immutable.
class EnergyModel {
 public:
  virtual ~EnergyModel() = default;
  virtual std::string name() const = 0;
  virtual std::size_t dim() const = 0;
  virtual double value(std::span<const double> mu) const = 0;
  /// Exact derivative tensor of the given order (order 0 is the value).
  virtual Tensor derivative(int order, std::span<const double> mu) const = 0;
  /// Bound on the magnitude of every order-r derivative entry over `box`.
  virtual std::optional<double> derivative_bound(int order, const Box& box) const = 0;
  /// Whether `mu` lies in the model's natural domain (e.g. r > 0).
  virtual bool admissible(std::span<const double>) const { return true; }
};

/// One coherent oracle application, evaluable at any number of branch points.
class EnergyQuery {
 public:
  explicit EnergyQuery(std::function<double(std::span<const double>)> eval)
      : eval_(std::move(eval)) {}
  double operator()(std::span<const double> mu) const { return eval_(mu); }

 private:
  std::function<double(std::span<const double>)> eval_;
};

class EnergyOracle {
 public:
  EnergyOracle(std::shared_ptr<const EnergyModel> model, Box box = {})
      : model_(std::move(model)),
        counter_(std::make_shared<std::atomic<std::uint64_t>>(0)),
        shift_(model_->dim(), 0.0),
        box_(std::move(box)) {
    if (box_.bounded() && (box_.lo.size() != dim() || box_.hi.size() != dim())) {
      throw ConfigError("validity box dimension does not match the model");
    }
  }

  std::size_t dim() const { return model_->dim(); }
  const EnergyModel& model() const { return *model_; }
  std::string name() const { return model_->name(); }

  /// One classical evaluation; counts one call.
  double operator()(std::span<const double> mu) const {
    counter_->fetch_add(1, std::memory_order_relaxed);
    return peek(mu);
  }

  /// One coherent application over a superposition; counts one call.
  EnergyQuery coherent_query() const {
    counter_->fetch_add(1, std::memory_order_relaxed);
    return EnergyQuery([self = *this](std::span<const double> mu) { return self.peek(mu); });
  }

  /// Uncounted evaluation with the same domain checks.
  double peek(std::span<const double> mu) const {
    const auto x = model_point(mu);
    check_domain(x);
    const double e = model_->value(x);
    if (!std::isfinite(e)) throw NumericError(name() + ": non-finite energy");
    return e;
  }

  /// Exact derivative tensor at mu (uncounted ground truth).
  Tensor derivative(int order, std::span<const double> mu) const {
    const auto x = model_point(mu);
    check_domain(x);
    return model_->derivative(order, x);
  }

  std::uint64_t calls() const { return counter_->load(std::memory_order_relaxed); }

  /// Calls since the last reset; resets to zero.
  std::uint64_t reset_and_read_counter() const {
    return counter_->exchange(0, std::memory_order_relaxed);
  }

  /// Oracle whose value at mu is this oracle's value at mu + nu, so sampling
  /// around the origin probes the original surface around nu. Shares the
  /// call counter.
  EnergyOracle shifted(std::span<const double> nu) const {
    if (nu.size() != dim()) throw ConfigError("shift dimension does not match the oracle");
    EnergyOracle out = *this;
    for (std::size_t i = 0; i < nu.size(); ++i) out.shift_[i] += nu[i];
    if (box_.bounded() && !box_.contains(out.shift_)) {
      throw DomainError(name() + ": shifted origin lies outside the validity box");
    }
    return out;
  }

  std::span<const double> shift() const { return shift_; }

  /// Validity box in this oracle's own (shifted) coordinates.
  Box box() const {
    std::vector<double> back(shift_.size());
    for (std::size_t i = 0; i < back.size(); ++i) back[i] = -shift_[i];
    return box_.translated(back);
  }

  const std::optional<EnergyBounds>& energy_bounds() const { return energy_bounds_; }

  EnergyOracle with_energy_bounds(EnergyBounds b) const {
    if (!(b.min <= b.max) || !std::isfinite(b.min) || !std::isfinite(b.max)) {
      throw ConfigError("energy bounds must be finite with min <= max");
    }
    EnergyOracle out = *this;
    out.energy_bounds_ = b;
    return out;
  }

  /// Declared order-r bounds override the model's analytic ones.
  EnergyOracle with_derivative_bounds(std::vector<double> bounds) const {
    for (double b : bounds) {
      if (!(b >= 0.0) || !std::isfinite(b)) throw ConfigError("derivative bounds must be finite and >= 0");
    }
    EnergyOracle out = *this;
    out.declared_derivative_bounds_ = std::move(bounds);
    return out;
  }

  /// Magnitude bound on order-r derivative entries over the validity box.
  std::optional<double> derivative_bound(int order) const {
    if (order >= 1 && static_cast<std::size_t>(order) <= declared_derivative_bounds_.size()) {
      return declared_derivative_bounds_[static_cast<std::size_t>(order - 1)];
    }
    auto b = model_->derivative_bound(order, box_);
    if (b && !std::isfinite(*b)) return std::nullopt;
    return b;
  }

 private:
  std::vector<double> model_point(std::span<const double> mu) const {
    if (mu.size() != dim()) throw ConfigError(name() + ": point dimension does not match the oracle");
    std::vector<double> x(mu.begin(), mu.end());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += shift_[i];
    return x;
  }

  void check_domain(std::span<const double> x) const {
    for (double v : x) {
      if (!std::isfinite(v)) throw NumericError(name() + ": non-finite perturbation");
    }
    if (!box_.contains(x) || !model_->admissible(x)) {
      throw DomainError(name() + ": evaluation outside the validity box");
    }
  }

  std::shared_ptr<const EnergyModel> model_;
  std::shared_ptr<std::atomic<std::uint64_t>> counter_;
  std::vector<double> shift_;
  Box box_;
  std::optional<EnergyBounds> energy_bounds_;
  std::vector<double> declared_derivative_bounds_;
};

inline std::uint64_t reset_and_read_counter(const EnergyOracle& oracle) {
  return oracle.reset_and_read_counter();
}

inline EnergyOracle shifted(const EnergyOracle& oracle, std::span<const double> nu) {
  return oracle.shifted(nu);
}

/// Energy delivered on a 2^bits-level grid over the declared bounds:
/// E_min + round((E - E_min) / step) * step, step = (E_max - E_min) / 2^bits.
class QuantizedOracle {
 public:
  QuantizedOracle(EnergyOracle inner, int energy_bits)
      : inner_(std::move(inner)), bits_(energy_bits) {
    if (bits_ < 1) throw ConfigError("energy bits must be >= 1");
    if (!inner_.energy_bounds()) throw ConfigError(inner_.name() + ": quantization needs energy bounds");
    bounds_ = *inner_.energy_bounds();
    const double range = bounds_.max - bounds_.min;
    if (range > 0.0) {
      step_ = std::ldexp(range, -bits_);
      if (!(step_ > 0.0) || !std::isnormal(step_) || step_ <= range * std::numeric_limits<double>::epsilon()) {
        throw NumericError("quantization step underflows at " + std::to_string(bits_) + " energy bits");
      }
    }
  }

  std::size_t dim() const { return inner_.dim(); }
  const EnergyOracle& inner() const { return inner_; }
  int energy_bits() const { return bits_; }
  double step() const { return step_; }
  const EnergyBounds& bounds() const { return bounds_; }

  double operator()(std::span<const double> mu) const { return quantize_value(inner_(mu)); }

  EnergyQuery coherent_query() const {
    auto q = inner_.coherent_query();
    return EnergyQuery([q, self = *this](std::span<const double> mu) { return self.quantize_value(q(mu)); });
  }

  double quantize_value(double e) const {
    const double slack = 1e-12 * std::max(1.0, std::abs(bounds_.max - bounds_.min));
    if (e < bounds_.min - slack || e > bounds_.max + slack) {
      throw DomainError(inner_.name() + ": energy outside the declared bounds");
    }
    if (step_ == 0.0) return e;
    return bounds_.min + std::nearbyint((e - bounds_.min) / step_) * step_;
  }

 private:
  EnergyOracle inner_;
  int bits_;
  EnergyBounds bounds_{};
  double step_ = 0.0;
};

inline QuantizedOracle quantize(const EnergyOracle& oracle, int energy_bits) {
  return QuantizedOracle(oracle, energy_bits);
}

namespace models {

namespace detail {

// Fills every entry of an order-r tensor from a per-index functor.
template <typename F>
Tensor build(int order, std::size_t dim, F&& entry) {
  Tensor t(order, dim);
  for (std::size_t f = 0; f < t.size(); ++f) t.entries[f] = entry(t.unflatten(f));
  return t;
}

inline double rising(double p, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= p + i;
  return r;
}

inline double falling(int j, int r) {
  double v = 1.0;
  for (int i = 0; i < r; ++i) v *= j - i;
  return v;
}

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace detail

class Constant final : public EnergyModel {
 public:
  Constant(std::size_t dim, double value) : dim_(dim), value_(value) {
    detail::require(dim >= 1, "constant: dimension must be >= 1");
  }
  std::string name() const override { return "constant"; }
  std::size_t dim() const override { return dim_; }
  double value(std::span<const double>) const override { return value_; }
  Tensor derivative(int order, std::span<const double>) const override {
    Tensor t(order, dim_);
    if (order == 0) t.entries[0] = value_;
    return t;
  }
  std::optional<double> derivative_bound(int order, const Box&) const override {
    return order == 0 ? std::abs(value_) : 0.0;
  }

 private:
  std::size_t dim_;
  double value_;
};

/// E = c + g . mu
class Linear final : public EnergyModel {
 public:
  Linear(std::vector<double> g, double c) : g_(std::move(g)), c_(c) {
    detail::require(!g_.empty(), "linear: g must be non-empty");
  }
  std::string name() const override { return "linear"; }
  std::size_t dim() const override { return g_.size(); }
  double value(std::span<const double> mu) const override {
    double e = c_;
    for (std::size_t i = 0; i < g_.size(); ++i) e += g_[i] * mu[i];
    return e;
  }
  Tensor derivative(int order, std::span<const double> mu) const override {
    Tensor t(order, dim());
    if (order == 0) t.entries[0] = value(mu);
    if (order == 1) t.entries = g_;
    return t;
  }
  std::optional<double> derivative_bound(int order, const Box& box) const override {
    if (order == 1) {
      double m = 0.0;
      for (double v : g_) m = std::max(m, std::abs(v));
      return m;
    }
    if (order >= 2) return 0.0;
    double m = std::abs(c_);
    for (std::size_t i = 0; i < g_.size(); ++i) m += std::abs(g_[i]) * box.reach(i, 0.0);
    return m;
  }

 private:
  std::vector<double> g_;
  double c_;
};

/// E = c + g.(mu - x0) + 1/2 (mu - x0)^T A (mu - x0), A symmetric.
class QuadraticForm final : public EnergyModel {
 public:
  QuadraticForm(std::vector<std::vector<double>> a, std::vector<double> center, std::vector<double> g,
                double c)
      : a_(std::move(a)), x0_(std::move(center)), g_(std::move(g)), c_(c) {
    const std::size_t d = a_.size();
    detail::require(d >= 1, "quadratic_form: A must be non-empty");
    for (const auto& row : a_) detail::require(row.size() == d, "quadratic_form: A must be square");
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        detail::require(a_[i][j] == a_[j][i], "quadratic_form: A must be symmetric");
      }
    }
    if (x0_.empty()) x0_.assign(d, 0.0);
    if (g_.empty()) g_.assign(d, 0.0);
    detail::require(x0_.size() == d && g_.size() == d, "quadratic_form: center/g dimension mismatch");
  }
  std::string name() const override { return "quadratic_form"; }
  std::size_t dim() const override { return a_.size(); }
  double value(std::span<const double> mu) const override {
    const auto grad = gradient(mu);
    double e = c_;
    for (std::size_t i = 0; i < dim(); ++i) {
      const double dx = mu[i] - x0_[i];
      e += 0.5 * dx * (grad[i] + g_[i]);
    }
    return e;
  }
  Tensor derivative(int order, std::span<const double> mu) const override {
    Tensor t(order, dim());
    if (order == 0) t.entries[0] = value(mu);
    if (order == 1) t.entries = gradient(mu);
    if (order == 2) {
      for (std::size_t i = 0; i < dim(); ++i)
        for (std::size_t j = 0; j < dim(); ++j) t.entries[i * dim() + j] = a_[i][j];
    }
    return t;
  }
  std::optional<double> derivative_bound(int order, const Box& box) const override {
    if (order == 2) {
      double m = 0.0;
      for (const auto& row : a_)
        for (double v : row) m = std::max(m, std::abs(v));
      return m;
    }
    if (order >= 3) return 0.0;
    if (order == 1) {
      double m = 0.0;
      for (std::size_t i = 0; i < dim(); ++i) {
        double s = std::abs(g_[i]);
        for (std::size_t j = 0; j < dim(); ++j) {
          if (a_[i][j] != 0.0) s += std::abs(a_[i][j]) * box.reach(j, x0_[j]);
        }
        m = std::max(m, s);
      }
      return m;
    }
    return std::nullopt;
  }

 private:
  std::vector<double> gradient(std::span<const double> mu) const {
    std::vector<double> out(g_);
    for (std::size_t i = 0; i < dim(); ++i)
      for (std::size_t j = 0; j < dim(); ++j) out[i] += a_[i][j] * (mu[j] - x0_[j]);
    return out;
  }

  std::vector<std::vector<double>> a_;
  std::vector<double> x0_;
  std::vector<double> g_;
  double c_;
};

/// Molecule in a static field F: E = e0 - dipole.F - 1/2 F^T alpha F, so that
/// dE/dF at zero field is minus the permanent dipole and d2E/dF2 is minus the
/// static polarizability.
class DipoleField final : public EnergyModel {
 public:
  DipoleField(std::vector<double> dipole, std::vector<std::vector<double>> polarizability, double e0)
      : dipole_(std::move(dipole)), alpha_(std::move(polarizability)), e0_(e0) {
    const std::size_t d = dipole_.size();
    detail::require(d >= 1, "dipole_field: dipole must be non-empty");
    if (alpha_.empty()) alpha_.assign(d, std::vector<double>(d, 0.0));
    detail::require(alpha_.size() == d, "dipole_field: polarizability dimension mismatch");
    for (std::size_t i = 0; i < d; ++i) {
      detail::require(alpha_[i].size() == d, "dipole_field: polarizability must be square");
      for (std::size_t j = 0; j < d; ++j)
        detail::require(alpha_[i][j] == alpha_[j][i], "dipole_field: polarizability must be symmetric");
    }
  }
  std::string name() const override { return "dipole_field"; }
  std::size_t dim() const override { return dipole_.size(); }
  double value(std::span<const double> f) const override {
    double e = e0_;
    for (std::size_t i = 0; i < dim(); ++i) {
      e -= dipole_[i] * f[i];
      for (std::size_t j = 0; j < dim(); ++j) e -= 0.5 * f[i] * alpha_[i][j] * f[j];
    }
    return e;
  }
  Tensor derivative(int order, std::span<const double> f) const override {
    Tensor t(order, dim());
    if (order == 0) t.entries[0] = value(f);
    if (order == 1) {
      for (std::size_t i = 0; i < dim(); ++i) {
        double g = -dipole_[i];
        for (std::size_t j = 0; j < dim(); ++j) g -= alpha_[i][j] * f[j];
        t.entries[i] = g;
      }
    }
    if (order == 2) {
      for (std::size_t i = 0; i < dim(); ++i)
        for (std::size_t j = 0; j < dim(); ++j) t.entries[i * dim() + j] = -alpha_[i][j];
    }
    return t;
  }
  std::optional<double> derivative_bound(int order, const Box& box) const override {
    if (order >= 3) return 0.0;
    if (order == 2) {
      double m = 0.0;
      for (const auto& row : alpha_)
        for (double v : row) m = std::max(m, std::abs(v));
      return m;
    }
    if (order == 1) {
      double m = 0.0;
      for (std::size_t i = 0; i < dim(); ++i) {
        double s = std::abs(dipole_[i]);
        for (std::size_t j = 0; j < dim(); ++j) {
          if (alpha_[i][j] != 0.0) s += std::abs(alpha_[i][j]) * box.reach(j, 0.0);
        }
        m = std::max(m, s);
      }
      return m;
    }
    return std::nullopt;
  }

 private:
  std::vector<double> dipole_;
  std::vector<std::vector<double>> alpha_;
  double e0_;
};

/// E = D (1 - exp(-a (R - Re)))^2
class Morse1D final : public EnergyModel {
 public:
  Morse1D(double depth, double a, double re) : depth_(depth), a_(a), re_(re) {
    detail::require(depth > 0.0 && a > 0.0, "morse_1d: D and a must be positive");
  }
  std::string name() const override { return "morse_1d"; }
  std::size_t dim() const override { return 1; }
  double value(std::span<const double> r) const override {
    const double u = 1.0 - std::exp(-a_ * (r[0] - re_));
    return depth_ * u * u;
  }
  Tensor derivative(int order, std::span<const double> r) const override {
    Tensor t(order, 1);
    t.entries[0] = order == 0 ? value(r) : term(order, std::exp(-a_ * (r[0] - re_)));
    return t;
  }
  std::optional<double> derivative_bound(int order, const Box& box) const override {
    if (!box.bounded()) return std::nullopt;
    // The order-r derivative is a quadratic in u = exp(-a (R - Re)).
    const double u_lo = std::exp(-a_ * (box.hi[0] - re_));
    const double u_hi = std::exp(-a_ * (box.lo[0] - re_));
    auto f = [&](double u) { return order == 0 ? depth_ * (1 - u) * (1 - u) : term(order, u); };
    double m = std::max(std::abs(f(u_lo)), std::abs(f(u_hi)));
    const double lin = order == 0 ? -2.0 * depth_ : -2.0 * depth_ * std::pow(-a_, order);
    const double quad = order == 0 ? depth_ : depth_ * std::pow(-2.0 * a_, order);
    const double vertex = -lin / (2.0 * quad);
    if (vertex > u_lo && vertex < u_hi) m = std::max(m, std::abs(f(vertex)));
    return m;
  }

 private:
  double term(int order, double u) const {
    return depth_ * (-2.0 * std::pow(-a_, order) * u + std::pow(-2.0 * a_, order) * u * u);
  }

  double depth_;
  double a_;
  double re_;
};

/// E = 4 eps ((sigma/r)^12 - (sigma/r)^6), r > 0.
class LennardJonesPair final : public EnergyModel {
 public:
  LennardJonesPair(double epsilon, double sigma) : eps_(epsilon), sigma_(sigma) {
    detail::require(epsilon > 0.0 && sigma > 0.0, "lennard_jones_pair: epsilon and sigma must be positive");
  }
  std::string name() const override { return "lennard_jones_pair"; }
  std::size_t dim() const override { return 1; }
  bool admissible(std::span<const double> r) const override { return r[0] > 0.0; }
  double value(std::span<const double> r) const override { return term(0, r[0]); }
  Tensor derivative(int order, std::span<const double> r) const override {
    Tensor t(order, 1);
    t.entries[0] = term(order, r[0]);
    return t;
  }
  std::optional<double> derivative_bound(int order, const Box& box) const override {
    if (!box.bounded() || box.lo[0] <= 0.0) return std::nullopt;
    const double r = box.lo[0];
    return 4.0 * eps_ *
           (std::pow(sigma_, 12) * detail::rising(12, order) * std::pow(r, -12 - order) +
            std::pow(sigma_, 6) * detail::rising(6, order) * std::pow(r, -6 - order));
  }

 private:
  double term(int k, double r) const {
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    return 4.0 * eps_ * sign *
           (std::pow(sigma_, 12) * detail::rising(12, k) * std::pow(r, -12 - k) -
            std::pow(sigma_, 6) * detail::rising(6, k) * std::pow(r, -6 - k));
  }

  double eps_;
  double sigma_;
};

/// E = sum_j c_j x^j
class Polynomial1D final : public EnergyModel {
 public:
  explicit Polynomial1D(std::vector<double> coefficients) : c_(std::move(coefficients)) {
    detail::require(!c_.empty(), "polynomial_1d: coefficients must be non-empty");
  }
  std::string name() const override { return "polynomial_1d"; }
  std::size_t dim() const override { return 1; }
  double value(std::span<const double> x) const override { return term(0, x[0]); }
  Tensor derivative(int order, std::span<const double> x) const override {
    Tensor t(order, 1);
    t.entries[0] = term(order, x[0]);
    return t;
  }
  std::optional<double> derivative_bound(int order, const Box& box) const override {
    const double reach = box.reach(0, 0.0);
    double m = 0.0;
    for (std::size_t j = static_cast<std::size_t>(order); j < c_.size(); ++j) {
      if (c_[j] == 0.0) continue;
      const int p = static_cast<int>(j) - order;
      m += std::abs(c_[j]) * detail::falling(static_cast<int>(j), order) * (p == 0 ? 1.0 : std::pow(reach, p));
    }
    return m;
  }

 private:
  double term(int order, double x) const {
    double e = 0.0;
    for (std::size_t j = c_.size(); j-- > static_cast<std::size_t>(order);) {
      e = e * x + c_[j] * detail::falling(static_cast<int>(j), order);
    }
    return e;
  }

  std::vector<double> c_;
};

/// Mueller-Brown surface with its standard parameters. Derivatives are
/// provided through order 2.
class MuellerBrown2D final : public EnergyModel {
 public:
  std::string name() const override { return "mueller_brown_2d"; }
  std::size_t dim() const override { return 2; }
  double value(std::span<const double> p) const override {
    double e = 0.0;
    for (std::size_t t = 0; t < 4; ++t) e += kA[t] * std::exp(exponent(t, p));
    return e;
  }
  Tensor derivative(int order, std::span<const double> p) const override {
    if (order > 2) throw ConfigError("mueller_brown_2d provides derivatives up to order 2");
    Tensor out(order, 2);
    if (order == 0) {
      out.entries[0] = value(p);
      return out;
    }
    for (std::size_t t = 0; t < 4; ++t) {
      const double dx = p[0] - kX0[t];
      const double dy = p[1] - kY0[t];
      const double w = kA[t] * std::exp(exponent(t, p));
      const double qx = 2.0 * ka[t] * dx + kb[t] * dy;
      const double qy = kb[t] * dx + 2.0 * kc[t] * dy;
      if (order == 1) {
        out.entries[0] += w * qx;
        out.entries[1] += w * qy;
      } else {
        out.entries[0] += w * (qx * qx + 2.0 * ka[t]);
        out.entries[1] += w * (qx * qy + kb[t]);
        out.entries[2] += w * (qx * qy + kb[t]);
        out.entries[3] += w * (qy * qy + 2.0 * kc[t]);
      }
    }
    return out;
  }
  // Not analytic: scans a 201x201 lattice and pads by 10%.
  std::optional<double> derivative_bound(int order, const Box& box) const override {
    if (!box.bounded() || order > 2) return std::nullopt;
    double m = 0.0;
    constexpr int kSteps = 200;
    std::array<double, 2> p{};
    for (int i = 0; i <= kSteps; ++i) {
      p[0] = box.lo[0] + (box.hi[0] - box.lo[0]) * i / kSteps;
      for (int j = 0; j <= kSteps; ++j) {
        p[1] = box.lo[1] + (box.hi[1] - box.lo[1]) * j / kSteps;
        m = std::max(m, derivative(order, p).max_abs());
      }
    }
    return 1.1 * m;
  }

 private:
  static constexpr std::array<double, 4> kA{-200.0, -100.0, -170.0, 15.0};
  static constexpr std::array<double, 4> ka{-1.0, -1.0, -6.5, 0.7};
  static constexpr std::array<double, 4> kb{0.0, 0.0, 11.0, 0.6};
  static constexpr std::array<double, 4> kc{-10.0, -10.0, -6.5, 0.7};
  static constexpr std::array<double, 4> kX0{1.0, 0.0, -0.5, -1.0};
  static constexpr std::array<double, 4> kY0{0.0, 0.5, 1.5, 1.0};

  static double exponent(std::size_t t, std::span<const double> p) {
    const double dx = p[0] - kX0[t];
    const double dy = p[1] - kY0[t];
    return ka[t] * dx * dx + kb[t] * dx * dy + kc[t] * dy * dy;
  }
};

inline EnergyOracle constant(std::size_t dim, double value, Box box = {}) {
  return EnergyOracle(std::make_shared<Constant>(dim, value), std::move(box));
}
inline EnergyOracle linear(std::vector<double> g, double c = 0.0, Box box = {}) {
  return EnergyOracle(std::make_shared<Linear>(std::move(g), c), std::move(box));
}
inline EnergyOracle quadratic_form(std::vector<std::vector<double>> a, std::vector<double> center = {},
                                   std::vector<double> g = {}, double c = 0.0, Box box = {}) {
  return EnergyOracle(std::make_shared<QuadraticForm>(std::move(a), std::move(center), std::move(g), c),
                      std::move(box));
}
inline EnergyOracle dipole_field(std::vector<double> dipole, std::vector<std::vector<double>> alpha = {},
                                 double e0 = 0.0, Box box = {}) {
  return EnergyOracle(std::make_shared<DipoleField>(std::move(dipole), std::move(alpha), e0), std::move(box));
}
inline EnergyOracle morse_1d(double depth, double a, double re, Box box = {}) {
  return EnergyOracle(std::make_shared<Morse1D>(depth, a, re), std::move(box));
}
inline EnergyOracle lennard_jones_pair(double epsilon, double sigma, Box box = {}) {
  return EnergyOracle(std::make_shared<LennardJonesPair>(epsilon, sigma), std::move(box));
}
inline EnergyOracle polynomial_1d(std::vector<double> coefficients, Box box = {}) {
  return EnergyOracle(std::make_shared<Polynomial1D>(std::move(coefficients)), std::move(box));
}
inline EnergyOracle mueller_brown_2d(Box box = {}) {
  return EnergyOracle(std::make_shared<MuellerBrown2D>(), std::move(box));
}

}  // namespace models

namespace detail {

using nlohmann::json;

inline void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                                const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) ==
        allowed.end()) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

inline double number(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  if (!obj.at(key).is_number()) throw ConfigError(where + ": '" + std::string(key) + "' must be a number");
  return obj.at(key).get<double>();
}

inline double number_or(const json& obj, const char* key, double fallback, const std::string& where) {
  return obj.contains(key) ? number(obj, key, where) : fallback;
}

inline std::vector<double> vector_of(const json& v, const std::string& what) {
  if (!v.is_array()) throw ConfigError(what + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw ConfigError(what + " must be an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

inline std::vector<std::vector<double>> matrix_of(const json& v, const std::string& what) {
  if (!v.is_array()) throw ConfigError(what + " must be a matrix");
  std::vector<std::vector<double>> out;
  for (const auto& row : v) out.push_back(vector_of(row, what));
  return out;
}

}  // namespace detail

/// Builds a model oracle by name. Known names: constant, linear,
/// quadratic_form, dipole_field, morse_1d, lennard_jones_pair,
/// mueller_brown_2d, polynomial_1d.
inline EnergyOracle make_model(const std::string& name, const nlohmann::json& params, Box box = {}) {
  using detail::number;
  using detail::number_or;
  using detail::reject_unknown_keys;
  const nlohmann::json p = params.is_null() ? nlohmann::json::object() : params;
  const std::string where = name + " params";
  if (name == "constant") {
    reject_unknown_keys(p, {"value", "dim"}, where);
    return models::constant(static_cast<std::size_t>(number_or(p, "dim", 1, where)), number(p, "value", where),
                            std::move(box));
  }
  if (name == "linear") {
    reject_unknown_keys(p, {"g", "c"}, where);
    if (!p.contains("g")) throw ConfigError(where + ": missing 'g'");
    return models::linear(detail::vector_of(p.at("g"), "linear g"), number_or(p, "c", 0.0, where), std::move(box));
  }
  if (name == "quadratic_form") {
    reject_unknown_keys(p, {"A", "a", "center", "g", "c"}, where);
    std::vector<std::vector<double>> a;
    if (p.contains("A")) {
      a = detail::matrix_of(p.at("A"), "quadratic_form A");
    } else if (p.contains("a")) {
      a = {{number(p, "a", where)}};
    } else {
      throw ConfigError(where + ": missing 'A'");
    }
    return models::quadratic_form(std::move(a),
                                  p.contains("center") ? detail::vector_of(p.at("center"), "center")
                                                       : std::vector<double>{},
                                  p.contains("g") ? detail::vector_of(p.at("g"), "g") : std::vector<double>{},
                                  number_or(p, "c", 0.0, where), std::move(box));
  }
  if (name == "dipole_field") {
    reject_unknown_keys(p, {"dipole", "polarizability", "e0"}, where);
    if (!p.contains("dipole")) throw ConfigError(where + ": missing 'dipole'");
    std::vector<double> dipole = p.at("dipole").is_number() ? std::vector<double>{p.at("dipole").get<double>()}
                                                            : detail::vector_of(p.at("dipole"), "dipole");
    return models::dipole_field(std::move(dipole),
                                p.contains("polarizability")
                                    ? detail::matrix_of(p.at("polarizability"), "polarizability")
                                    : std::vector<std::vector<double>>{},
                                number_or(p, "e0", 0.0, where), std::move(box));
  }
  if (name == "morse_1d") {
    reject_unknown_keys(p, {"D", "a", "re"}, where);
    return models::morse_1d(number_or(p, "D", 1.0, where), number_or(p, "a", 1.0, where),
                            number_or(p, "re", 1.0, where), std::move(box));
  }
  if (name == "lennard_jones_pair") {
    reject_unknown_keys(p, {"epsilon", "sigma"}, where);
    return models::lennard_jones_pair(number_or(p, "epsilon", 1.0, where), number_or(p, "sigma", 1.0, where),
                                      std::move(box));
  }
  if (name == "mueller_brown_2d") {
    reject_unknown_keys(p, {}, where);
    return models::mueller_brown_2d(std::move(box));
  }
  if (name == "polynomial_1d") {
    reject_unknown_keys(p, {"coefficients"}, where);
    if (!p.contains("coefficients")) throw ConfigError(where + ": missing 'coefficients'");
    return models::polynomial_1d(detail::vector_of(p.at("coefficients"), "coefficients"), std::move(box));
  }
  throw ConfigError("unknown model '" + name + "'");
}

/// Oracle from {name, params, bounds, derivative_bounds, box}; bounds is
/// [E_min, E_max], box is {lo: [...], hi: [...]}.
inline EnergyOracle oracle_from_json(const nlohmann::json& doc) {
  detail::reject_unknown_keys(doc, {"name", "params", "bounds", "derivative_bounds", "box"}, "oracle");
  if (!doc.contains("name") || !doc.at("name").is_string()) throw ConfigError("oracle: missing 'name'");
  Box box;
  if (doc.contains("box")) {
    const auto& b = doc.at("box");
    detail::reject_unknown_keys(b, {"lo", "hi"}, "oracle box");
    if (!b.contains("lo") || !b.contains("hi")) throw ConfigError("oracle box: needs 'lo' and 'hi'");
    box.lo = detail::vector_of(b.at("lo"), "box lo");
    box.hi = detail::vector_of(b.at("hi"), "box hi");
    if (box.lo.size() != box.hi.size()) throw ConfigError("oracle box: lo/hi size mismatch");
    for (std::size_t i = 0; i < box.lo.size(); ++i) {
      if (!(box.lo[i] < box.hi[i])) throw ConfigError("oracle box: lo must be below hi");
    }
  }
  auto oracle = make_model(doc.at("name").get<std::string>(), doc.value("params", nlohmann::json::object()),
                           std::move(box));
  if (doc.contains("bounds")) {
    const auto b = detail::vector_of(doc.at("bounds"), "oracle bounds");
    if (b.size() != 2) throw ConfigError("oracle bounds: expected [E_min, E_max]");
    oracle = oracle.with_energy_bounds({b[0], b[1]});
  }
  if (doc.contains("derivative_bounds")) {
    oracle = oracle.with_derivative_bounds(detail::vector_of(doc.at("derivative_bounds"), "derivative_bounds"));
  }
  return oracle;
}

}  // namespace qprop
