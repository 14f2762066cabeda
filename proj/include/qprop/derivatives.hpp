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

// Higher derivatives by recursing the gradient algorithm.
//
// The phase-clean gradient black box maps nu to |N/m * dE/dmu at nu> with two
// oracle calls: the gradient pass itself and one energy call at nu that
// cancels the energy part of the global phase. The gradient part of the
// phase, -pi * y for readout y, is cancelled by a register-conditional phase
// and costs nothing. Feeding that box to the gradient algorithm gives the
// Hessian for two calls; each further order doubles the count, 2^(r-1) calls
// for order r, independent of the dimension.
//
// Two simulation modes:
//   idealized  the inner box is an exact phase-clean unit returning the
//              analytic derivative rounded to its level's readout grid; the
//              top level is a full statevector run. Any d.
//   nested     every level is simulated as a unitary (d = 1, r <= 3). Inner
//              registers are returned to |0> after the kickback by the
//              inverse of the phase-clean box; these cleanup passes are
//              reported separately and are not part of the query count.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <limits>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qprop/errors.hpp"
#include "qprop/gradient.hpp"
#include "qprop/oracles.hpp"
#include "qprop/qstate.hpp"
#include "qprop/tensor.hpp"

namespace qprop {

enum class DerivativeMode { idealized, nested };

inline const char* to_string(DerivativeMode m) { return m == DerivativeMode::idealized ? "idealized" : "nested"; }

struct DerivativeOptions {
  DerivativeMode mode = DerivativeMode::idealized;
  /// Cancel the global phase of every inner box. Disabling it is only
  /// meaningful in nested mode.
  bool uncompute = true;
  std::size_t dimension_cap = kDefaultDimensionCap;
};

/// Decoded order-r derivative tensor.
struct DerivativeTensor {
  Tensor tensor;
  double scale = 0.0;  // m_r
  std::uint64_t queries = 0;
  std::vector<std::size_t> raw;  // register readout per tensor entry
  /// One outer estimation per component of the order-(r-1) input.
  std::vector<double> component_probabilities;
  std::vector<double> component_phases;
  std::vector<std::vector<double>> component_marginals;  // per component, per register
  double success_probability = 0.0;                       // product over components
  std::uint64_t cleanup_passes = 0;
  DerivativeMode mode = DerivativeMode::idealized;

  int order() const { return tensor.order; }
};

namespace detail {

// Structural query bookkeeping: every distinct path through the recursion is
// one coherent application shared by all superposed branches.
class QueryBook {
 public:
  QueryBook(const EnergyOracle& oracle, std::optional<QuantizedOracle> quantized)
      : oracle_(oracle), quantized_(std::move(quantized)) {}

  const EnergyQuery& counted(const std::string& path) {
    auto it = queries_.find(path);
    if (it != queries_.end()) return it->second;
    auto q = quantized_ ? quantized_->coherent_query() : oracle_.coherent_query();
    return queries_.emplace(path, std::move(q)).first->second;
  }

  const EnergyQuery& cleanup(const std::string& path) {
    cleanup_paths_.insert(path);
    auto it = uncounted_.find(path);
    if (it != uncounted_.end()) return it->second;
    EnergyQuery q = quantized_ ? EnergyQuery([qo = *quantized_](std::span<const double> mu) {
                                   return qo.quantize_value(qo.inner().peek(mu));
                                 })
                               : EnergyQuery([o = oracle_](std::span<const double> mu) { return o.peek(mu); });
    return uncounted_.emplace(path, std::move(q)).first->second;
  }

  void note_cleanup(const std::string& path) { cleanup_paths_.insert(path); }
  std::uint64_t cleanup_passes() const { return cleanup_paths_.size(); }

 private:
  EnergyOracle oracle_;
  std::optional<QuantizedOracle> quantized_;
  std::map<std::string, EnergyQuery> queries_;
  std::map<std::string, EnergyQuery> uncounted_;
  std::set<std::string> cleanup_paths_;
};

using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline Complex turns(double t) {
  const double frac = t - std::floor(t);
  return std::polar(1.0, 2.0 * std::numbers::pi * frac);
}

// Single-axis nested circuit. levels[0] is the energy level.
class NestedCircuit {
 public:
  NestedCircuit(const EnergyOracle& oracle, std::vector<PrecisionPlan> levels, bool uncompute, QueryBook& book)
      : levels_(std::move(levels)), uncompute_(uncompute), book_(book) {
    (void)oracle;
  }

  /// Column 0 of the top-level gradient pass of order levels.size().
  Vector top_state(double center) {
    const int r = static_cast<int>(levels_.size());
    const auto& top = levels_.back();
    const std::size_t N = top.points();
    const std::size_t L = lower_dim(r);
    std::vector<Vector> blocks(N);
    for (std::size_t k = 0; k < N; ++k) {
      const double mu = grid(top, center, k);
      Vector e0 = Vector::Zero(static_cast<Eigen::Index>(L));
      e0(0) = 1.0;
      blocks[k] = controlled(r, mu, false, "") * e0;
    }
    Vector out(static_cast<Eigen::Index>(N * L));
    for (std::size_t y = 0; y < N; ++y) {
      Vector acc = Vector::Zero(static_cast<Eigen::Index>(L));
      for (std::size_t k = 0; k < N; ++k) acc += turns(-static_cast<double>(k * y) / N) * blocks[k];
      out.segment(static_cast<Eigen::Index>(y * L), static_cast<Eigen::Index>(L)) = acc / static_cast<double>(N);
    }
    return out;
  }

  /// Full unitary of the level-j box at nu. `clean` forces uncomputation.
  Matrix box(int j, double nu, bool clean, const std::string& path) {
    const bool cancel = clean || uncompute_;
    Matrix jm = jordan(j, nu, clean, path + "J");
    if (!cancel) return jm;
    const auto& plan = levels_[static_cast<std::size_t>(j - 1)];
    const std::size_t N = plan.points();
    const std::size_t L = lower_dim(j);
    // Energy part: minus the level-j phase of f_{j-1}(nu).
    Matrix lower;
    if (j == 1) {
      const auto& q = clean ? book_.cleanup(path + "U") : book_.counted(path + "U");
      const double factor = static_cast<double>(N) / (plan.width * plan.scale);
      const std::array<double, 1> at{nu};
      lower = Matrix::Constant(1, 1, turns(-factor * q(at)));
    } else {
      lower = kickback(j, nu, clean, path + "U", -1.0);
    }
    for (std::size_t y = 0; y < N; ++y) {
      const Complex cond = turns(0.5 * static_cast<double>(y));  // exp(i*pi*y)
      for (std::size_t yp = 0; yp < N; ++yp) {
        auto blk = jm.block(static_cast<Eigen::Index>(y * L), static_cast<Eigen::Index>(yp * L),
                            static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(L));
        blk = cond * (lower * blk).eval();
      }
    }
    return jm;
  }

  std::size_t lower_dim(int j) const {
    std::size_t L = 1;
    for (int i = 0; i < j - 1; ++i) L *= levels_[static_cast<std::size_t>(i)].points();
    return L;
  }

 private:
  static double grid(const PrecisionPlan& p, double center, std::size_t k) {
    const double N = static_cast<double>(p.points());
    return center + p.width * (static_cast<double>(k) - N / 2.0) / N;
  }

  Complex phase_leaf(int j, double mu, bool clean, const std::string& path) {
    const auto& plan = levels_[static_cast<std::size_t>(j - 1)];
    const double factor = static_cast<double>(plan.points()) / (plan.width * plan.scale);
    const std::array<double, 1> at{mu};
    const auto& q = clean ? book_.cleanup(path + "J") : book_.counted(path + "J");
    return turns(factor * q(at));
  }

  // Lower-register operator applied for branch mu of level j: compute the
  // level-(j-1) box, kick its readout back into a phase with the given sign,
  // clean the registers up again.
  Matrix kickback(int j, double mu, bool clean, const std::string& path, double sign) {
    const auto& plan = levels_[static_cast<std::size_t>(j - 1)];
    const auto& inner_plan = levels_[static_cast<std::size_t>(j - 2)];
    const Matrix compute = box(j - 1, mu, clean, path);
    Matrix cleanup;
    if (uncompute_ || clean) {
      cleanup = compute;
      book_.note_cleanup("C" + path);
    } else {
      cleanup = box(j - 1, mu, true, "C" + path);
    }
    const std::size_t L = lower_dim(j);
    const std::size_t stride = lower_dim(j - 1);
    const double factor = static_cast<double>(plan.points()) / (plan.width * plan.scale);
    Vector diag(static_cast<Eigen::Index>(L));
    for (std::size_t l = 0; l < L; ++l) diag(static_cast<Eigen::Index>(l)) = turns(sign * factor * inner_plan.decode(l / stride));
    return cleanup.adjoint() * diag.asDiagonal() * compute;
  }

  Matrix controlled(int j, double mu, bool clean, const std::string& path) {
    if (j == 1) return Matrix::Constant(1, 1, phase_leaf(1, mu, clean, path));
    return kickback(j, mu, clean, path, 1.0);
  }

  // Inverse QFT . blockdiag(C_k) . QFT on the level-j register.
  Matrix jordan(int j, double nu, bool clean, const std::string& path) {
    const auto& plan = levels_[static_cast<std::size_t>(j - 1)];
    const std::size_t N = plan.points();
    const std::size_t L = lower_dim(j);
    std::vector<Matrix> blocks(N);
    for (std::size_t k = 0; k < N; ++k) {
      const double mu = grid(plan, nu, k);
      blocks[k] = j == 1 ? Matrix::Constant(1, 1, phase_leaf(1, mu, clean, path.substr(0, path.size() - 1)))
                         : kickback(j, mu, clean, path, 1.0);
    }
    // Block (y, y') depends on (y - y') mod N only.
    std::vector<Matrix> diff(N, Matrix::Zero(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(L)));
    for (std::size_t s = 0; s < N; ++s) {
      for (std::size_t k = 0; k < N; ++k) diff[s] += turns(-static_cast<double>(k * s) / N) * blocks[k];
      diff[s] /= static_cast<double>(N);
    }
    Matrix out(static_cast<Eigen::Index>(N * L), static_cast<Eigen::Index>(N * L));
    for (std::size_t y = 0; y < N; ++y) {
      for (std::size_t yp = 0; yp < N; ++yp) {
        out.block(static_cast<Eigen::Index>(y * L), static_cast<Eigen::Index>(yp * L), static_cast<Eigen::Index>(L),
                  static_cast<Eigen::Index>(L)) = diff[(y + N - yp) % N];
      }
    }
    return out;
  }

  std::vector<PrecisionPlan> levels_;
  bool uncompute_;
  QueryBook& book_;
};

// All level-1 sample points touched by a nested run.
inline void collect_points(const std::vector<PrecisionPlan>& levels, std::size_t level, double center,
                           std::vector<double>& out) {
  const auto& p = levels[level];
  const double N = static_cast<double>(p.points());
  for (std::size_t k = 0; k < p.points(); ++k) {
    const double mu = center + p.width * (static_cast<double>(k) - N / 2.0) / N;
    if (level == 0) {
      out.push_back(mu);
    } else {
      collect_points(levels, level - 1, mu, out);
    }
  }
}

inline std::optional<QuantizedOracle> nested_quantizer(const EnergyOracle& oracle,
                                                       const std::vector<PrecisionPlan>& levels, double center) {
  const auto& energy_level = levels.front();
  if (!energy_level.quantize_energy) return std::nullopt;
  EnergyBounds window;
  if (oracle.energy_bounds()) {
    window = *oracle.energy_bounds();
  } else {
    std::vector<double> pts;
    collect_points(levels, levels.size() - 1, center, pts);
    window = {std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (double x : pts) {
      const std::array<double, 1> at{x};
      const double e = oracle.peek(at);
      window.min = std::min(window.min, e);
      window.max = std::max(window.max, e);
    }
  }
  return QuantizedOracle(oracle.with_energy_bounds(window), energy_level.energy_bits);
}

// Opens the 2^(r-1) structural coherent queries of an order-r estimate.
inline void charge_structure(QueryBook& book, int level, const std::string& path) {
  if (level == 1) {
    book.counted(path + "J");
    return;
  }
  charge_structure(book, level - 1, path + "J");
  charge_structure(book, level - 1, path + "U");
}

inline void check_levels(const EnergyOracle& oracle, const PerturbationDomain& domain,
                         const std::vector<PrecisionPlan>& levels, int order) {
  if (order < 1) throw ConfigError("derivative order must be >= 1");
  if (levels.size() < static_cast<std::size_t>(order)) {
    throw ConfigError("need one precision plan per level, got " + std::to_string(levels.size()) + " for order " +
                      std::to_string(order));
  }
  for (const auto& p : levels) p.validate();
  if (domain.dim() != oracle.dim()) throw ConfigError("domain dimension does not match the oracle");
  const auto& top = levels[static_cast<std::size_t>(order - 1)];
  if (std::abs(domain.h - top.width) > 1e-12 * std::max(1.0, top.width)) {
    throw ConfigError("domain width h differs from the top-level plan width");
  }
}

inline DerivativeTensor from_gradient(const GradientEstimate& g) {
  DerivativeTensor t;
  t.tensor = Tensor(1, g.decoded.size());
  t.tensor.entries = g.decoded;
  t.scale = g.plan.scale;
  t.queries = g.queries;
  t.raw = g.raw;
  for (std::size_t i = 0; i < g.raw.size(); ++i) t.component_marginals.push_back(g.distribution.marginal(static_cast<int>(i)));
  t.component_probabilities = {g.success_probability};
  t.component_phases = {phase_of(g)};
  t.success_probability = g.success_probability;
  return t;
}

}  // namespace detail

/// Phase-clean gradient subroutine: two oracle calls per application.
class GradientBlackBox {
 public:
  struct Output {
    std::vector<std::size_t> raw;
    std::vector<double> decoded;
    double probability = 1.0;     // of the reported readout
    double residual_phase = 0.0;  // global phase left on the readout, in (-pi, pi]
    std::uint64_t queries = 0;
  };

  GradientBlackBox(EnergyOracle oracle, PrecisionPlan plan, DerivativeMode mode, bool uncompute = true)
      : oracle_(std::move(oracle)), plan_(std::move(plan)), mode_(mode), uncompute_(uncompute) {
    plan_.validate();
    if (mode_ == DerivativeMode::nested && oracle_.dim() != 1) {
      throw ConfigError("nested mode is limited to one dimension");
    }
  }

  const PrecisionPlan& plan() const { return plan_; }
  DerivativeMode mode() const { return mode_; }

  Output operator()(std::span<const double> nu) const {
    if (nu.size() != oracle_.dim()) throw ConfigError("center dimension does not match the oracle");
    const auto before = oracle_.calls();
    Output out;
    if (mode_ == DerivativeMode::idealized) {
      detail::QueryBook book(oracle_, std::nullopt);
      book.counted("J");
      const auto g = oracle_.derivative(1, nu);
      if (uncompute_) {
        // The energy at nu is read and its phase cancelled; the net phase is zero.
        (void)book.counted("U")(nu);
      }
      for (double v : g.entries) {
        out.raw.push_back(plan_.encode(v));
        out.decoded.push_back(plan_.decode(out.raw.back()));
      }
    } else {
      const std::vector<PrecisionPlan> levels{plan_};
      auto quantizer = detail::nested_quantizer(oracle_, levels, nu[0]);
      detail::QueryBook book(oracle_, quantizer);
      detail::NestedCircuit circuit(oracle_, levels, uncompute_, book);
      const detail::Matrix u = circuit.box(1, nu[0], false, "");
      const detail::Vector col = u.col(0);
      Eigen::Index best = 0;
      col.cwiseAbs2().maxCoeff(&best);
      out.raw = {static_cast<std::size_t>(best)};
      out.decoded = {plan_.decode(out.raw[0])};
      out.probability = std::norm(col(best));
      out.residual_phase = std::arg(col(best));
    }
    out.queries = oracle_.calls() - before;
    return out;
  }

 private:
  EnergyOracle oracle_;
  PrecisionPlan plan_;
  DerivativeMode mode_;
  bool uncompute_;
};

inline GradientBlackBox gradient_blackbox(const EnergyOracle& oracle, const PrecisionPlan& plan, DerivativeMode mode,
                                          bool uncompute = true) {
  return GradientBlackBox(oracle, plan, mode, uncompute);
}

/// Order-r derivative tensor at domain.center. levels[j] is the plan of
/// level j + 1; levels[r - 1] sets the readout and must match domain.h.
inline DerivativeTensor estimate_derivative(const EnergyOracle& oracle, const PerturbationDomain& domain, int order,
                                            const std::vector<PrecisionPlan>& levels,
                                            const DerivativeOptions& options = {}) {
  detail::check_levels(oracle, domain, levels, order);
  const auto before = oracle.calls();
  const std::vector<PrecisionPlan> used(levels.begin(), levels.begin() + order);
  const auto& top = used.back();

  if (order == 1) {
    GradientOptions go;
    go.dimension_cap = options.dimension_cap;
    auto t = detail::from_gradient(estimate_gradient(oracle, domain, top, go));
    t.mode = options.mode;
    return t;
  }

  DerivativeTensor result;
  result.mode = options.mode;
  result.scale = top.scale;
  const std::size_t d = domain.dim();
  result.tensor = Tensor(order, d);
  result.raw.assign(result.tensor.size(), 0);

  if (options.mode == DerivativeMode::nested) {
    if (d != 1) throw ConfigError("nested mode is limited to one dimension");
    if (order > 3) throw ConfigError("nested mode supports orders up to 3");
    std::size_t total = 1;
    for (const auto& p : used) total *= p.points();
    if (total > 4096) throw CapacityError("nested composite dimension exceeds 4096");
    auto quantizer = detail::nested_quantizer(oracle, used, domain.center[0]);
    detail::QueryBook book(oracle, quantizer);
    detail::NestedCircuit circuit(oracle, used, options.uncompute, book);
    const detail::Vector state = circuit.top_state(domain.center[0]);
    const std::size_t L = circuit.lower_dim(order);
    std::vector<double> marginal(top.points(), 0.0);
    for (std::size_t y = 0; y < top.points(); ++y) {
      for (std::size_t l = 0; l < L; ++l) marginal[y] += std::norm(state(static_cast<Eigen::Index>(y * L + l)));
    }
    const auto best = static_cast<std::size_t>(std::max_element(marginal.begin(), marginal.end()) - marginal.begin());
    result.raw[0] = best;
    result.tensor.entries[0] = top.decode(best);
    result.component_probabilities = {marginal[best]};
    result.component_phases = {std::arg(state(static_cast<Eigen::Index>(best * L)))};
    result.component_marginals = {marginal};
    result.success_probability = marginal[best];
    result.cleanup_passes = book.cleanup_passes();
    result.queries = oracle.calls() - before;
    return result;
  }

  // Idealized: the order-(r-1) box is exact and phase-clean; charge its
  // structural queries, then run the top level as a statevector per component.
  detail::QueryBook book(oracle, std::nullopt);
  detail::charge_structure(book, order, "");
  const auto& inner = used[used.size() - 2];
  const RegisterLayout layout(static_cast<int>(d), top.bits, options.dimension_cap);
  const std::size_t points = layout.dimension();
  const std::size_t components = Tensor::count(order - 1, d);
  if (components > options.dimension_cap / points) throw CapacityError("idealized phase table exceeds the cap");
  std::vector<double> values(points * components);
  {
    std::vector<std::size_t> k(d, 0);
    for (std::size_t f = 0; f < points; ++f) {
      const auto mu = domain.point(layout.unflatten(f), top.points());
      const auto t = oracle.derivative(order - 1, mu);
      for (std::size_t c = 0; c < components; ++c) values[f * components + c] = inner.decode(inner.encode(t.entries[c]));
    }
  }
  const double factor = static_cast<double>(top.points()) / (top.width * top.scale);
  result.success_probability = 1.0;
  for (std::size_t c = 0; c < components; ++c) {
    auto state = uniform_superposition(layout);
    for (std::size_t f = 0; f < points; ++f) state[f] *= detail::turns(factor * values[f * components + c]);
    inverse_qft_all(state);
    const auto dist = outcome_distribution(state);
    const auto best = dist.argmax();
    for (std::size_t i = 0; i < d; ++i) {
      result.raw[c * d + i] = best[i];
      result.tensor.entries[c * d + i] = top.decode(best[i]);
    }
    const double p = dist.probability(best);
    result.component_probabilities.push_back(p);
    result.component_phases.push_back(std::arg(state[layout.flatten(best)]));
    for (std::size_t i = 0; i < d; ++i) result.component_marginals.push_back(dist.marginal(static_cast<int>(i)));
    result.success_probability *= p;
  }
  result.queries = oracle.calls() - before;
  return result;
}

inline DerivativeTensor estimate_hessian(const EnergyOracle& oracle, const PerturbationDomain& domain,
                                         const std::vector<PrecisionPlan>& levels,
                                         const DerivativeOptions& options = {}) {
  return estimate_derivative(oracle, domain, 2, levels, options);
}

struct AblationReport {
  std::size_t expected_raw = 0;
  double with_uncompute = 0.0;     // probability of the expected readout
  double without_uncompute = 0.0;
  std::size_t with_readout = 0;
  std::size_t without_readout = 0;
  double with_decoded = 0.0;
  double without_decoded = 0.0;
  std::uint64_t with_queries = 0;
  std::uint64_t without_queries = 0;
};

/// Nested d = 1 Hessian with and without inner phase uncomputation.
inline AblationReport uncomputation_ablation(const EnergyOracle& oracle, const PerturbationDomain& domain,
                                             const std::vector<PrecisionPlan>& levels) {
  if (oracle.dim() != 1) throw ConfigError("ablation runs in nested mode, d = 1");
  DerivativeOptions on{DerivativeMode::nested, true};
  DerivativeOptions off{DerivativeMode::nested, false};
  const auto a = estimate_hessian(oracle, domain, levels, on);
  const auto b = estimate_hessian(oracle, domain, levels, off);
  AblationReport r;
  const auto& top = levels[1];
  r.expected_raw = top.encode(oracle.derivative(2, domain.center).entries[0]);
  r.with_uncompute = a.component_marginals[0][r.expected_raw];
  r.without_uncompute = b.component_marginals[0][r.expected_raw];
  r.with_readout = a.raw[0];
  r.without_readout = b.raw[0];
  r.with_decoded = a.tensor.entries[0];
  r.without_decoded = b.tensor.entries[0];
  r.with_queries = a.queries;
  r.without_queries = b.queries;
  return r;
}

}  // namespace qprop
