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

// Local geometry optimization: Newton with level shift and trust radius,
// 1-D Householder iterations, a gradient-descent baseline, and the
// finite-difference stencils used for classical cost comparison.

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qprop/derivatives.hpp"
#include "qprop/errors.hpp"
#include "qprop/gradient.hpp"
#include "qprop/oracles.hpp"
#include "qprop/tensor.hpp"

namespace qprop {

enum class Method { newton, householder, gradient_descent };
enum class DerivativeSource { quantum, classical_fd, analytic };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::newton: return "newton";
    case Method::householder: return "householder";
    case Method::gradient_descent: return "gradient_descent";
  }
  return "?";
}

inline const char* to_string(DerivativeSource s) {
  switch (s) {
    case DerivativeSource::quantum: return "quantum";
    case DerivativeSource::classical_fd: return "classical_fd";
    case DerivativeSource::analytic: return "analytic";
  }
  return "?";
}

/// Multiples of the largest |H| entry tried in turn until H + lambda*I is
/// positive definite.
inline std::vector<double> default_level_shifts() {
  std::vector<double> s{0.0};
  for (int e = -4; e <= 6; ++e) s.push_back(std::pow(10.0, e));
  return s;
}

struct OptimizerConfig {
  Method method = Method::newton;
  int householder_order = 1;  // l
  int max_iters = 50;
  double tolerance = 1e-8;    // on the gradient norm
  double trust_radius = std::numeric_limits<double>::infinity();
  bool level_shift = true;
  std::vector<double> level_shifts = default_level_shifts();
  /// Halve rejected steps until the energy does not increase. Each check is
  /// one counted energy evaluation, reported apart from derivative queries.
  bool safeguard = false;
  DerivativeSource source = DerivativeSource::analytic;
  double fd_step = 1e-5;
  double descent_rate = 0.1;
  /// Quantum source: plan of level j + 1 at index j; levels[0] doubles as
  /// the gradient plan.
  std::vector<PrecisionPlan> levels;
  std::size_t dimension_cap = kDefaultDimensionCap;

  void validate() const {
    if (!(tolerance > 0.0)) throw ConfigError("optimizer: tolerance must be positive");
    if (max_iters < 1) throw ConfigError("optimizer: max_iters must be >= 1");
    if (!(trust_radius > 0.0)) throw ConfigError("optimizer: trust radius must be positive");
    if (method == Method::householder && (householder_order < 1 || householder_order > 3)) {
      throw ConfigError("optimizer: householder order must be 1, 2 or 3");
    }
    if (!(fd_step > 0.0)) throw ConfigError("optimizer: fd step must be positive");
    if (!(descent_rate > 0.0)) throw ConfigError("optimizer: descent rate must be positive");
    if (level_shifts.empty()) throw ConfigError("optimizer: empty level-shift schedule");
    if (source == DerivativeSource::quantum) {
      const std::size_t need = method == Method::gradient_descent ? 1
                               : method == Method::newton        ? 2
                                                                 : static_cast<std::size_t>(householder_order + 1);
      if (levels.size() < need) {
        throw ConfigError("optimizer: quantum source needs " + std::to_string(need) + " level plans");
      }
    }
    if (source == DerivativeSource::classical_fd && method == Method::householder && householder_order > 1) {
      throw ConfigError("optimizer: finite differences are implemented for orders 1 and 2 only");
    }
  }
};

struct OptimizationTrace {
  std::vector<std::vector<double>> iterates;  // R_0 .. R_n
  std::vector<double> energies;               // uncounted diagnostics
  std::vector<double> gradient_norms;         // as measured by the source
  std::vector<std::uint64_t> iteration_queries;
  std::uint64_t verification_queries = 0;     // final convergence check
  std::uint64_t energy_queries = 0;           // safeguard evaluations
  std::uint64_t total_queries = 0;            // everything counted
  std::vector<double> level_shifts;           // lambda used per iteration
  int iterations = 0;
  bool converged = false;

  std::string csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "iter";
    const std::size_t d = iterates.empty() ? 0 : iterates.front().size();
    for (std::size_t i = 0; i < d; ++i) os << ",R" << i;
    os << ",E,grad_norm,queries\n";
    for (std::size_t it = 0; it < iterates.size(); ++it) {
      os << it;
      for (double v : iterates[it]) os << ',' << v;
      os << ',' << energies[it] << ',' << (it < gradient_norms.size() ? gradient_norms[it] : 0.0) << ','
         << (it < iteration_queries.size() ? iteration_queries[it] : verification_queries) << '\n';
    }
    return os.str();
  }
};

/// Raised when an iterate leaves the oracle's validity box.
class OptimizationDiverged : public DomainError {
 public:
  OptimizationDiverged(const std::string& what, OptimizationTrace trace)
      : DomainError(what), trace_(std::move(trace)) {}
  const OptimizationTrace& trace() const { return trace_; }

 private:
  OptimizationTrace trace_;
};

struct FiniteDifference {
  Tensor tensor;
  std::uint64_t queries = 0;
};

/// Forward differences. Order 1 uses d + 1 evaluations, order 2 uses
/// 1 + d + d(d+1)/2 with H_ij = (E(R+h e_i+h e_j) - E(R+h e_i) - E(R+h e_j) + E(R)) / h^2.
inline FiniteDifference finite_difference(const EnergyOracle& oracle, std::span<const double> at, int order,
                                          double h_fd) {
  if (!(h_fd > 0.0)) throw ConfigError("finite difference step must be positive");
  if (order != 1 && order != 2) throw ConfigError("finite differences are implemented for orders 1 and 2");
  const std::size_t d = oracle.dim();
  if (at.size() != d) throw ConfigError("point dimension does not match the oracle");
  const auto before = oracle.calls();
  std::vector<double> x(at.begin(), at.end());
  const double e0 = oracle(x);
  std::vector<double> ei(d);
  for (std::size_t i = 0; i < d; ++i) {
    x[i] += h_fd;
    ei[i] = oracle(x);
    x[i] = at[i];
  }
  FiniteDifference out;
  out.tensor = Tensor(order, d);
  if (order == 1) {
    for (std::size_t i = 0; i < d; ++i) out.tensor.entries[i] = (ei[i] - e0) / h_fd;
  } else {
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = i; j < d; ++j) {
        x[i] += h_fd;
        x[j] += h_fd;
        const double eij = oracle(x);
        x[i] = at[i];
        x[j] = at[j];
        const double v = (eij - ei[i] - ei[j] + e0) / (h_fd * h_fd);
        out.tensor.entries[i * d + j] = v;
        out.tensor.entries[j * d + i] = v;
      }
    }
  }
  out.queries = oracle.calls() - before;
  return out;
}

struct NewtonStep {
  std::vector<double> step;
  double level_shift = 0.0;
  bool clipped = false;
};

/// Solves (H + lambda I) s = -g with the smallest scheduled lambda that makes
/// the shifted matrix positive definite, then clips |s| to the trust radius.
inline NewtonStep newton_step(std::span<const double> g, const Tensor& hessian, const OptimizerConfig& config) {
  const auto d = static_cast<Eigen::Index>(g.size());
  if (hessian.order != 2 || hessian.dim != g.size()) throw ConfigError("newton_step: shape mismatch");
  Eigen::MatrixXd H(d, d);
  Eigen::VectorXd gv(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    gv(i) = g[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < d; ++j) H(i, j) = hessian.entries[static_cast<std::size_t>(i * d + j)];
  }
  H = 0.5 * (H + H.transpose()).eval();
  const double scale = H.cwiseAbs().maxCoeff() > 0.0 ? H.cwiseAbs().maxCoeff() : 1.0;
  const std::vector<double> schedule = config.level_shift ? config.level_shifts : std::vector<double>{0.0};
  for (double factor : schedule) {
    const double lambda = factor * scale;
    Eigen::MatrixXd shifted = H;
    shifted.diagonal().array() += lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(shifted);
    if (llt.info() != Eigen::Success) continue;
    Eigen::VectorXd s = llt.solve(-gv);
    if (!s.allFinite()) continue;
    NewtonStep out;
    out.level_shift = lambda;
    const double len = s.norm();
    if (len > config.trust_radius) {
      s *= config.trust_radius / len;
      out.clipped = true;
    }
    out.step.assign(s.data(), s.data() + d);
    return out;
  }
  throw OptimizerError("newton_step: no scheduled level shift makes the Hessian positive definite");
}

/// Order-l Householder step for the root of f = E'. derivs holds
/// f, f', ..., f^(l) (that is E', E'', ..., E^(l+1)).
inline double householder_step_1d(std::span<const double> derivs, int order) {
  if (order < 1 || order > 3) throw ConfigError("householder order must be 1, 2 or 3");
  if (derivs.size() < static_cast<std::size_t>(order + 1)) {
    throw ConfigError("householder order " + std::to_string(order) + " needs derivatives up to E^(" +
                      std::to_string(order + 1) + ")");
  }
  const double f = derivs[0];
  const double f1 = derivs[1];
  if (f1 == 0.0 || !std::isfinite(f1)) throw OptimizerError("householder: vanishing second derivative");
  double num = 0.0;
  double den = 0.0;
  switch (order) {
    case 1:
      num = -f;
      den = f1;
      break;
    case 2:
      num = -2.0 * f * f1;
      den = 2.0 * f1 * f1 - f * derivs[2];
      break;
    default: {
      const double f2 = derivs[2];
      const double f3 = derivs[3];
      num = -f * (6.0 * f1 * f1 - 3.0 * f * f2);
      den = 6.0 * f1 * f1 * f1 - 6.0 * f * f1 * f2 + f * f * f3;
    }
  }
  if (den == 0.0 || !std::isfinite(den)) throw OptimizerError("householder: singular denominator");
  return num / den;
}

/// Quantum charge of one order-l Householder iteration: sum of 2^(k-1) over
/// derivative orders k = 1..l+1.
constexpr std::uint64_t householder_charge(int order) { return (std::uint64_t{1} << (order + 1)) - 1; }

namespace detail {

class DerivativeSourceRunner {
 public:
  DerivativeSourceRunner(const EnergyOracle& oracle, const OptimizerConfig& config)
      : oracle_(oracle), config_(config) {}

  Tensor derivative(int order, std::span<const double> at) const {
    switch (config_.source) {
      case DerivativeSource::analytic: return oracle_.derivative(order, at);
      case DerivativeSource::classical_fd: return finite_difference(oracle_, at, order, config_.fd_step).tensor;
      case DerivativeSource::quantum: {
        const auto& top = config_.levels[static_cast<std::size_t>(order - 1)];
        const PerturbationDomain domain(std::vector<double>(at.begin(), at.end()), top.width);
        DerivativeOptions opts;
        opts.dimension_cap = config_.dimension_cap;
        return estimate_derivative(oracle_, domain, order, config_.levels, opts).tensor;
      }
    }
    throw Error("unknown derivative source");
  }

 private:
  const EnergyOracle& oracle_;
  const OptimizerConfig& config_;
};

inline double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace detail

/// Runs the configured local optimizer from `start`. Each iteration measures
/// the gradient; below tolerance the run stops (that measurement is the
/// verification query), otherwise the higher derivatives are measured and a
/// step is taken.
inline OptimizationTrace minimize(const EnergyOracle& oracle, std::span<const double> start,
                                  const OptimizerConfig& config) {
  config.validate();
  const std::size_t d = oracle.dim();
  if (start.size() != d) throw ConfigError("start point dimension does not match the oracle");
  if (config.method == Method::householder && d != 1) throw ConfigError("householder is implemented in 1-D only");

  const detail::DerivativeSourceRunner source(oracle, config);
  const Box box = oracle.box();
  OptimizationTrace trace;
  std::vector<double> R(start.begin(), start.end());
  if (!box.contains(R)) throw DomainError("start point lies outside the validity box");
  trace.iterates.push_back(R);
  trace.energies.push_back(oracle.peek(R));

  const auto run_start = oracle.calls();
  for (int it = 0;; ++it) {
    const auto before = oracle.calls();
    const Tensor g = source.derivative(1, R);
    const double gnorm = detail::norm(g.entries);
    trace.gradient_norms.push_back(gnorm);
    if (gnorm < config.tolerance || it == config.max_iters) {
      trace.verification_queries = oracle.calls() - before;
      trace.converged = gnorm < config.tolerance;
      break;
    }

    std::vector<double> step(d, 0.0);
    double lambda = 0.0;
    switch (config.method) {
      case Method::newton: {
        const Tensor H = source.derivative(2, R);
        auto s = newton_step(g.entries, H, config);
        step = std::move(s.step);
        lambda = s.level_shift;
        break;
      }
      case Method::householder: {
        std::vector<double> derivs{g.entries[0]};
        for (int k = 2; k <= config.householder_order + 1; ++k) derivs.push_back(source.derivative(k, R).entries[0]);
        step[0] = householder_step_1d(derivs, config.householder_order);
        if (std::abs(step[0]) > config.trust_radius) step[0] = std::copysign(config.trust_radius, step[0]);
        break;
      }
      case Method::gradient_descent: {
        for (std::size_t i = 0; i < d; ++i) step[i] = -config.descent_rate * g.entries[i];
        const double len = detail::norm(step);
        if (len > config.trust_radius) {
          for (double& s : step) s *= config.trust_radius / len;
        }
        break;
      }
    }
    trace.iteration_queries.push_back(oracle.calls() - before);
    trace.level_shifts.push_back(lambda);

    std::vector<double> next(d);
    for (std::size_t i = 0; i < d; ++i) next[i] = R[i] + step[i];
    if (config.safeguard) {
      const auto e_before = oracle.calls();
      const double e_here = oracle(R);
      // Increases at the level of rounding noise are accepted.
      const double noise = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(e_here));
      for (int halving = 0; halving < 40; ++halving) {
        if (box.contains(next) && oracle(next) <= e_here + noise) break;
        for (std::size_t i = 0; i < d; ++i) {
          step[i] *= 0.5;
          next[i] = R[i] + step[i];
        }
      }
      trace.energy_queries += oracle.calls() - e_before;
    }
    if (!box.contains(next)) {
      trace.total_queries = oracle.calls() - run_start;
      throw OptimizationDiverged("iterate left the validity box at iteration " + std::to_string(it + 1),
                                 std::move(trace));
    }
    R = std::move(next);
    trace.iterates.push_back(R);
    trace.energies.push_back(oracle.peek(R));
    trace.iterations = it + 1;
  }
  trace.total_queries = oracle.calls() - run_start;
  return trace;
}

/// Observed convergence order from the last three errors above `floor`.
inline double observed_order(std::span<const double> errors, double floor = 1e-14) {
  std::vector<double> e;
  for (double v : errors) {
    if (std::abs(v) > floor) e.push_back(std::abs(v));
  }
  if (e.size() < 3) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t n = e.size();
  return std::log(e[n - 1] / e[n - 2]) / std::log(e[n - 2] / e[n - 3]);
}

}  // namespace qprop
