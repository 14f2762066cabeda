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

// Global minimum search: seeded multistart local optimization fills a
// database of minima; the lowest entry is selected by simulated Durr-Hoyer
// minimum finding (threshold descent over BBHT Grover search) or by a
// classical scan.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qprop/errors.hpp"
#include "qprop/optimize.hpp"
#include "qprop/oracles.hpp"

namespace qprop {

struct BasinRecord {
  std::vector<double> start;
  std::vector<double> minimum;
  double energy = std::numeric_limits<double>::infinity();  // +inf marks a failed local search
  bool converged = false;
};

struct BasinDatabase {
  std::vector<BasinRecord> entries;

  std::size_t size() const { return entries.size(); }
  std::vector<double> energies() const {
    std::vector<double> e;
    e.reserve(entries.size());
    for (const auto& r : entries) e.push_back(r.energy);
    return e;
  }
};

struct SearchStats {
  std::uint64_t database_queries = 0;
  std::size_t found_index = 0;
  double found_value = 0.0;
  bool success = false;  // found_value equals the true minimum
};

/// Local optimizer used by multistart: analytic Newton with level shift,
/// a short trust radius and the energy safeguard.
inline OptimizerConfig default_local_config() {
  OptimizerConfig c;
  c.method = Method::newton;
  c.source = DerivativeSource::analytic;
  c.max_iters = 200;
  c.tolerance = 1e-8;
  c.trust_radius = 0.1;
  c.safeguard = true;
  return c;
}

/// K seeded uniform starts in `sampling`, each minimized locally. Failed
/// searches are kept with +inf energy.
inline BasinDatabase multistart(const EnergyOracle& oracle, std::size_t K, std::uint64_t seed, const Box& sampling,
                                const OptimizerConfig& local = default_local_config()) {
  if (K < 1) throw ConfigError("multistart: K must be >= 1");
  if (!sampling.bounded() || sampling.lo.size() != oracle.dim()) {
    throw ConfigError("multistart: a sampling box matching the oracle dimension is required");
  }
  std::mt19937_64 rng(seed);
  BasinDatabase db;
  db.entries.reserve(K);
  for (std::size_t s = 0; s < K; ++s) {
    BasinRecord rec;
    for (std::size_t i = 0; i < oracle.dim(); ++i) {
      std::uniform_real_distribution<double> u(sampling.lo[i], sampling.hi[i]);
      rec.start.push_back(u(rng));
    }
    try {
      const auto trace = minimize(oracle, rec.start, local);
      rec.minimum = trace.iterates.back();
      rec.converged = trace.converged;
      rec.energy = trace.converged ? trace.energies.back() : std::numeric_limits<double>::infinity();
    } catch (const OptimizationDiverged& e) {
      rec.minimum = e.trace().iterates.back();
    } catch (const Error&) {
      rec.minimum = rec.start;
    }
    db.entries.push_back(std::move(rec));
  }
  return db;
}

/// Linear scan: exactly K queries.
inline SearchStats classical_min_scan(std::span<const double> values) {
  if (values.empty()) throw ConfigError("classical_min_scan: empty database");
  SearchStats s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    ++s.database_queries;
    if (i == 0 || values[i] < s.found_value) {
      s.found_index = i;
      s.found_value = values[i];
    }
  }
  s.success = true;
  return s;
}

inline SearchStats classical_min_scan(const BasinDatabase& db) { return classical_min_scan(db.energies()); }

struct DurrHoyerConfig {
  double c1 = 22.5;
  double c2 = 1.4;
  double bbht_growth = 6.0 / 5.0;  // lambda
  double bbht_cutoff = 4.5;        // BBHT gives up after this many sqrt(K) queries
};

namespace detail {

// Grover search over `values` for an index with value < threshold, run on
// an exact statevector of dimension next_pow2(K) with amplitude supported
// on the K valid indices.
class GroverSimulator {
 public:
  explicit GroverSimulator(std::span<const double> values) : values_(values.begin(), values.end()) {
    dim_ = 1;
    while (dim_ < values_.size()) dim_ <<= 1;
  }

  /// Runs `iterations` Grover iterations from the uniform state and samples.
  std::size_t run(double threshold, std::uint64_t iterations, std::mt19937_64& rng) const {
    const std::size_t K = values_.size();
    const double a0 = 1.0 / std::sqrt(static_cast<double>(K));
    std::vector<double> amp(dim_, 0.0);
    for (std::size_t i = 0; i < K; ++i) amp[i] = a0;
    for (std::uint64_t it = 0; it < iterations; ++it) {
      for (std::size_t i = 0; i < K; ++i) {
        if (values_[i] < threshold) amp[i] = -amp[i];
      }
      // Reflection about the initial state: 2|s><s| - I.
      double overlap = 0.0;
      for (std::size_t i = 0; i < K; ++i) overlap += a0 * amp[i];
      for (std::size_t i = 0; i < K; ++i) amp[i] = 2.0 * overlap * a0 - amp[i];
    }
    std::vector<double> p(dim_);
    for (std::size_t i = 0; i < dim_; ++i) p[i] = amp[i] * amp[i];
    std::discrete_distribution<std::size_t> pick(p.begin(), p.end());
    return pick(rng);
  }

 private:
  std::vector<double> values_;
  std::size_t dim_;
};

}  // namespace detail

/// Query budget c1*sqrt(K) + c2*log2(K)^2.
inline double durr_hoyer_budget(std::size_t K, const DurrHoyerConfig& config = {}) {
  const double lk = std::log2(static_cast<double>(std::max<std::size_t>(K, 1)));
  return config.c1 * std::sqrt(static_cast<double>(K)) + config.c2 * lk * lk;
}

/// Threshold descent. Each Grover iteration is one database query and so is
/// the comparison of a measured index against the threshold.
inline SearchStats durr_hoyer_min(std::span<const double> values, std::uint64_t seed,
                                  const DurrHoyerConfig& config = {}) {
  const std::size_t K = values.size();
  if (K == 0) throw ConfigError("durr_hoyer_min: empty database");
  std::mt19937_64 rng(seed);
  const detail::GroverSimulator grover(values);
  const double budget = durr_hoyer_budget(K, config);
  const double sqrt_k = std::sqrt(static_cast<double>(K));

  std::size_t best = std::uniform_int_distribution<std::size_t>(0, K - 1)(rng);
  SearchStats s;
  bool descending = true;
  while (descending && static_cast<double>(s.database_queries) < budget) {
    // BBHT: random iteration counts drawn from a growing range.
    double m = 1.0;
    std::uint64_t spent = 0;
    bool improved = false;
    while (static_cast<double>(spent) < config.bbht_cutoff * sqrt_k &&
           static_cast<double>(s.database_queries) < budget) {
      const auto upper = static_cast<std::uint64_t>(std::ceil(m));
      const std::uint64_t j = std::uniform_int_distribution<std::uint64_t>(0, upper - 1)(rng);
      const std::size_t candidate = grover.run(values[best], j, rng);
      spent += j + 1;
      s.database_queries += j + 1;
      if (candidate < K && values[candidate] < values[best]) {
        best = candidate;
        improved = true;
        break;
      }
      m = std::min(config.bbht_growth * m, sqrt_k);
    }
    descending = improved;
  }
  s.database_queries = std::max<std::uint64_t>(s.database_queries, 1);
  s.found_index = best;
  s.found_value = values[best];
  s.success = values[best] == *std::min_element(values.begin(), values.end());
  return s;
}

inline SearchStats durr_hoyer_min(const BasinDatabase& db, std::uint64_t seed, const DurrHoyerConfig& config = {}) {
  return durr_hoyer_min(db.energies(), seed, config);
}

struct BasinHopResult {
  BasinDatabase database;
  SearchStats quantum;
  SearchStats classical;
  std::vector<double> global_minimum;  // point of the quantum pick
  double global_energy = 0.0;
};

/// Multistart followed by quantum minimum selection over the database.
inline BasinHopResult quantum_basin_hop(const EnergyOracle& oracle, std::size_t K, std::uint64_t seed,
                                        const Box& sampling, const OptimizerConfig& local = default_local_config(),
                                        const DurrHoyerConfig& search = {}) {
  BasinHopResult r;
  r.database = multistart(oracle, K, seed, sampling, local);
  // Search randomness is decoupled from the start sampler.
  r.quantum = durr_hoyer_min(r.database, seed ^ 0x9e3779b97f4a7c15ULL, search);
  r.classical = classical_min_scan(r.database);
  r.global_minimum = r.database.entries[r.quantum.found_index].minimum;
  r.global_energy = r.quantum.found_value;
  return r;
}

struct SearchTrial {
  std::size_t K = 0;
  std::size_t trial = 0;
  std::uint64_t queries = 0;
  bool success = false;
};

struct ScalingSummary {
  std::vector<std::size_t> sizes;
  std::vector<double> mean_queries;
  std::vector<double> success_fraction;
  std::vector<double> classical_queries;  // plain scan, K
  std::vector<double> classical_klogk;    // K log2 K, the cited classical bound
  double exponent = 0.0;                  // least-squares slope of log(mean) vs log(K)
  std::vector<SearchTrial> trials;

  std::string csv() const {
    std::ostringstream os;
    os << "K,trial,queries,success\n";
    for (const auto& t : trials) os << t.K << ',' << t.trial << ',' << t.queries << ',' << (t.success ? 1 : 0) << '\n';
    return os.str();
  }
};

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw ConfigError("loglog_slope: need at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Durr-Hoyer trials on seeded random databases of each size.
inline ScalingSummary durr_hoyer_scaling(std::span<const std::size_t> sizes, std::size_t trials, std::uint64_t seed,
                                         const DurrHoyerConfig& config = {}) {
  ScalingSummary out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> xs;
  for (std::size_t K : sizes) {
    double total = 0.0;
    std::size_t wins = 0;
    for (std::size_t t = 0; t < trials; ++t) {
      std::vector<double> values(K);
      for (double& v : values) v = u(rng);
      const auto s = durr_hoyer_min(values, rng(), config);
      total += static_cast<double>(s.database_queries);
      wins += s.success ? 1 : 0;
      out.trials.push_back({K, t, s.database_queries, s.success});
    }
    out.sizes.push_back(K);
    out.mean_queries.push_back(total / static_cast<double>(trials));
    out.success_fraction.push_back(static_cast<double>(wins) / static_cast<double>(trials));
    out.classical_queries.push_back(static_cast<double>(K));
    out.classical_klogk.push_back(static_cast<double>(K) * std::log2(static_cast<double>(K)));
    xs.push_back(static_cast<double>(K));
  }
  if (xs.size() >= 2) out.exponent = loglog_slope(xs, out.mean_queries);
  return out;
}

}  // namespace qprop
