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

// JSON-configured experiments and their reports.
//
// Top-level keys: command, oracle, center, levels, order, mode, uncompute,
// readout, seed, optimizer, basinhop, table1, output. Unknown keys are
// rejected; diagnostics carry the line of the offending key.

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qprop/basinhopper.hpp"
#include "qprop/derivatives.hpp"
#include "qprop/errors.hpp"
#include "qprop/gradient.hpp"
#include "qprop/optimize.hpp"
#include "qprop/oracles.hpp"

namespace qprop {

using nlohmann::json;

inline const std::vector<std::string>& known_commands() {
  static const std::vector<std::string> names{"gradient", "hessian",     "derivative", "newton",
                                              "householder", "basinhop", "table1"};
  return names;
}

struct LevelSpec {
  int n = 4;
  std::optional<double> m;  // defaults to twice the oracle's bound of this order
  double h = 1.0;
  double theta = std::numbers::pi / 8.0;
  bool quantize_energy = true;
};

struct BasinSpec {
  std::size_t K = 32;
  Box sampling{{-1.5, -0.5}, {1.2, 2.0}};
  std::vector<std::size_t> sizes{16, 64, 256};
  std::size_t trials = 200;
  DurrHoyerConfig search;
};

struct Table1Spec {
  std::size_t d = 3;
  std::vector<int> orders{1, 2, 3, 4};
  int n = 2;
};

struct ExperimentConfig {
  std::string command;
  std::optional<EnergyOracle> oracle;
  json oracle_doc;
  std::vector<double> center;
  std::vector<LevelSpec> levels;
  int order = 1;
  DerivativeMode mode = DerivativeMode::idealized;
  bool uncompute = true;
  Readout readout = Readout::statevector;
  std::uint64_t seed = 0;
  OptimizerConfig optimizer;
  std::vector<double> start;
  BasinSpec basin;
  Table1Spec table1;
  std::string out_dir = ".";
  std::string format = "json";
};

namespace detail {

inline std::size_t line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

// Line of the first "key" named in a diagnostic, or of the section it names.
inline std::size_t anchor_line(const std::string& text, const std::string& message) {
  std::smatch m;
  std::vector<std::string> probes;
  if (std::regex_search(message, m, std::regex("'([^']+)'"))) probes.push_back(m[1]);
  if (std::regex_search(message, m, std::regex("^([A-Za-z_0-9]+)"))) probes.push_back(m[1]);
  for (const auto& key : probes) {
    const auto pos = text.find("\"" + key + "\"");
    if (pos != std::string::npos) return line_of_offset(text, pos);
  }
  return 1;
}

inline int integer(const json& obj, const char* key, int fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) throw ConfigError(where + ": '" + std::string(key) + "' must be an integer");
  return v.get<int>();
}

inline bool boolean(const json& obj, const char* key, bool fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_boolean()) throw ConfigError(where + ": '" + std::string(key) + "' must be true or false");
  return obj.at(key).get<bool>();
}

inline std::string text(const json& obj, const char* key, const std::string& fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_string()) throw ConfigError(where + ": '" + std::string(key) + "' must be a string");
  return obj.at(key).get<std::string>();
}

inline Box box_of(const json& b, const std::string& where) {
  reject_unknown_keys(b, {"lo", "hi"}, where);
  if (!b.contains("lo") || !b.contains("hi")) throw ConfigError(where + ": needs 'lo' and 'hi'");
  Box box{vector_of(b.at("lo"), where + " lo"), vector_of(b.at("hi"), where + " hi")};
  if (box.lo.size() != box.hi.size()) throw ConfigError(where + ": lo/hi size mismatch");
  return box;
}

inline std::vector<std::size_t> sizes_of(const json& v, const std::string& where) {
  std::vector<std::size_t> out;
  for (double x : vector_of(v, where)) {
    if (!(x >= 1.0) || x != std::floor(x)) throw ConfigError(where + " must hold positive integers");
    out.push_back(static_cast<std::size_t>(x));
  }
  return out;
}

inline void parse_optimizer(const json& o, ExperimentConfig& c) {
  const std::string where = "optimizer";
  reject_unknown_keys(o,
                      {"method", "householder_order", "max_iters", "tolerance", "trust_radius", "level_shift",
                       "safeguard", "source", "fd_step", "descent_rate", "start"},
                      where);
  auto& oc = c.optimizer;
  const auto method = text(o, "method", to_string(oc.method), where);
  if (method == "newton") {
    oc.method = Method::newton;
  } else if (method == "householder") {
    oc.method = Method::householder;
  } else if (method == "gradient_descent") {
    oc.method = Method::gradient_descent;
  } else {
    throw ConfigError(where + ": unknown 'method' value '" + method + "'");
  }
  oc.householder_order = integer(o, "householder_order", oc.householder_order, where);
  oc.max_iters = integer(o, "max_iters", oc.max_iters, where);
  oc.tolerance = number_or(o, "tolerance", oc.tolerance, where);
  oc.trust_radius = number_or(o, "trust_radius", oc.trust_radius, where);
  oc.level_shift = boolean(o, "level_shift", oc.level_shift, where);
  oc.safeguard = boolean(o, "safeguard", oc.safeguard, where);
  oc.fd_step = number_or(o, "fd_step", oc.fd_step, where);
  oc.descent_rate = number_or(o, "descent_rate", oc.descent_rate, where);
  const auto source = text(o, "source", to_string(oc.source), where);
  if (source == "quantum") {
    oc.source = DerivativeSource::quantum;
  } else if (source == "classical_fd") {
    oc.source = DerivativeSource::classical_fd;
  } else if (source == "analytic") {
    oc.source = DerivativeSource::analytic;
  } else {
    throw ConfigError(where + ": unknown 'source' value '" + source + "'");
  }
  if (o.contains("start")) c.start = vector_of(o.at("start"), "optimizer start");
}

inline ExperimentConfig parse_document(const json& doc) {
  ExperimentConfig c;
  reject_unknown_keys(doc,
                      {"command", "oracle", "center", "levels", "order", "mode", "uncompute", "readout", "seed",
                       "optimizer", "basinhop", "table1", "output"},
                      "config");
  c.command = text(doc, "command", "", "config");
  if (doc.contains("oracle")) {
    c.oracle_doc = doc.at("oracle");
    c.oracle = oracle_from_json(c.oracle_doc);
  }
  if (doc.contains("center")) c.center = vector_of(doc.at("center"), "center");
  if (doc.contains("levels")) {
    if (!doc.at("levels").is_array()) throw ConfigError("levels: must be an array of plan objects");
    for (const auto& l : doc.at("levels")) {
      reject_unknown_keys(l, {"n", "m", "h", "theta", "quantize_energy"}, "levels");
      LevelSpec s;
      s.n = integer(l, "n", s.n, "levels");
      if (l.contains("m")) s.m = number(l, "m", "levels");
      s.h = number_or(l, "h", s.h, "levels");
      s.theta = number_or(l, "theta", s.theta, "levels");
      s.quantize_energy = boolean(l, "quantize_energy", s.quantize_energy, "levels");
      c.levels.push_back(s);
    }
  }
  c.order = integer(doc, "order", c.order, "config");
  const auto mode = text(doc, "mode", "idealized", "config");
  if (mode == "idealized") {
    c.mode = DerivativeMode::idealized;
  } else if (mode == "nested") {
    c.mode = DerivativeMode::nested;
  } else {
    throw ConfigError("config: unknown 'mode' value '" + mode + "'");
  }
  c.uncompute = boolean(doc, "uncompute", c.uncompute, "config");
  const auto readout = text(doc, "readout", "statevector", "config");
  if (readout == "statevector") {
    c.readout = Readout::statevector;
  } else if (readout == "sampling") {
    c.readout = Readout::sampling;
  } else {
    throw ConfigError("config: unknown 'readout' value '" + readout + "'");
  }
  if (doc.contains("seed")) {
    if (!doc.at("seed").is_number_unsigned()) throw ConfigError("config: 'seed' must be a non-negative integer");
    c.seed = doc.at("seed").get<std::uint64_t>();
  }
  if (doc.contains("optimizer")) parse_optimizer(doc.at("optimizer"), c);
  if (doc.contains("basinhop")) {
    const auto& b = doc.at("basinhop");
    reject_unknown_keys(b, {"K", "sampling_box", "sizes", "trials", "c1", "c2"}, "basinhop");
    c.basin.K = static_cast<std::size_t>(integer(b, "K", static_cast<int>(c.basin.K), "basinhop"));
    if (b.contains("sampling_box")) c.basin.sampling = box_of(b.at("sampling_box"), "sampling_box");
    if (b.contains("sizes")) c.basin.sizes = sizes_of(b.at("sizes"), "basinhop sizes");
    c.basin.trials = static_cast<std::size_t>(integer(b, "trials", static_cast<int>(c.basin.trials), "basinhop"));
    c.basin.search.c1 = number_or(b, "c1", c.basin.search.c1, "basinhop");
    c.basin.search.c2 = number_or(b, "c2", c.basin.search.c2, "basinhop");
    if (c.basin.K < 1 || c.basin.trials < 1) throw ConfigError("basinhop: 'K' and 'trials' must be >= 1");
  }
  if (doc.contains("table1")) {
    const auto& t = doc.at("table1");
    reject_unknown_keys(t, {"d", "orders", "n"}, "table1");
    c.table1.d = static_cast<std::size_t>(integer(t, "d", static_cast<int>(c.table1.d), "table1"));
    if (t.contains("orders")) {
      c.table1.orders.clear();
      for (auto k : sizes_of(t.at("orders"), "table1 orders")) c.table1.orders.push_back(static_cast<int>(k));
    }
    c.table1.n = integer(t, "n", c.table1.n, "table1");
  }
  if (doc.contains("output")) {
    const auto& o = doc.at("output");
    reject_unknown_keys(o, {"dir", "format"}, "output");
    c.out_dir = text(o, "dir", c.out_dir, "output");
    c.format = text(o, "format", c.format, "output");
  }
  return c;
}

}  // namespace detail

/// Checks cross-field constraints once flags have been merged in.
inline void validate(const ExperimentConfig& c) {
  const auto& names = known_commands();
  if (std::find(names.begin(), names.end(), c.command) == names.end()) {
    throw ConfigError("command: unknown command '" + c.command + "'");
  }
  if (c.format != "json" && c.format != "csv") throw ConfigError("format: must be json or csv");
  if (c.command == "table1") {
    if (c.table1.d < 1) throw ConfigError("table1: 'd' must be >= 1");
    if (c.table1.n < 1) throw ConfigError("table1: 'n' must be >= 1");
    for (int r : c.table1.orders) {
      if (r < 1 || r > 5) throw ConfigError("table1: 'orders' must lie in 1..5");
    }
    return;
  }
  if (!c.oracle) throw ConfigError("oracle: missing 'oracle' for command " + c.command);
  for (const auto& l : c.levels) {
    if (l.n < 1 || l.n > 30) throw ConfigError("levels: 'n' must lie in 1..30");
    if (!(l.h > 0.0)) throw ConfigError("levels: 'h' must be positive");
    if (!(l.theta > 0.0 && l.theta < std::numbers::pi / 2.0)) throw ConfigError("levels: 'theta' must lie in (0, pi/2)");
    if (l.m && !(*l.m > 0.0)) throw ConfigError("levels: 'm' must be positive");
  }
  if (c.command == "gradient" || c.command == "hessian" || c.command == "derivative") {
    const int order = c.command == "gradient" ? 1 : c.command == "hessian" ? 2 : c.order;
    if (order < 1 || order > 5) throw ConfigError("order: 'order' must lie in 1..5");
    if (c.levels.size() < static_cast<std::size_t>(order)) {
      throw ConfigError("levels: need " + std::to_string(order) + " level plans");
    }
    if (!c.center.empty() && c.center.size() != c.oracle->dim()) {
      throw ConfigError("center: dimension does not match the oracle");
    }
  }
  if (c.command == "newton" || c.command == "householder") {
    if (c.start.size() != c.oracle->dim()) throw ConfigError("start: 'start' must match the oracle dimension");
  }
  if (c.command == "basinhop" && c.basin.sampling.lo.size() != c.oracle->dim()) {
    throw ConfigError("sampling_box: dimension does not match the oracle");
  }
}

/// Parses config text; ConfigError messages are prefixed with "line N: ".
inline ExperimentConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("line " + std::to_string(detail::line_of_offset(text, e.byte == 0 ? 0 : e.byte - 1)) +
                      ": malformed JSON: " + e.what());
  }
  try {
    return detail::parse_document(doc);
  } catch (const ConfigError& e) {
    throw ConfigError("line " + std::to_string(detail::anchor_line(text, e.what())) + ": " + e.what());
  } catch (const json::exception& e) {
    throw ConfigError("line 1: " + std::string(e.what()));
  }
}

struct Report {
  json result;
  std::string csv;
};

/// Level plans with unspecified m resolved from the oracle's bounds.
inline std::vector<PrecisionPlan> resolve_levels(const std::vector<LevelSpec>& specs, const EnergyOracle& oracle) {
  std::vector<PrecisionPlan> out;
  for (std::size_t j = 0; j < specs.size(); ++j) {
    const auto& s = specs[j];
    double m = 0.0;
    if (s.m) {
      m = *s.m;
    } else {
      const auto b = oracle.derivative_bound(static_cast<int>(j + 1));
      if (!b) throw ConfigError("levels: 'm' missing and the oracle declares no order-" + std::to_string(j + 1) + " bound");
      m = *b > 0.0 ? 2.0 * *b : 1.0;
    }
    auto p = make_plan(s.n, m, s.h, s.theta);
    p.quantize_energy = s.quantize_energy;
    out.push_back(std::move(p));
  }
  return out;
}

inline json plan_json(const PrecisionPlan& p) {
  return {{"n", p.bits},
          {"m", p.scale},
          {"h", p.width},
          {"theta", p.failure_angle},
          {"energy_bits", p.energy_bits},
          {"quantize_energy", p.quantize_energy},
          {"warnings", p.warnings}};
}

inline json tensor_json(const DerivativeTensor& t) {
  return {{"order", t.order()},
          {"dim", t.tensor.dim},
          {"entries", t.tensor.entries},
          {"raw", t.raw},
          {"scale", t.scale},
          {"queries", t.queries},
          {"mode", to_string(t.mode)},
          {"success_probability", t.success_probability},
          {"cleanup_passes", t.cleanup_passes}};
}

inline json trace_json(const OptimizationTrace& t) {
  return {{"iterations", t.iterations},
          {"converged", t.converged},
          {"final_point", t.iterates.back()},
          {"final_energy", t.energies.back()},
          {"energies", t.energies},
          {"gradient_norms", t.gradient_norms},
          {"iteration_queries", t.iteration_queries},
          {"verification_queries", t.verification_queries},
          {"energy_queries", t.energy_queries},
          {"total_queries", t.total_queries},
          {"level_shifts", t.level_shifts}};
}

struct Table1Row {
  int order = 1;
  std::uint64_t quantum = 0;
  std::optional<std::uint64_t> classical;  // measured stencil, orders 1 and 2
  double formula_numerical = 0.0;          // d^n + 1
  double formula_analytical = 0.0;         // d^floor(n/2)
};

/// Measured query counts per derivative order on a d-dimensional quadratic
/// form, with the reference cost formulas alongside.
inline std::vector<Table1Row> table1_report(std::size_t d, std::span<const int> orders, int n,
                                            std::optional<EnergyOracle> oracle = std::nullopt) {
  if (!oracle) {
    std::vector<std::vector<double>> a(d, std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < d; ++i) a[i][i] = 1.0;
    oracle = models::quadratic_form(std::move(a));
  }
  if (oracle->dim() != d) throw ConfigError("table1: oracle dimension differs from d");
  std::vector<Table1Row> rows;
  for (int r : orders) {
    std::vector<PrecisionPlan> levels;
    for (int j = 1; j <= r; ++j) {
      const auto b = oracle->derivative_bound(j);
      const double m = b && *b > 0.0 ? 2.0 * *b : 1.0;
      auto p = make_plan(n, m, 1.0);
      p.quantize_energy = false;
      levels.push_back(p);
    }
    const PerturbationDomain domain = PerturbationDomain::origin(d, 1.0);
    Table1Row row;
    row.order = r;
    row.quantum = estimate_derivative(*oracle, domain, r, levels).queries;
    if (r <= 2) {
      const std::vector<double> at(d, 0.0);
      row.classical = finite_difference(*oracle, at, r, 1e-4).queries;
    }
    row.formula_numerical = std::pow(static_cast<double>(d), r) + 1.0;
    row.formula_analytical = std::pow(static_cast<double>(d), r / 2);
    rows.push_back(row);
  }
  return rows;
}

inline std::string table1_csv(const std::vector<Table1Row>& rows) {
  std::ostringstream os;
  os << "order,quantum_measured,classical_measured,classical_formula,analytical_formula\n";
  for (const auto& r : rows) {
    os << r.order << ',' << r.quantum << ',';
    if (r.classical) {
      os << *r.classical;
    } else {
      os << "formula_only";
    }
    os << ',' << static_cast<std::uint64_t>(r.formula_numerical) << ','
       << static_cast<std::uint64_t>(r.formula_analytical) << '\n';
  }
  return os.str();
}

/// Runs a validated configuration.
inline Report run_experiment(const ExperimentConfig& c) {
  validate(c);
  Report rep;
  rep.result["command"] = c.command;
  rep.result["seed"] = c.seed;
  if (c.command == "table1") {
    const auto rows = table1_report(c.table1.d, c.table1.orders, c.table1.n, c.oracle);
    json arr = json::array();
    for (const auto& r : rows) {
      arr.push_back({{"order", r.order},
                     {"quantum_measured", r.quantum},
                     {"classical_measured", r.classical ? json(*r.classical) : json("formula_only")},
                     {"classical_formula", r.formula_numerical},
                     {"analytical_formula", r.formula_analytical}});
    }
    rep.result["d"] = c.table1.d;
    rep.result["n"] = c.table1.n;
    rep.result["rows"] = arr;
    rep.csv = table1_csv(rows);
    return rep;
  }

  const EnergyOracle& oracle = *c.oracle;
  rep.result["oracle"] = c.oracle_doc;
  const auto levels = resolve_levels(c.levels, oracle);
  const std::vector<double> center = c.center.empty() ? std::vector<double>(oracle.dim(), 0.0) : c.center;

  if (c.command == "gradient") {
    const PerturbationDomain domain(center, levels[0].width);
    GradientOptions go;
    go.readout = c.readout;
    go.seed = c.seed;
    const auto g = estimate_gradient(oracle, domain, levels[0], go);
    rep.result["decoded"] = g.decoded;
    rep.result["raw"] = g.raw;
    rep.result["success_probability"] = g.success_probability;
    rep.result["queries"] = g.queries;
    rep.result["plan"] = plan_json(g.plan);
    rep.result["readout"] = c.readout == Readout::statevector ? "statevector" : "sampling";
    std::ostringstream os;
    os.precision(17);
    os << "register,raw,decoded,probability_of_raw\n";
    for (std::size_t i = 0; i < g.raw.size(); ++i) {
      os << i << ',' << g.raw[i] << ',' << g.decoded[i] << ',' << g.distribution.marginal(static_cast<int>(i))[g.raw[i]] << '\n';
    }
    rep.csv = os.str();
    return rep;
  }

  if (c.command == "hessian" || c.command == "derivative") {
    const int order = c.command == "hessian" ? 2 : c.order;
    const PerturbationDomain domain(center, levels[static_cast<std::size_t>(order - 1)].width);
    DerivativeOptions opts;
    opts.mode = c.mode;
    opts.uncompute = c.uncompute;
    const auto t = estimate_derivative(oracle, domain, order, levels, opts);
    rep.result["tensor"] = tensor_json(t);
    json plans = json::array();
    for (int j = 0; j < order; ++j) plans.push_back(plan_json(levels[static_cast<std::size_t>(j)]));
    rep.result["levels"] = plans;
    std::ostringstream os;
    os.precision(17);
    os << "index,value,raw\n";
    for (std::size_t f = 0; f < t.tensor.size(); ++f) {
      const auto idx = t.tensor.unflatten(f);
      std::string name;
      for (std::size_t k = 0; k < idx.size(); ++k) name += (k ? ":" : "") + std::to_string(idx[k]);
      os << name << ',' << t.tensor.entries[f] << ',' << t.raw[f] << '\n';
    }
    rep.csv = os.str();
    return rep;
  }

  if (c.command == "newton" || c.command == "householder") {
    OptimizerConfig oc = c.optimizer;
    if (c.command == "householder") {
      oc.method = Method::householder;
    } else if (oc.method == Method::householder) {
      oc.method = Method::newton;
    }
    oc.levels = levels;
    const auto t = minimize(oracle, c.start, oc);
    rep.result["method"] = to_string(oc.method);
    rep.result["source"] = to_string(oc.source);
    if (oc.method == Method::householder) rep.result["householder_order"] = oc.householder_order;
    rep.result["trace"] = trace_json(t);
    rep.csv = t.csv();
    return rep;
  }

  // basinhop
  const auto hop = quantum_basin_hop(oracle, c.basin.K, c.seed, c.basin.sampling, default_local_config(), c.basin.search);
  json db = json::array();
  for (const auto& e : hop.database.entries) {
    db.push_back({{"start", e.start},
                  {"minimum", e.minimum},
                  {"energy", std::isfinite(e.energy) ? json(e.energy) : json("inf")},
                  {"converged", e.converged}});
  }
  const auto stats = [](const SearchStats& s) {
    return json{{"database_queries", s.database_queries},
                {"found_index", s.found_index},
                {"found_value", s.found_value},
                {"success", s.success}};
  };
  rep.result["K"] = c.basin.K;
  rep.result["database"] = db;
  rep.result["quantum"] = stats(hop.quantum);
  rep.result["classical"] = stats(hop.classical);
  rep.result["global_minimum"] = hop.global_minimum;
  rep.result["global_energy"] = hop.global_energy;
  const auto scaling = durr_hoyer_scaling(c.basin.sizes, c.basin.trials, c.seed, c.basin.search);
  rep.result["scaling"] = {{"sizes", scaling.sizes},
                           {"trials", c.basin.trials},
                           {"mean_queries", scaling.mean_queries},
                           {"success_fraction", scaling.success_fraction},
                           {"classical_scan_queries", scaling.classical_queries},
                           {"classical_klogk", scaling.classical_klogk},
                           {"fitted_exponent", scaling.exponent},
                           {"budget_c1", c.basin.search.c1},
                           {"budget_c2", c.basin.search.c2}};
  rep.csv = scaling.csv();
  return rep;
}

}  // namespace qprop
