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

// qprop: runs gradient, derivative, optimization, basin-hopping and
// query-table experiments from JSON configs.
//
// Exit codes: 0 ok, 1 runtime error, 2 configuration error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qprop/qprop.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kConfig = 2;

std::vector<int> parse_orders(const std::string& csv) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw qprop::ConfigError("--orders: '" + item + "' is not an integer");
    }
  }
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw qprop::Error("cannot write " + path.string());
  f << body;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qprop: quantum derivative and geometry-optimization experiments"};
  std::string command;
  std::optional<std::string> config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> format;
  std::optional<std::size_t> dim;
  std::optional<std::string> orders;
  std::optional<int> bits;
  app.add_option("command", command, "gradient, hessian, derivative, newton, householder, basinhop or table1");
  app.add_option("--config", config_path, "JSON experiment config");
  app.add_option("--out", out_dir, "directory for <command>.json and <command>.csv");
  app.add_option("--seed", seed, "seed for all randomness");
  app.add_option("--format", format, "report printed to stdout")->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--d", dim, "table1: perturbation dimension");
  app.add_option("--orders", orders, "table1: comma-separated derivative orders");
  app.add_option("--n", bits, "table1: output bits per register");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  qprop::ExperimentConfig config;
  try {
    if (config_path) {
      std::ifstream in(*config_path, std::ios::binary);
      if (!in) throw qprop::ConfigError("cannot read config " + *config_path);
      std::stringstream buf;
      buf << in.rdbuf();
      config = qprop::parse_config(buf.str());
    }
    if (!command.empty()) {
      if (!config.command.empty() && config.command != command) {
        throw qprop::ConfigError("command '" + command + "' conflicts with config command '" + config.command + "'");
      }
      config.command = command;
    }
    if (out_dir) config.out_dir = *out_dir;
    if (seed) config.seed = *seed;
    if (format) config.format = *format;
    if (dim) config.table1.d = *dim;
    if (orders) config.table1.orders = parse_orders(*orders);
    if (bits) config.table1.n = *bits;
    qprop::validate(config);
  } catch (const qprop::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  }

  try {
    const auto report = qprop::run_experiment(config);
    const std::string body = report.result.dump(2) + "\n";
    const std::filesystem::path dir(config.out_dir);
    std::filesystem::create_directories(dir);
    write_file(dir / (config.command + ".json"), body);
    if (!report.csv.empty()) write_file(dir / (config.command + ".csv"), report.csv);
    std::cout << (config.format == "csv" && !report.csv.empty() ? report.csv : body);
  } catch (const qprop::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    nlohmann::json err{{"error", e.what()}, {"command", config.command}};
    std::cerr << err.dump() << '\n';
    return kRuntime;
  }
  return kOk;
}
