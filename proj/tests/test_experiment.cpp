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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "qprop/experiment.hpp"

namespace qprop {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string config_text(const std::string& name) { return slurp(fs::path(QPROP_CONFIG_DIR) / name); }

int run_cli(const std::string& args) {
  const std::string cmd = std::string(QPROP_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("qprop_test_" + name);
  fs::remove_all(dir);
  return dir;
}

TEST(ParseConfig, UnknownKeyIsLineAnchored) {
  const std::string text = "{\n  \"command\": \"gradient\",\n  \"levels\": [{\"n\": 4}],\n  \"typo\": 1\n}\n";
  try {
    parse_config(text);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("line 4:", 0), 0u) << e.what();
  }
}

TEST(ParseConfig, NestedUnknownKeyIsLineAnchored) {
  const std::string text =
      "{\n  \"command\": \"newton\",\n  \"optimizer\": {\n    \"method\": \"newton\",\n    \"stepsize\": 2\n  }\n}\n";
  try {
    parse_config(text);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("line 5:", 0), 0u) << e.what();
  }
}

TEST(ParseConfig, MalformedJson) {
  try {
    parse_config("{\n  \"command\": \"gradient\",\n  \"seed\": ,\n}\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("line 3:", 0), 0u) << e.what();
  }
}

TEST(ParseConfig, BadValues) {
  EXPECT_THROW(parse_config(R"({"mode": "fancy"})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"seed": -1})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"oracle": {"name": "nope"}})"), ConfigError);
  EXPECT_THROW(validate(parse_config(R"({"command": "teleport"})")), ConfigError);
  EXPECT_THROW(validate(parse_config(R"({"command": "gradient"})")), ConfigError);
}

TEST(RunExperiment, GradientLinear) {
  const auto rep = run_experiment(parse_config(config_text("gradient_linear.json")));
  EXPECT_EQ(rep.result["decoded"][0].get<double>(), 0.25);
  EXPECT_EQ(rep.result["queries"].get<int>(), 1);
  EXPECT_NEAR(rep.result["success_probability"].get<double>(), 1.0, 1e-10);
}

TEST(RunExperiment, HessianConfigs) {
  const auto a = run_experiment(parse_config(config_text("hessian_quadratic.json")));
  EXPECT_EQ(a.result["tensor"]["queries"].get<int>(), 2);
  EXPECT_EQ(a.result["tensor"]["entries"], json::parse("[2.0, 0.5, 0.5, 1.0]"));
  const auto b = run_experiment(parse_config(config_text("hessian_nested.json")));
  EXPECT_EQ(b.result["tensor"]["entries"][0].get<double>(), 0.5);
  EXPECT_EQ(b.result["tensor"]["mode"], "nested");
  const auto c = run_experiment(parse_config(config_text("derivative_cubic.json")));
  EXPECT_EQ(c.result["tensor"]["queries"].get<int>(), 4);
  EXPECT_EQ(c.result["tensor"]["entries"][0].get<double>(), 1.0);
}

TEST(RunExperiment, Optimizers) {
  const auto n = run_experiment(parse_config(config_text("newton_bowl.json")));
  EXPECT_EQ(n.result["trace"]["iterations"].get<int>(), 1);
  EXPECT_EQ(n.result["trace"]["iteration_queries"], json::parse("[3]"));
  const auto h = run_experiment(parse_config(config_text("householder_morse.json")));
  EXPECT_TRUE(h.result["trace"]["converged"].get<bool>());
  EXPECT_NEAR(h.result["trace"]["final_point"][0].get<double>(), 1.0, 1e-10);
}

TEST(Table1, Rows) {
  const std::vector<int> orders{1, 2, 3, 4};
  const auto rows = table1_report(3, orders, 2);
  ASSERT_EQ(rows.size(), 4u);
  const std::uint64_t quantum[] = {1, 2, 4, 8};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(rows[i].quantum, quantum[i]);
  EXPECT_EQ(rows[0].classical, 4u);
  EXPECT_EQ(rows[1].classical, 10u);
  EXPECT_FALSE(rows[2].classical.has_value());
  EXPECT_EQ(rows[3].formula_numerical, 82.0);
  EXPECT_EQ(rows[3].formula_analytical, 9.0);
}

TEST(Table1, ReferenceRows) {
  const std::vector<int> one{1};
  const auto r5 = table1_report(5, one, 2);
  EXPECT_EQ(r5[0].quantum, 1u);
  EXPECT_EQ(r5[0].classical, 6u);
  EXPECT_EQ(r5[0].formula_numerical, 6.0);
  const std::vector<int> two{2};
  const auto r2 = table1_report(2, two, 2);
  EXPECT_EQ(r2[0].quantum, 2u);
  EXPECT_EQ(r2[0].formula_numerical, 5.0);
  const std::vector<int> four{4};
  const auto r4 = table1_report(4, four, 2);
  EXPECT_EQ(r4[0].quantum, 8u);
  EXPECT_EQ(r4[0].formula_numerical, 257.0);
}

TEST(Table1, QuantumColumnConstantAcrossD) {
  const std::vector<int> orders{1, 2, 3};
  for (std::size_t d = 1; d <= 4; ++d) {
    const auto rows = table1_report(d, orders, 2);
    for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(rows[i].quantum, std::uint64_t{1} << i) << d;
  }
}

TEST(Cli, GradientWritesReports) {
  const auto out = scratch("gradient");
  ASSERT_EQ(run_cli("--config " + std::string(QPROP_CONFIG_DIR) + "/gradient_linear.json --out " + out.string()), 0);
  const auto doc = json::parse(slurp(out / "gradient.json"));
  EXPECT_EQ(doc["decoded"][0].get<double>(), 0.25);
  EXPECT_EQ(doc["queries"].get<int>(), 1);
  EXPECT_TRUE(fs::exists(out / "gradient.csv"));
}

TEST(Cli, DeterministicReports) {
  const auto a = scratch("det_a");
  const auto b = scratch("det_b");
  const std::string cfg = " --config " + std::string(QPROP_CONFIG_DIR) + "/basinhop_mueller_brown.json --seed 5";
  ASSERT_EQ(run_cli(cfg + " --out " + a.string()), 0);
  ASSERT_EQ(run_cli(cfg + " --out " + b.string()), 0);
  EXPECT_EQ(slurp(a / "basinhop.json"), slurp(b / "basinhop.json"));
  EXPECT_EQ(slurp(a / "basinhop.csv"), slurp(b / "basinhop.csv"));
}

TEST(Cli, MalformedConfigExitsTwoWithoutOutput) {
  const auto out = scratch("bad");
  const auto cfg = fs::temp_directory_path() / "qprop_bad_config.json";
  std::ofstream(cfg) << "{\n  \"command\": \"gradient\",\n";
  EXPECT_EQ(run_cli("--config " + cfg.string() + " --out " + out.string()), 2);
  EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, RuntimeErrorExitsOne) {
  const auto out = scratch("runtime");
  const auto cfg = fs::temp_directory_path() / "qprop_runtime_config.json";
  std::ofstream(cfg) << R"({"command": "newton",
    "oracle": {"name": "linear", "params": {"g": [1.0]}, "box": {"lo": [-1], "hi": [1]}},
    "optimizer": {"method": "gradient_descent", "descent_rate": 0.9, "start": [0.0]}})";
  EXPECT_EQ(run_cli("--config " + cfg.string() + " --out " + out.string()), 1);
}

TEST(Cli, Table1Flags) {
  const auto out = scratch("table1");
  ASSERT_EQ(run_cli("table1 --d 3 --orders 1,2,3,4 --out " + out.string()), 0);
  const auto csv = slurp(out / "table1.csv");
  EXPECT_EQ(csv,
            "order,quantum_measured,classical_measured,classical_formula,analytical_formula\n"
            "1,1,4,4,1\n2,2,10,10,3\n3,4,formula_only,28,3\n4,8,formula_only,82,9\n");
  EXPECT_EQ(run_cli("table1 --orders 1,x --out " + out.string()), 2);
  EXPECT_EQ(run_cli("bogus --out " + out.string()), 2);
}

}  // namespace
}  // namespace qprop
