#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "ddsf/io.hpp"
#include "ddsf/scenarios.hpp"

namespace ddsf {
namespace io {
namespace {

namespace fs = std::filesystem;
using Eigen::MatrixXd;
using Eigen::VectorXd;

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ddsf_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DDSF_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

TEST(FormatTest, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(-2.0), "-2");
  for (double v : {1.0 / 3.0, 9.81, -1e-300, 6.02214076e23}) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
}

TEST(ConfigTest, RoundTrip) {
  for (const scenarios::ScenarioConfig& cfg :
       {scenarios::build_quadrotor().config, scenarios::build_acc(4).config}) {
    EXPECT_TRUE(config_from_json(config_to_json(cfg)) == cfg);
  }
  const fs::path dir = scratch_dir("config");
  const scenarios::ScenarioConfig cfg = scenarios::build_acc(6).config;
  save_config(cfg, dir / "acc.json");
  EXPECT_TRUE(load_config(dir / "acc.json") == cfg);
}

TEST(ConfigTest, RejectsUnknownMissingAndMistypedKeys) {
  const std::string good = config_to_json(scenarios::build_acc(1).config);
  const std::string unknown = "{\"colour\": 1," + good.substr(good.find('{') + 1);
  EXPECT_THROW(config_from_json(unknown), ConfigError);

  std::string missing = good;
  const size_t pos = missing.find("\"T_ini\"");
  ASSERT_NE(pos, std::string::npos);
  missing.replace(pos, 7, "\"T_init\"");
  EXPECT_THROW(config_from_json(missing), ConfigError);

  std::string mistyped = good;
  const size_t np = mistyped.find("\"name\"");
  ASSERT_NE(np, std::string::npos);
  mistyped.insert(mistyped.find(':', np) + 1, " 5, \"unused\":");
  EXPECT_THROW(config_from_json(mistyped), ConfigError);

  EXPECT_THROW(config_from_json("[1, 2]"), ConfigError);
  EXPECT_THROW(config_from_json("{not json"), ConfigError);
}

TEST(DatasetCsvTest, RoundTripIsExact) {
  const Trajectory t((MatrixXd(2, 3) << 0.1, -2.5, 1.0 / 3.0, 4, 5e-17, 6).finished(),
                     (MatrixXd(1, 3) << 9.81, -0.0, 1e300).finished());
  std::stringstream ss;
  write_dataset(ss, t);
  const std::string text = ss.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "k,u_0,u_1,y_0");
  EXPECT_EQ(text.find('\r'), std::string::npos);
  std::stringstream in(text);
  EXPECT_TRUE(read_dataset(in) == t);
}

TEST(DatasetCsvTest, RejectsMalformed) {
  std::stringstream bad_header("k,x_0,y_0\n0,1,2\n");
  EXPECT_THROW(read_dataset(bad_header), InvalidArgument);
  std::stringstream short_row("k,u_0,y_0\n0,1\n");
  EXPECT_THROW(read_dataset(short_row), InvalidArgument);
  std::stringstream bad_number("k,u_0,y_0\n0,abc,2\n");
  EXPECT_THROW(read_dataset(bad_number), InvalidArgument);
}

TEST(RunLogCsvTest, Header) {
  scenarios::RunLog log;
  log.records.push_back({0, VectorXd::Constant(1, 1.5), VectorXd::Constant(1, 0.5),
                         VectorXd::Constant(1, 0.25), 1.0, "optimal", 12});
  std::stringstream ss;
  write_run_log(ss, log);
  EXPECT_EQ(ss.str(),
            "t,u_learn_0,u_safe_0,y_0,intervention,qp_status,qp_iters\n"
            "0,1.5,0.5,0.25,1,optimal,12\n");
}

TEST(CliTest, ExitCodes) {
  const fs::path dir = scratch_dir("cli");
  scenarios::ScenarioConfig cfg = scenarios::build_acc(2).config;
  cfg.run.steps = 20;
  save_config(cfg, dir / "acc.json");
  const std::string c = (dir / "acc.json").string();
  const std::string d = (dir / "data.csv").string();

  EXPECT_EQ(run_cli("collect --config " + c + " --out " + d), 0);
  EXPECT_EQ(run_cli("check --config " + c + " --data " + d), 0);
  EXPECT_EQ(run_cli("run --config " + c + " --data " + d + " --out " + (dir / "a.csv").string()),
            0);
  EXPECT_EQ(run_cli("run --config " + c + " --data " + d + " --out " + (dir / "b.csv").string()),
            0);
  EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
  EXPECT_EQ(run_cli("run --config " + c + " --no-filter --out " + (dir / "u.csv").string()), 0);

  // Unknown key in the configuration.
  std::ofstream(dir / "bad.json") << "{\"name\": \"acc\"}";
  EXPECT_EQ(run_cli("run --config " + (dir / "bad.json").string() + " --data " + d +
                    " --out " + (dir / "x.csv").string()),
            2);
  EXPECT_EQ(run_cli("frobnicate"), 2);

  // Constant excitation cannot be persistently exciting.
  std::ofstream flat(dir / "flat.csv");
  flat << "k,u_0,y_0\n";
  for (int k = 0; k < 300; ++k) flat << k << ",1,0\n";
  flat.close();
  EXPECT_EQ(run_cli("check --config " + c + " --data " + (dir / "flat.csv").string()), 4);
}

TEST(CliTest, InfeasibleRunExitsWithThree) {
  const fs::path dir = scratch_dir("cli_infeasible");
  scenarios::ScenarioConfig cfg = scenarios::build_acc(0).config;
  cfg.run.steps = 5;
  save_config(cfg, dir / "acc.json");
  // A terminal point that no trajectory can hold.
  scenarios::ScenarioConfig bad = cfg;
  bad.terminal.u_s = VectorXd::Constant(1, 1500.0);
  save_config(bad, dir / "bad_terminal.json");
  const std::string d = (dir / "data.csv").string();
  ASSERT_EQ(run_cli("collect --config " + (dir / "acc.json").string() + " --out " + d), 0);
  EXPECT_EQ(run_cli("run --config " + (dir / "bad_terminal.json").string() + " --data " + d +
                    " --out " + (dir / "x.csv").string()),
            3);
}

}  // namespace
}  // namespace io
}  // namespace ddsf
