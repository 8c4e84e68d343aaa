// Command-line driver for dataset collection, data checks and closed-loop
// safety-filter runs.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <regex>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ddsf/filter.hpp"
#include "ddsf/io.hpp"
#include "ddsf/scenarios.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitPe = 4;

using ddsf::scenarios::ScenarioConfig;

std::vector<int> parse_delays(const std::string& spec) {
  std::vector<int> out;
  const std::regex range(R"(^\s*(\d+)\s*\.\.\s*(\d+)\s*$)");
  std::smatch mt;
  if (std::regex_match(spec, mt, range)) {
    const int lo = std::stoi(mt[1]);
    const int hi = std::stoi(mt[2]);
    if (lo > hi) throw ddsf::ConfigError("empty delay range '" + spec + "'");
    for (int d = lo; d <= hi; ++d) out.push_back(d);
    return out;
  }
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!std::regex_match(item, std::regex(R"(^\s*\d+\s*$)"))) {
      throw ddsf::ConfigError("bad delay list '" + spec + "'");
    }
    out.push_back(std::stoi(item));
  }
  if (out.empty()) throw ddsf::ConfigError("no delays given");
  return out;
}

int cmd_collect(const std::string& config, const std::string& out) {
  const ScenarioConfig cfg = ddsf::io::load_config(config);
  const ddsf::Trajectory data = ddsf::scenarios::collect_dataset(cfg);
  ddsf::io::save_dataset(data, out);
  std::cout << "collected " << data.length() << " samples (m=" << data.input_dim()
            << ", p=" << data.output_dim() << ") -> " << out << "\n";
  return kExitOk;
}

int cmd_check(const std::string& config, const std::string& data_path) {
  const ScenarioConfig cfg = ddsf::io::load_config(config);
  const ddsf::Trajectory data = ddsf::io::load_dataset(data_path);
  const auto r = ddsf::scenarios::check_dataset(cfg, data);
  const auto L = cfg.window_length();
  std::printf("samples            %ld\n", static_cast<long>(data.length()));
  std::printf("window length L    %ld\n", static_cast<long>(L));
  std::printf("input PE order     %ld: rank %ld / %ld -> %s\n",
              static_cast<long>(r.pe_order), static_cast<long>(r.pe.rank),
              static_cast<long>(r.pe.required), r.pe.is_pe ? "ok" : "FAIL");
  std::printf("stacked rank       %ld (m L = %ld, order estimate %ld, bound %ld)\n",
              static_cast<long>(r.stacked_rank), static_cast<long>(data.input_dim() * L),
              static_cast<long>(r.order_estimate), static_cast<long>(cfg.order_bound));
  std::printf("self span residual %.3e\n", r.self_residual);
  std::printf("terminal residual  %.3e\n", r.terminal_residual);
  return r.pe.is_pe && r.order_estimate <= cfg.order_bound ? kExitOk : kExitPe;
}

int cmd_run(const std::string& config, const std::string& data_path,
            const std::string& out, bool no_filter) {
  const ScenarioConfig cfg = ddsf::io::load_config(config);
  ddsf::scenarios::RunLog log;
  if (no_filter) {
    log = ddsf::scenarios::run_unfiltered(cfg);
  } else {
    const ddsf::Trajectory data = ddsf::io::load_dataset(data_path);
    log = ddsf::scenarios::run_scenario(cfg, data);
  }
  ddsf::io::save_run_log(log, out);
  std::printf("%zu steps, max output excess %.3e -> %s\n", log.records.size(),
              ddsf::scenarios::max_output_violation(cfg, log), out.c_str());
  return kExitOk;
}

int cmd_sweep(const std::string& config, const std::string& delays,
              const std::string& out_dir) {
  const ScenarioConfig base = ddsf::io::load_config(config);
  if (base.name != "acc") throw ddsf::ConfigError("sweep-delay supports the acc scenario only");
  std::filesystem::create_directories(out_dir);
  for (const int d : parse_delays(delays)) {
    ScenarioConfig cfg = base;
    cfg.delay_steps = d;
    ddsf::scenarios::validate(cfg);
    const ddsf::Trajectory data = ddsf::scenarios::collect_dataset(cfg);
    const auto tag = std::to_string(d);
    ddsf::io::save_dataset(data, std::filesystem::path(out_dir) / ("dataset_delay" + tag + ".csv"));
    const auto log = ddsf::scenarios::run_scenario(cfg, data);
    ddsf::io::save_run_log(log, std::filesystem::path(out_dir) / ("run_delay" + tag + ".csv"));
    double peak = 0.0;
    for (const auto& r : log.records) peak = std::max(peak, r.y.cwiseAbs().maxCoeff());
    std::printf("delay %2d steps: max |y| = %.6f\n", d, peak);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data-driven safety filter toolkit"};
  app.require_subcommand(1);

  std::string config;
  std::string out;
  std::string data;
  std::string delays = "1..10";
  bool no_filter = false;

  auto* collect = app.add_subcommand("collect", "record an excitation dataset");
  collect->add_option("--config", config, "scenario JSON")->required();
  collect->add_option("--out", out, "dataset CSV")->required();

  auto* check = app.add_subcommand("check", "excitation and rank diagnostics");
  check->add_option("--data", data, "dataset CSV")->required();
  check->add_option("--config", config, "scenario JSON")->required();

  auto* run = app.add_subcommand("run", "closed-loop run with the safety filter");
  run->add_option("--config", config, "scenario JSON")->required();
  run->add_option("--data", data, "dataset CSV");
  run->add_option("--out", out, "run log CSV")->required();
  run->add_flag("--no-filter", no_filter, "apply the learning input directly");

  auto* sweep = app.add_subcommand("sweep-delay", "acc runs over input delays");
  sweep->add_option("--config", config, "scenario JSON")->required();
  sweep->add_option("--delays", delays, "range a..b or list a,b,c");
  sweep->add_option("--out-dir", out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*collect) return cmd_collect(config, out);
    if (*check) return cmd_check(config, data);
    if (*run) {
      if (!no_filter && data.empty()) {
        throw ddsf::ConfigError("run needs --data unless --no-filter is given");
      }
      return cmd_run(config, data, out, no_filter);
    }
    if (*sweep) return cmd_sweep(config, delays, out);
  } catch (const ddsf::PeCheckError& e) {
    std::cerr << "PE check failed: " << e.what() << "\n";
    return kExitPe;
  } catch (const ddsf::FilterFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (e.fallback_input()) {
      std::cerr << "fallback (shifted backup) input: "
                << e.fallback_input()->transpose() << "\n";
    }
    return kExitInfeasible;
  } catch (const ddsf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ddsf::Error& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
