#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "ddsf/scenarios.hpp"
#include "ddsf/trajectory.hpp"

namespace ddsf::io {

/// JSON object with the ScenarioConfig field names. Unknown keys, missing
/// keys and wrong types raise ConfigError.
scenarios::ScenarioConfig config_from_json(const std::string& text);
std::string config_to_json(const scenarios::ScenarioConfig& cfg);

scenarios::ScenarioConfig load_config(const std::filesystem::path& path);
void save_config(const scenarios::ScenarioConfig& cfg,
                 const std::filesystem::path& path);

/// CSV with header k,u_0..u_{m-1},y_0..y_{p-1}; LF line endings.
void write_dataset(std::ostream& out, const Trajectory& data);
Trajectory read_dataset(std::istream& in);
void save_dataset(const Trajectory& data, const std::filesystem::path& path);
Trajectory load_dataset(const std::filesystem::path& path);

/// CSV with header t,u_learn_*,u_safe_*,y_*,intervention,qp_status,qp_iters.
void write_run_log(std::ostream& out, const scenarios::RunLog& log);
void save_run_log(const scenarios::RunLog& log, const std::filesystem::path& path);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace ddsf::io
