#include "ddsf/io.hpp"

#include <charconv>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <vector>

#include "json.hpp"

namespace ddsf::io {

namespace {

using json = nlohmann::json;
using scenarios::ScenarioConfig;

void expect_keys(const json& j, const std::string& where,
                 std::initializer_list<const char*> required,
                 std::initializer_list<const char*> optional = {}) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  std::set<std::string> known;
  for (const char* k : required) {
    known.insert(k);
    if (!j.contains(k)) throw ConfigError(where + ": missing key '" + k + "'");
  }
  for (const char* k : optional) known.insert(k);
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) {
      throw ConfigError(where + ": unknown key '" + item.key() + "'");
    }
  }
}

double get_double(const json& j, const char* key, const std::string& where) {
  const json& v = j.at(key);
  if (!v.is_number()) throw ConfigError(where + "." + key + " must be a number");
  return v.get<double>();
}

long long get_int(const json& j, const char* key, const std::string& where) {
  const json& v = j.at(key);
  if (!v.is_number_integer()) {
    throw ConfigError(where + "." + key + " must be an integer");
  }
  return v.get<long long>();
}

std::uint64_t get_seed(const json& j, const char* key, const std::string& where) {
  const json& v = j.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    throw ConfigError(where + "." + key + " must be a nonnegative integer");
  }
  return v.get<std::uint64_t>();
}

std::string get_string(const json& j, const char* key, const std::string& where) {
  const json& v = j.at(key);
  if (!v.is_string()) throw ConfigError(where + "." + key + " must be a string");
  return v.get<std::string>();
}

Eigen::VectorXd get_vector(const json& j, const char* key, const std::string& where) {
  const json& v = j.at(key);
  if (!v.is_array()) throw ConfigError(where + "." + key + " must be an array");
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) {
      throw ConfigError(where + "." + key + " must contain numbers only");
    }
    out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
  }
  return out;
}

json to_array(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, size_t line) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw InvalidArgument("dataset line " + std::to_string(line) +
                          ": cannot parse '" + s + "'");
  }
  return v;
}

void write_vector(std::ostream& out, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) out << ',' << format_double(v(i));
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error("number formatting failed");
  return std::string(buf, ptr);
}

ScenarioConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  const std::string root = "config";
  expect_keys(j, root,
              {"name", "Ts", "delay_steps", "N_p", "T_ini", "order_bound", "dataset",
               "bounds", "R", "terminal", "run"},
              {"qp"});
  ScenarioConfig c;
  c.name = get_string(j, "name", root);
  c.Ts = get_double(j, "Ts", root);
  c.delay_steps = static_cast<int>(get_int(j, "delay_steps", root));
  c.N_p = get_int(j, "N_p", root);
  c.T_ini = get_int(j, "T_ini", root);
  c.order_bound = get_int(j, "order_bound", root);

  const json& ds = j.at("dataset");
  expect_keys(ds, "dataset", {"length", "amplitude", "seed", "feedback"});
  c.dataset.length = get_int(ds, "length", "dataset");
  c.dataset.amplitude = get_double(ds, "amplitude", "dataset");
  c.dataset.seed = get_seed(ds, "seed", "dataset");
  c.dataset.feedback = get_string(ds, "feedback", "dataset");

  const json& b = j.at("bounds");
  expect_keys(b, "bounds", {"u_min", "u_max", "y_min", "y_max"});
  c.bounds.u_min = get_vector(b, "u_min", "bounds");
  c.bounds.u_max = get_vector(b, "u_max", "bounds");
  c.bounds.y_min = get_vector(b, "y_min", "bounds");
  c.bounds.y_max = get_vector(b, "y_max", "bounds");

  c.R = get_vector(j, "R", root);

  const json& t = j.at("terminal");
  expect_keys(t, "terminal", {"u_s", "y_s"});
  c.terminal.u_s = get_vector(t, "u_s", "terminal");
  c.terminal.y_s = get_vector(t, "y_s", "terminal");

  const json& r = j.at("run");
  expect_keys(r, "run", {"steps", "learning", "seed"});
  c.run.steps = get_int(r, "steps", "run");
  c.run.seed = get_seed(r, "seed", "run");
  const json& l = r.at("learning");
  expect_keys(l, "run.learning", {"kind", "amplitude"});
  c.run.learning.kind = get_string(l, "kind", "run.learning");
  c.run.learning.amplitude = get_double(l, "amplitude", "run.learning");

  if (j.contains("qp")) {
    const json& q = j.at("qp");
    expect_keys(q, "qp", {}, {"kkt_tol", "max_iter", "reg_eps"});
    if (q.contains("kkt_tol")) c.qp.kkt_tol = get_double(q, "kkt_tol", "qp");
    if (q.contains("max_iter")) {
      c.qp.max_iter = static_cast<int>(get_int(q, "max_iter", "qp"));
    }
    if (q.contains("reg_eps")) c.qp.reg_eps = get_double(q, "reg_eps", "qp");
  }
  scenarios::validate(c);
  return c;
}

std::string config_to_json(const ScenarioConfig& c) {
  json j;
  j["name"] = c.name;
  j["Ts"] = c.Ts;
  j["delay_steps"] = c.delay_steps;
  j["N_p"] = c.N_p;
  j["T_ini"] = c.T_ini;
  j["order_bound"] = c.order_bound;
  j["dataset"] = {{"length", c.dataset.length},
                  {"amplitude", c.dataset.amplitude},
                  {"seed", c.dataset.seed},
                  {"feedback", c.dataset.feedback}};
  j["bounds"] = {{"u_min", to_array(c.bounds.u_min)},
                 {"u_max", to_array(c.bounds.u_max)},
                 {"y_min", to_array(c.bounds.y_min)},
                 {"y_max", to_array(c.bounds.y_max)}};
  j["R"] = to_array(c.R);
  j["terminal"] = {{"u_s", to_array(c.terminal.u_s)},
                   {"y_s", to_array(c.terminal.y_s)}};
  j["run"] = {{"steps", c.run.steps},
              {"learning",
               {{"kind", c.run.learning.kind}, {"amplitude", c.run.learning.amplitude}}},
              {"seed", c.run.seed}};
  j["qp"] = {{"kkt_tol", c.qp.kkt_tol},
             {"max_iter", c.qp.max_iter},
             {"reg_eps", c.qp.reg_eps}};
  return j.dump(2) + "\n";
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

void save_config(const ScenarioConfig& cfg, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << config_to_json(cfg);
}

void write_dataset(std::ostream& out, const Trajectory& data) {
  out << 'k';
  for (Eigen::Index i = 0; i < data.input_dim(); ++i) out << ",u_" << i;
  for (Eigen::Index i = 0; i < data.output_dim(); ++i) out << ",y_" << i;
  out << '\n';
  for (Eigen::Index k = 0; k < data.length(); ++k) {
    out << k;
    write_vector(out, data.inputs().col(k));
    write_vector(out, data.outputs().col(k));
    out << '\n';
  }
}

Trajectory read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("dataset is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv(line);
  if (header.empty() || header[0] != "k") {
    throw InvalidArgument("dataset header must start with 'k'");
  }
  Eigen::Index m = 0;
  Eigen::Index p = 0;
  for (size_t i = 1; i < header.size(); ++i) {
    if (header[i] == "u_" + std::to_string(m) && p == 0) {
      ++m;
    } else if (header[i] == "y_" + std::to_string(p)) {
      ++p;
    } else {
      throw InvalidArgument("unexpected dataset column '" + header[i] + "'");
    }
  }
  if (m == 0 || p == 0) throw InvalidArgument("dataset needs inputs and outputs");

  std::vector<double> values;
  Eigen::Index rows = 0;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) {
      throw InvalidArgument("dataset line " + std::to_string(lineno) +
                            " has wrong number of fields");
    }
    if (parse_double(cells[0], lineno) != static_cast<double>(rows)) {
      throw InvalidArgument("dataset line " + std::to_string(lineno) +
                            ": sample index out of sequence");
    }
    for (size_t i = 1; i < cells.size(); ++i) {
      values.push_back(parse_double(cells[i], lineno));
    }
    ++rows;
  }
  if (rows == 0) throw InvalidArgument("dataset has no samples");
  Eigen::MatrixXd U(m, rows);
  Eigen::MatrixXd Y(p, rows);
  const Eigen::Index width = m + p;
  for (Eigen::Index k = 0; k < rows; ++k) {
    for (Eigen::Index i = 0; i < m; ++i) U(i, k) = values[static_cast<size_t>(k * width + i)];
    for (Eigen::Index i = 0; i < p; ++i) {
      Y(i, k) = values[static_cast<size_t>(k * width + m + i)];
    }
  }
  return Trajectory(std::move(U), std::move(Y));
}

void save_dataset(const Trajectory& data, const std::filesystem::path& path) {
  auto out = open_out(path);
  write_dataset(out, data);
}

Trajectory load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open dataset '" + path.string() + "'");
  return read_dataset(in);
}

void write_run_log(std::ostream& out, const scenarios::RunLog& log) {
  const auto& recs = log.records;
  const Eigen::Index m = recs.empty() ? 0 : recs.front().u_learn.size();
  const Eigen::Index p = recs.empty() ? 0 : recs.front().y.size();
  out << 't';
  for (Eigen::Index i = 0; i < m; ++i) out << ",u_learn_" << i;
  for (Eigen::Index i = 0; i < m; ++i) out << ",u_safe_" << i;
  for (Eigen::Index i = 0; i < p; ++i) out << ",y_" << i;
  out << ",intervention,qp_status,qp_iters\n";
  for (const auto& r : recs) {
    out << r.t;
    write_vector(out, r.u_learn);
    write_vector(out, r.u_safe);
    write_vector(out, r.y);
    out << ',' << format_double(r.intervention) << ',' << r.qp_status << ','
        << r.qp_iters << '\n';
  }
}

void save_run_log(const scenarios::RunLog& log, const std::filesystem::path& path) {
  auto out = open_out(path);
  write_run_log(out, log);
}

}  // namespace ddsf::io
