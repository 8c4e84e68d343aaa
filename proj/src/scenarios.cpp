#include "ddsf/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace ddsf::scenarios {

namespace {

// Table values for the quadrotor.
constexpr double kGravity = 9.81;
constexpr double kQuadMass = 0.2;
constexpr double kInertia = 1e-3;

// Follower car mass for the cruise-control model.
constexpr double kCarMass = 1650.0;

constexpr int kMaxAccDelay = 10;

double unit_open(std::mt19937_64& rng) {
  // (0, 1]
  return 1.0 - static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double unit_closed_open(std::mt19937_64& rng) {
  // [0, 1)
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Fibonacci LFSR with taps 31 and 28.
class Lfsr31 {
 public:
  explicit Lfsr31(std::uint32_t state) : state_(state & 0x7FFFFFFFu) {
    if (state_ == 0) state_ = 1;
  }

  int next_sign() {
    const std::uint32_t bit = ((state_ >> 30) ^ (state_ >> 27)) & 1u;
    state_ = ((state_ << 1) | bit) & 0x7FFFFFFFu;
    return bit ? 1 : -1;
  }

 private:
  std::uint32_t state_;
};

Eigen::VectorXd half_width(const Bounds& b) { return 0.5 * (b.u_max - b.u_min); }
Eigen::VectorXd center(const Bounds& b) { return 0.5 * (b.u_max + b.u_min); }

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

bool operator==(const ScenarioConfig& a, const ScenarioConfig& b) {
  return a.name == b.name && a.Ts == b.Ts && a.delay_steps == b.delay_steps &&
         a.N_p == b.N_p && a.T_ini == b.T_ini && a.order_bound == b.order_bound &&
         a.dataset == b.dataset && a.bounds == b.bounds && a.R == b.R &&
         a.terminal.u_s == b.terminal.u_s && a.terminal.y_s == b.terminal.y_s &&
         a.run == b.run && a.qp.kkt_tol == b.qp.kkt_tol &&
         a.qp.max_iter == b.qp.max_iter && a.qp.reg_eps == b.qp.reg_eps;
}

lti::ContinuousSystem model_for(const ScenarioConfig& cfg) {
  if (cfg.name == "quadrotor") return build_quadrotor().model;
  if (cfg.name == "acc") return build_acc(0).model;
  throw ConfigError("unknown scenario '" + cfg.name + "'");
}

void validate(const ScenarioConfig& cfg) {
  const lti::ContinuousSystem model = model_for(cfg);
  const Eigen::Index m = model.inputs();
  const Eigen::Index p = model.outputs();
  require(cfg.Ts > 0.0, "Ts must be positive");
  require(cfg.delay_steps >= 0, "delay_steps must be nonnegative");
  if (cfg.name == "acc") {
    require(cfg.delay_steps <= kMaxAccDelay, "acc delay_steps must be in 0..10");
  }
  require(cfg.T_ini >= 1, "T_ini must be at least 1");
  require(cfg.N_p >= cfg.T_ini, "N_p must not be shorter than T_ini");
  require(cfg.order_bound >= 1, "order_bound must be positive");
  require(cfg.dataset.length >= cfg.window_length(),
          "dataset length must be at least N_p + 2 T_ini");
  require(cfg.dataset.amplitude > 0.0, "dataset amplitude must be positive");
  require(cfg.dataset.feedback == "none" || cfg.dataset.feedback == "lqr",
          "dataset feedback must be 'none' or 'lqr'");
  require(cfg.bounds.u_min.size() == m && cfg.bounds.u_max.size() == m,
          "input bounds must have " + std::to_string(m) + " entries");
  require(cfg.bounds.y_min.size() == p && cfg.bounds.y_max.size() == p,
          "output bounds must have " + std::to_string(p) + " entries");
  require((cfg.bounds.u_min.array() <= cfg.bounds.u_max.array()).all() &&
              (cfg.bounds.y_min.array() <= cfg.bounds.y_max.array()).all(),
          "bounds must satisfy min <= max");
  require(cfg.R.size() == m && (cfg.R.array() > 0.0).all(),
          "R must list " + std::to_string(m) + " positive weights");
  require(cfg.terminal.u_s.size() == m && cfg.terminal.y_s.size() == p,
          "terminal point has wrong dimensions");
  require(cfg.run.steps >= 0, "run steps must be nonnegative");
  require(cfg.run.learning.kind == "prbs" || cfg.run.learning.kind == "uniform",
          "learning kind must be 'prbs' or 'uniform'");
  require(cfg.run.learning.amplitude >= 0.0, "learning amplitude must be >= 0");
  require(cfg.qp.kkt_tol > 0.0 && cfg.qp.max_iter > 0 && cfg.qp.reg_eps >= 0.0,
          "invalid qp settings");
}

Scenario build_quadrotor() {
  Scenario s;
  auto& sys = s.model;
  // State (phi, theta, psi, p, q, r, u, v, w, x, y, z); 1-based entries below.
  sys.A = Eigen::MatrixXd::Zero(12, 12);
  sys.B = Eigen::MatrixXd::Zero(12, 4);
  auto A = [&](int i, int j, double v) { sys.A(i - 1, j - 1) = v; };
  auto B = [&](int i, int j, double v) { sys.B(i - 1, j - 1) = v; };
  A(1, 4, 1.0);
  A(2, 5, 1.0);
  A(3, 6, 1.0);
  A(10, 7, 1.0);
  A(11, 8, 1.0);
  A(12, 9, 1.0);
  A(8, 1, kGravity);
  A(7, 2, -kGravity);
  B(9, 1, 1.0 / kQuadMass);
  B(4, 2, 1.0 / kInertia);
  B(5, 3, 1.0 / kInertia);
  B(6, 4, 1.0 / kInertia);
  sys.C = Eigen::MatrixXd::Zero(6, 12);
  const int measured[6] = {0, 1, 2, 9, 10, 11};
  for (int k = 0; k < 6; ++k) sys.C(k, measured[k]) = 1.0;
  sys.D = Eigen::MatrixXd::Zero(6, 4);

  auto& c = s.config;
  c.name = "quadrotor";
  c.Ts = 0.1;
  c.delay_steps = 0;
  c.N_p = 20;
  c.T_ini = 2;
  c.order_bound = 12;
  c.dataset = {400, 0.1, 1, "lqr"};
  c.bounds.u_min = (Eigen::VectorXd(4) << -1.0, -0.1, -0.1, -0.1).finished();
  c.bounds.u_max = -c.bounds.u_min;
  c.bounds.y_min = (Eigen::VectorXd(6) << -0.2, -0.2, -0.2, -1.0, -1.0, -1.0).finished();
  c.bounds.y_max = -c.bounds.y_min;
  c.R = Eigen::VectorXd::Ones(4);
  c.terminal = {Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(6)};
  c.run = {300, {"prbs", 1.0}, 2};
  return s;
}

Scenario build_acc(int delay_steps) {
  if (delay_steps < 0 || delay_steps > kMaxAccDelay) {
    throw InvalidArgument("acc delay must be in 0..10 steps");
  }
  Scenario s;
  auto& sys = s.model;
  sys.A = (Eigen::MatrixXd(2, 2) << 0.0, 1.0, 0.0, 0.0).finished();
  sys.B = (Eigen::MatrixXd(2, 1) << 0.0, 1.0 / kCarMass).finished();
  sys.C = (Eigen::MatrixXd(1, 2) << 1.0, 0.0).finished();
  sys.D = Eigen::MatrixXd::Zero(1, 1);

  auto& c = s.config;
  c.name = "acc";
  c.Ts = 0.2;
  c.delay_steps = delay_steps;
  c.N_p = 15;
  c.T_ini = 15;
  c.order_bound = 2 + kMaxAccDelay;
  c.dataset = {300, 0.5, 1, "none"};
  c.bounds.u_min = Eigen::VectorXd::Constant(1, -2000.0);
  c.bounds.u_max = Eigen::VectorXd::Constant(1, 2000.0);
  c.bounds.y_min = Eigen::VectorXd::Constant(1, -1.0);
  c.bounds.y_max = Eigen::VectorXd::Constant(1, 1.0);
  c.R = Eigen::VectorXd::Constant(1, 1e-6);
  c.terminal = {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)};
  c.run = {200, {"uniform", 1.0}, 2};
  return s;
}

lti::DiscreteSystem plant_for(const ScenarioConfig& cfg) {
  lti::DiscreteSystem d = lti::discretize_zoh(model_for(cfg), cfg.Ts);
  d.delay_steps = cfg.delay_steps;
  return d;
}

Eigen::MatrixXd prbs(Eigen::Index channels, Eigen::Index length,
                     const Eigen::VectorXd& amplitude, std::uint64_t seed,
                     const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  if (length <= 0) throw InvalidArgument("prbs length must be positive");
  if (amplitude.size() != channels || lower.size() != channels ||
      upper.size() != channels) {
    throw DimensionError("prbs amplitude/bounds size mismatch");
  }
  std::mt19937_64 rng(seed);
  std::vector<Lfsr31> regs;
  regs.reserve(static_cast<size_t>(channels));
  for (Eigen::Index c = 0; c < channels; ++c) {
    regs.emplace_back(static_cast<std::uint32_t>(rng() >> 33));
  }
  Eigen::MatrixXd out(channels, length);
  for (Eigen::Index k = 0; k < length; ++k) {
    for (Eigen::Index c = 0; c < channels; ++c) {
      const double v = amplitude(c) * regs[static_cast<size_t>(c)].next_sign() *
                       unit_open(rng);
      out(c, k) = std::clamp(v, lower(c), upper(c));
    }
  }
  return out;
}

Eigen::MatrixXd uniform_inputs(const Eigen::VectorXd& lower,
                               const Eigen::VectorXd& upper, Eigen::Index length,
                               std::uint64_t seed) {
  if (lower.size() != upper.size()) throw DimensionError("bound sizes differ");
  std::mt19937_64 rng(seed);
  Eigen::MatrixXd out(lower.size(), length);
  for (Eigen::Index k = 0; k < length; ++k) {
    for (Eigen::Index c = 0; c < lower.size(); ++c) {
      out(c, k) = lower(c) + (upper(c) - lower(c)) * unit_closed_open(rng);
    }
  }
  return out;
}

Eigen::MatrixXd learning_inputs(const ScenarioConfig& cfg) {
  const Eigen::VectorXd hw = half_width(cfg.bounds) * cfg.run.learning.amplitude;
  const Eigen::VectorXd mid = center(cfg.bounds);
  if (cfg.run.steps == 0) return Eigen::MatrixXd(hw.size(), 0);
  if (cfg.run.learning.kind == "uniform") {
    return uniform_inputs(mid - hw, mid + hw, cfg.run.steps, cfg.run.seed);
  }
  Eigen::MatrixXd u = prbs(hw.size(), cfg.run.steps, hw, cfg.run.seed,
                           cfg.bounds.u_min - mid, cfg.bounds.u_max - mid);
  return u.colwise() + mid;
}

Eigen::MatrixXd dlqr(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                     const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R) {
  Eigen::MatrixXd P = Q;
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(B.cols(), A.rows());
  for (int it = 0; it < 100000; ++it) {
    const Eigen::MatrixXd S = R + B.transpose() * P * B;
    K = S.ldlt().solve(B.transpose() * P * A);
    Eigen::MatrixXd next = Q + A.transpose() * P * (A - B * K);
    next = 0.5 * (next + next.transpose());
    const double change = (next - P).lpNorm<Eigen::Infinity>();
    P = std::move(next);
    if (change <= 1e-12 * std::max(1.0, P.lpNorm<Eigen::Infinity>())) break;
  }
  const Eigen::MatrixXd S = R + B.transpose() * P * B;
  return S.ldlt().solve(B.transpose() * P * A);
}

DatasetReport check_dataset(const ScenarioConfig& cfg, const Trajectory& data) {
  const Eigen::Index L = cfg.window_length();
  DatasetReport r;
  r.pe_order = L + cfg.order_bound;
  r.pe = pe_order_check(data.inputs(), r.pe_order);
  const HankelPair h = build_hankel(data, L);
  r.stacked_rank = stacked_rank(h);
  r.order_estimate = r.stacked_rank - h.m * L;
  const Eigen::Index cols = h.columns();
  for (Eigen::Index j : {Eigen::Index{0}, cols / 4, cols / 2, (3 * cols) / 4, cols - 1}) {
    r.self_residual = std::max(r.self_residual, span_residual(h, data.slice(j, L)));
  }
  r.terminal_residual = validate_terminal(cfg.terminal, h, cfg.T_ini);
  return r;
}

Trajectory collect_dataset(const ScenarioConfig& cfg) {
  validate(cfg);
  const lti::DiscreteSystem plant = plant_for(cfg);
  const Eigen::Index m = plant.inputs();
  const Eigen::VectorXd mid = center(cfg.bounds);
  const Eigen::VectorXd amp = half_width(cfg.bounds) * cfg.dataset.amplitude;
  const Eigen::MatrixXd excitation =
      prbs(m, cfg.dataset.length, amp, cfg.dataset.seed,
           cfg.bounds.u_min - mid, cfg.bounds.u_max - mid);

  lti::PlantState state = lti::initial_state(plant, Eigen::VectorXd::Zero(plant.states()));
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(m, plant.states());
  if (cfg.dataset.feedback == "lqr") {
    K = dlqr(plant.A, plant.B, Eigen::MatrixXd::Identity(plant.states(), plant.states()),
             10.0 * Eigen::MatrixXd::Identity(m, m));
  }
  Trajectory data;
  for (Eigen::Index k = 0; k < cfg.dataset.length; ++k) {
    const Eigen::VectorXd u = mid + excitation.col(k) - K * state.x;
    const Eigen::VectorXd y = lti::step_inplace(state, plant, u);
    data.push_back(u, y);
  }

  const Eigen::Index order = cfg.window_length() + cfg.order_bound;
  if (cfg.dataset.length < order) {
    throw PeCheckError("dataset shorter than excitation order", 0, m * order);
  }
  const PeReport pe = pe_order_check(data.inputs(), order);
  if (!pe.is_pe) {
    throw PeCheckError("input is not persistently exciting of order " +
                           std::to_string(order) + ": rank " +
                           std::to_string(pe.rank) + " < " +
                           std::to_string(pe.required),
                       static_cast<long>(pe.rank), static_cast<long>(pe.required));
  }
  return data;
}

FilterConfig filter_config(const ScenarioConfig& cfg) {
  FilterConfig f;
  f.N_p = cfg.N_p;
  f.T_ini = cfg.T_ini;
  f.R = cfg.R.asDiagonal();
  f.terminal = cfg.terminal;
  f.u_set = box(cfg.bounds.u_min, cfg.bounds.u_max);
  f.y_set = box(cfg.bounds.y_min, cfg.bounds.y_max);
  f.qp_settings = cfg.qp;
  return f;
}

std::pair<lti::PlantState, InitWindow> equilibrium_hold(
    const lti::DiscreteSystem& plant, const TerminalSet& terminal,
    Eigen::Index T_ini) {
  lti::PlantState state =
      lti::initial_state(plant, lti::steady_state(plant, terminal.u_s, terminal.y_s));
  for (auto& u : state.delay_buffer) u = terminal.u_s;
  Trajectory held;
  for (Eigen::Index k = 0; k < T_ini; ++k) {
    held.push_back(terminal.u_s, lti::step_inplace(state, plant, terminal.u_s));
  }
  return {std::move(state), InitWindow(std::move(held))};
}

RunLog run_scenario(const ScenarioConfig& cfg, const Trajectory& dataset) {
  validate(cfg);
  const lti::DiscreteSystem plant = plant_for(cfg);
  if (dataset.input_dim() != plant.inputs() || dataset.output_dim() != plant.outputs()) {
    throw DimensionError("dataset dimensions do not match scenario");
  }
  const HankelPair h = build_hankel(dataset, cfg.window_length());
  const FilterConfig fcfg = filter_config(cfg);
  auto [state, window] = equilibrium_hold(plant, cfg.terminal, cfg.T_ini);
  const Eigen::MatrixXd learn = learning_inputs(cfg);

  PlantInterface apply = [&plant, &state](const Eigen::VectorXd& u) {
    return lti::step_inplace(state, plant, u);
  };
  LoopResult loop = run_loop(apply, h, fcfg, FilterState{window, 0}, learn);

  RunLog log;
  log.records.reserve(loop.steps.size());
  for (size_t k = 0; k < loop.steps.size(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    const FilterStep& fs = loop.steps[k];
    log.records.push_back({static_cast<long>(k), learn.col(kk), fs.u_safe,
                           loop.log.output(kk), fs.intervention,
                           std::string(qp::to_string(fs.status)), fs.qp_iterations});
  }
  log.steps = std::move(loop.steps);
  return log;
}

RunLog run_unfiltered(const ScenarioConfig& cfg) {
  validate(cfg);
  const lti::DiscreteSystem plant = plant_for(cfg);
  auto [state, window] = equilibrium_hold(plant, cfg.terminal, cfg.T_ini);
  const Eigen::MatrixXd learn = learning_inputs(cfg);
  RunLog log;
  for (Eigen::Index k = 0; k < learn.cols(); ++k) {
    const Eigen::VectorXd y = lti::step_inplace(state, plant, learn.col(k));
    log.records.push_back(
        {static_cast<long>(k), learn.col(k), learn.col(k), y, 0.0, "unfiltered", 0});
  }
  return log;
}

double max_output_violation(const ScenarioConfig& cfg, const RunLog& log) {
  const Polytope ybox = box(cfg.bounds.y_min, cfg.bounds.y_max);
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& r : log.records) worst = std::max(worst, violation(ybox, r.y));
  return worst;
}

double max_input_violation(const ScenarioConfig& cfg, const RunLog& log) {
  const Polytope ubox = box(cfg.bounds.u_min, cfg.bounds.u_max);
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& r : log.records) worst = std::max(worst, violation(ubox, r.u_safe));
  return worst;
}

}  // namespace ddsf::scenarios
