#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ddsf/constraints.hpp"
#include "ddsf/filter.hpp"
#include "ddsf/lti.hpp"
#include "ddsf/qp.hpp"
#include "ddsf/trajectory.hpp"

namespace ddsf::scenarios {

struct DatasetSpec {
  Eigen::Index length{0};
  /// Excitation amplitude as a fraction of the input box half-width.
  double amplitude{1.0};
  std::uint64_t seed{0};
  /// "none" (open loop) or "lqr" (excitation added to a stabilizing state
  /// feedback that only the experiment harness sees).
  std::string feedback{"none"};

  friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

struct Bounds {
  Eigen::VectorXd u_min;
  Eigen::VectorXd u_max;
  Eigen::VectorXd y_min;
  Eigen::VectorXd y_max;

  friend bool operator==(const Bounds& a, const Bounds& b) {
    return a.u_min == b.u_min && a.u_max == b.u_max && a.y_min == b.y_min &&
           a.y_max == b.y_max;
  }
};

struct LearningSpec {
  /// "prbs" (binary sign times uniform magnitude) or "uniform".
  std::string kind{"prbs"};
  /// Fraction of the input box half-width.
  double amplitude{1.0};

  friend bool operator==(const LearningSpec&, const LearningSpec&) = default;
};

struct RunSpec {
  Eigen::Index steps{0};
  LearningSpec learning;
  std::uint64_t seed{0};

  friend bool operator==(const RunSpec&, const RunSpec&) = default;
};

struct ScenarioConfig {
  std::string name;
  double Ts{0.1};
  int delay_steps{0};
  Eigen::Index N_p{0};
  Eigen::Index T_ini{0};
  /// Upper bound on the plant order, used only by the data checks.
  Eigen::Index order_bound{0};
  DatasetSpec dataset;
  Bounds bounds;
  Eigen::VectorXd R;
  TerminalSet terminal;
  RunSpec run;
  qp::QpSettings qp;

  Eigen::Index window_length() const { return N_p + 2 * T_ini; }
};

bool operator==(const ScenarioConfig& a, const ScenarioConfig& b);

/// Throws ConfigError when the configuration is inconsistent.
void validate(const ScenarioConfig& cfg);

struct Scenario {
  lti::ContinuousSystem model;
  ScenarioConfig config;
};

/// Linearized 6-DOF quadrotor about hover, outputs (phi, theta, psi, x, y, z).
Scenario build_quadrotor();

/// Relative distance between two cars driven through an input delay.
Scenario build_acc(int delay_steps);

/// Continuous model selected by cfg.name.
lti::ContinuousSystem model_for(const ScenarioConfig& cfg);

/// Sampled plant including the configured input delay.
lti::DiscreteSystem plant_for(const ScenarioConfig& cfg);

/// Pseudo-random binary signs (one 31-bit LFSR per channel) times
/// Uniform(0, 1] magnitudes, scaled per channel and clipped to [lower, upper].
Eigen::MatrixXd prbs(Eigen::Index channels, Eigen::Index length,
                     const Eigen::VectorXd& amplitude, std::uint64_t seed,
                     const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);

/// Independent Uniform[lower, upper) samples per channel.
Eigen::MatrixXd uniform_inputs(const Eigen::VectorXd& lower,
                               const Eigen::VectorXd& upper, Eigen::Index length,
                               std::uint64_t seed);

/// Learning signal for the closed-loop run (cfg.run).
Eigen::MatrixXd learning_inputs(const ScenarioConfig& cfg);

/// Infinite-horizon discrete LQR gain (u = -K x).
Eigen::MatrixXd dlqr(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                     const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R);

struct DatasetReport {
  PeReport pe;
  Eigen::Index pe_order{0};
  Eigen::Index stacked_rank{0};
  /// stacked_rank - m L.
  Eigen::Index order_estimate{0};
  /// Worst span residual of the record's own windows.
  double self_residual{0.0};
  double terminal_residual{0.0};
};

DatasetReport check_dataset(const ScenarioConfig& cfg, const Trajectory& data);

/// Offline record from the plant under excitation. Throws PeCheckError when
/// the input is not persistently exciting of order L + order_bound.
Trajectory collect_dataset(const ScenarioConfig& cfg);

FilterConfig filter_config(const ScenarioConfig& cfg);

struct RunRecord {
  long t{0};
  Eigen::VectorXd u_learn;
  Eigen::VectorXd u_safe;
  Eigen::VectorXd y;
  double intervention{0.0};
  std::string qp_status;
  int qp_iters{0};
};

struct RunLog {
  std::vector<RunRecord> records;
  /// Backup trajectories, one per filtered step.
  std::vector<FilterStep> steps;
};

/// Plant held at the terminal equilibrium for T_ini steps; returns the
/// plant state reached and the recorded window.
std::pair<lti::PlantState, InitWindow> equilibrium_hold(
    const lti::DiscreteSystem& plant, const TerminalSet& terminal,
    Eigen::Index T_ini);

/// Closed loop with the safety filter. Throws FilterFailure.
RunLog run_scenario(const ScenarioConfig& cfg, const Trajectory& dataset);

/// Same learning signal applied directly to the plant.
RunLog run_unfiltered(const ScenarioConfig& cfg);

/// max over records and channels of the output box excess (<= 0 inside).
double max_output_violation(const ScenarioConfig& cfg, const RunLog& log);
double max_input_violation(const ScenarioConfig& cfg, const RunLog& log);

}  // namespace ddsf::scenarios
