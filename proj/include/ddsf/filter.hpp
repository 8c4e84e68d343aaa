#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ddsf/constraints.hpp"
#include "ddsf/errors.hpp"
#include "ddsf/qp.hpp"
#include "ddsf/trajectory.hpp"

namespace ddsf {

struct FilterConfig {
  Eigen::Index N_p{0};
  Eigen::Index T_ini{0};
  Eigen::MatrixXd R;
  TerminalSet terminal;
  Polytope u_set;
  Polytope y_set;
  qp::QpSettings qp_settings;

  /// Window length of the bound dataset, N_p + 2 T_ini.
  Eigen::Index window_length() const { return N_p + 2 * T_ini; }
};

/// Checks N_p >= T_ini > 0, R symmetric positive definite and that every
/// dimension agrees with the Hankel data. Throws ConfigError/DimensionError.
void validate(const FilterConfig& cfg, const HankelPair& h);

struct FilterState {
  InitWindow window;
  long step_index{0};
};

struct FilterStep {
  Eigen::VectorXd u_safe;
  Eigen::VectorXd alpha;
  /// Backup trajectory: N_p predicted samples followed by T_ini terminal ones.
  Trajectory predicted;
  qp::QpStatus status{qp::QpStatus::MaxIterations};
  double intervention{0.0};
  int qp_iterations{0};
  qp::KktResiduals residuals;
  std::string diagnostic;
};

/**
 * Safety-filter program over the Hankel coefficients alpha alone:
 *
 *   min  ||Hu_0 alpha - u_l||_R^2
 *   s.t. past block rows of [Hu; Hy] alpha = measured window
 *        terminal block rows of [Hu; Hy] alpha = (u_s, y_s) repeated
 *        u_set / y_set rows on each of the N_p predicted steps
 *
 * Hu_0 are the input rows of the first predicted step. The cost is written
 * as 1/2 a' P a + q' a, so the QP objective equals the intervention minus
 * u_l' R u_l.
 */
qp::QpProblem assemble_qp(const HankelPair& h, const FilterConfig& cfg,
                          const InitWindow& window, const Eigen::VectorXd& u_l);

/// Program data prepared once per dataset and configuration. The program
/// is solved over alpha = V beta, V an orthonormal basis of the row space
/// of [Hu; Hy]; status and residuals refer to the program in alpha.
class FilterSolver {
 public:
  FilterSolver(const HankelPair& h, const FilterConfig& cfg);

  FilterStep step(const FilterState& state, const Eigen::VectorXd& u_l,
                  const qp::InitialIterate* start = nullptr) const;

  Eigen::Index reduced_dimension() const { return basis_.cols(); }

 private:
  HankelPair h_;
  FilterConfig cfg_;
  Eigen::MatrixXd basis_;
  Eigen::MatrixXd RH0_;
  qp::QpProblem full_;
  qp::QpProblem reduced_;
};

/// Solves the program for one proposed input. Pure in all arguments.
FilterStep filter_step(const HankelPair& h, const FilterConfig& cfg,
                       const FilterState& state, const Eigen::VectorXd& u_l,
                       const qp::InitialIterate* start = nullptr);

FilterState advance(const FilterState& state, const Eigen::VectorXd& applied_u,
                    const Eigen::VectorXd& measured_y);

/// Raised by run_loop when the program is infeasible (or unsolved) at some
/// step. Carries the shifted backup input from the previous step.
class FilterFailure : public Error {
 public:
  FilterFailure(const std::string& what, long step, qp::QpStatus status,
                qp::KktResiduals residuals,
                std::optional<Eigen::VectorXd> fallback_input)
      : Error(what),
        step_(step),
        status_(status),
        residuals_(residuals),
        fallback_(std::move(fallback_input)) {}

  long step() const { return step_; }
  qp::QpStatus status() const { return status_; }
  const qp::KktResiduals& residuals() const { return residuals_; }
  const std::optional<Eigen::VectorXd>& fallback_input() const {
    return fallback_;
  }

 private:
  long step_;
  qp::QpStatus status_;
  qp::KktResiduals residuals_;
  std::optional<Eigen::VectorXd> fallback_;
};

/// Applies an input to the real plant and returns the measured output.
using PlantInterface = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct LoopResult {
  std::vector<FilterStep> steps;
  /// Applied inputs and measured outputs.
  Trajectory log;
  FilterState final_state;
};

/// Receding-horizon loop: one column of learning_inputs per step. Throws
/// FilterFailure on a step that does not return Optimal.
LoopResult run_loop(const PlantInterface& plant, const HankelPair& h,
                    const FilterConfig& cfg, FilterState initial,
                    const Eigen::MatrixXd& learning_inputs);

}  // namespace ddsf
