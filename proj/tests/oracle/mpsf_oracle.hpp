#pragma once

#include <Eigen/Dense>

#include "ddsf/filter.hpp"
#include "ddsf/lti.hpp"
#include "ddsf/qp.hpp"
#include "ddsf/trajectory.hpp"

namespace ddsf::oracle {

struct OracleProblem {
  lti::DiscreteSystem sys;
  Eigen::VectorXd x0;
  FilterConfig cfg;
  Eigen::VectorXd u_l;
};

struct OracleResult {
  Eigen::VectorXd u_safe;
  /// N_p + T_ini predicted samples starting at the current time.
  Trajectory predicted;
  qp::QpStatus status{qp::QpStatus::MaxIterations};
  qp::KktResiduals residuals;
};

/// Model-based filter over the input sequence u_0..u_{N_p+T_ini-1} with the
/// states eliminated: same cost and boxes as the data-driven program, the
/// state at N_p pinned to the steady state x_s of (u_s, y_s) and the last
/// T_ini samples pinned to (u_s, y_s). sys must be delay free.
qp::QpProblem oracle_qp(const OracleProblem& prob);
OracleResult oracle_filter(const OracleProblem& prob);

}  // namespace ddsf::oracle
