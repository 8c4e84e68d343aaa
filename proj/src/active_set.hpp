#pragma once

#include <Eigen/Dense>

namespace ddsf::qp::detail {

enum class DualActiveSetStatus { Optimal, Infeasible, Failed };

struct DualActiveSetResult {
  DualActiveSetStatus status{DualActiveSetStatus::Failed};
  Eigen::VectorXd x;
  Eigen::VectorXd lambda_eq;  // P x + q + A_eq' lambda_eq + G' mu = 0
  Eigen::VectorXd mu_in;
  int iterations{0};
};

/// Goldfarb-Idnani dual active-set method for
///   min 1/2 x'Px + q'x  s.t.  A_eq x = b_eq,  G x <= h
/// with P positive definite.
DualActiveSetResult dual_active_set(const Eigen::MatrixXd& P, const Eigen::VectorXd& q,
                                    const Eigen::MatrixXd& A_eq, const Eigen::VectorXd& b_eq,
                                    const Eigen::MatrixXd& G, const Eigen::VectorXd& h);

}  // namespace ddsf::qp::detail
