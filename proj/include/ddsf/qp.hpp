#pragma once

#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "ddsf/errors.hpp"

namespace ddsf::qp {

/**
 * Dense convex quadratic program
 *
 *   min  1/2 z' P z + q' z
 *   s.t. A_eq z  = b_eq
 *        G_in z <= h_in
 *
 * Construct through make_problem(), which symmetrizes P exactly and rejects
 * inconsistent dimensions or a P that is not positive semidefinite.
 */
struct QpProblem {
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  Eigen::MatrixXd A_eq;
  Eigen::VectorXd b_eq;
  Eigen::MatrixXd G_in;
  Eigen::VectorXd h_in;

  Eigen::Index num_vars() const { return P.rows(); }
  Eigen::Index num_eq() const { return A_eq.rows(); }
  Eigen::Index num_in() const { return G_in.rows(); }
};

/// Validates and returns a problem. Empty A_eq / G_in may be passed as 0 x n
/// (or fully empty) matrices.
QpProblem make_problem(Eigen::MatrixXd P, Eigen::VectorXd q,
                       Eigen::MatrixXd A_eq, Eigen::VectorXd b_eq,
                       Eigen::MatrixXd G_in, Eigen::VectorXd h_in);

enum class QpStatus { Optimal, Infeasible, MaxIterations };

std::string_view to_string(QpStatus status);

struct QpSettings {
  double kkt_tol{1e-6};
  int max_iter{20000};
  /// Tikhonov term added to P; selects the minimum-norm minimizer when P is
  /// singular.
  double reg_eps{1e-8};

  // Operator-splitting internals.
  double rho{0.1};
  double sigma{1e-6};
  double relaxation{1.6};
  int scaling_iters{10};
  int check_interval{10};
  /// Consecutive checks the infeasibility certificate has to hold for.
  int infeasible_patience{100};
};

struct KktResiduals {
  double stationarity{0.0};
  double primal_eq{0.0};
  double primal_in{0.0};
  double dual_in{0.0};
  double comp_slack{0.0};

  double max() const;
  bool within(double tol) const { return max() <= tol; }
};

struct QpSolution {
  Eigen::VectorXd z;
  Eigen::VectorXd lambda_eq;
  Eigen::VectorXd mu_in;
  QpStatus status{QpStatus::MaxIterations};
  double objective{0.0};
  int iterations{0};
  bool polished{false};
  KktResiduals residuals;
  /// For Infeasible: normalized dual ray y over [A_eq; G_in] with
  /// ||A' y|| ~ 0 and b_eq' y_eq + h_in' y_in < 0.
  Eigen::VectorXd certificate;
  std::string diagnostic;
};

/// Optional starting point for the splitting iterations.
struct InitialIterate {
  Eigen::VectorXd z;
  Eigen::VectorXd lambda_eq;
  Eigen::VectorXd mu_in;
};

/// Solves the program. Deterministic: identical inputs give bit-identical
/// outputs.
QpSolution solve_qp(const QpProblem& problem, const QpSettings& settings = {},
                    const InitialIterate* start = nullptr);

/// Infinity-norm KKT residuals recomputed from the problem data alone.
KktResiduals verify_kkt(const QpProblem& problem, const Eigen::VectorXd& z,
                        const Eigen::VectorXd& lambda_eq,
                        const Eigen::VectorXd& mu_in);

inline KktResiduals verify_kkt(const QpProblem& problem,
                               const QpSolution& solution) {
  return verify_kkt(problem, solution.z, solution.lambda_eq, solution.mu_in);
}

double objective(const QpProblem& problem, const Eigen::VectorXd& z);

}  // namespace ddsf::qp
