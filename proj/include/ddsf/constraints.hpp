#pragma once

#include <Eigen/Dense>

#include "ddsf/errors.hpp"
#include "ddsf/trajectory.hpp"

namespace ddsf {

/// Closed polytope {v : A v <= b}.
struct Polytope {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;

  Eigen::Index dim() const { return A.cols(); }
  Eigen::Index rows() const { return A.rows(); }
};

Polytope make_polytope(Eigen::MatrixXd A, Eigen::VectorXd b);

/// Rows are [I; -I], so the set is lower <= v <= upper.
Polytope box(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);

/// max(A v - b) <= tol.
bool contains(const Polytope& poly, const Eigen::VectorXd& v, double tol = 0.0);

/// Largest constraint excess max(A v - b), negative inside.
double violation(const Polytope& poly, const Eigen::VectorXd& v);

/// Input-output equilibrium used as the terminal safe set.
struct TerminalSet {
  Eigen::VectorXd u_s;
  Eigen::VectorXd y_s;
};

/// span_residual of the constant window (u_s, y_s) repeated T_ini times
/// against the leading T_ini block rows of the data Hankel matrix.
double validate_terminal(const TerminalSet& term, const HankelPair& h,
                         Eigen::Index T_ini);

}  // namespace ddsf
