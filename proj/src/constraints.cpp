#include "ddsf/constraints.hpp"

#include <limits>

namespace ddsf {

Polytope make_polytope(Eigen::MatrixXd A, Eigen::VectorXd b) {
  if (A.rows() != b.size()) throw DimensionError("polytope rows and rhs differ");
  if (!A.allFinite() || !b.allFinite()) {
    throw InvalidArgument("polytope data must be finite");
  }
  return Polytope{std::move(A), std::move(b)};
}

Polytope box(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  if (lower.size() != upper.size()) throw DimensionError("box bound sizes differ");
  if ((lower.array() > upper.array()).any()) {
    throw InvalidArgument("box lower bound exceeds upper bound");
  }
  const Eigen::Index d = lower.size();
  Eigen::MatrixXd A(2 * d, d);
  A << Eigen::MatrixXd::Identity(d, d), -Eigen::MatrixXd::Identity(d, d);
  Eigen::VectorXd b(2 * d);
  b << upper, -lower;
  return make_polytope(std::move(A), std::move(b));
}

double violation(const Polytope& poly, const Eigen::VectorXd& v) {
  if (v.size() != poly.dim()) throw DimensionError("point dimension mismatch");
  if (poly.rows() == 0) return -std::numeric_limits<double>::infinity();
  return (poly.A * v - poly.b).maxCoeff();
}

bool contains(const Polytope& poly, const Eigen::VectorXd& v, double tol) {
  return violation(poly, v) <= tol;
}

double validate_terminal(const TerminalSet& term, const HankelPair& h,
                         Eigen::Index T_ini) {
  if (term.u_s.size() != h.m || term.y_s.size() != h.p) {
    throw DimensionError("terminal point dimension mismatch");
  }
  if (T_ini < 1 || T_ini > h.L) throw InvalidArgument("T_ini outside Hankel depth");
  HankelPair lead;
  lead.Hu = h.Hu.topRows(h.m * T_ini);
  lead.Hy = h.Hy.topRows(h.p * T_ini);
  lead.L = T_ini;
  lead.m = h.m;
  lead.p = h.p;
  lead.N0 = h.N0;
  const Trajectory window(term.u_s.replicate(1, T_ini), term.y_s.replicate(1, T_ini));
  return span_residual(lead, window);
}

}  // namespace ddsf
