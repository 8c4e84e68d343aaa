#include "ddsf/lti.hpp"

#include <string>

#include <unsupported/Eigen/MatrixFunctions>

namespace ddsf::lti {

namespace {

void check_dims(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                const Eigen::MatrixXd& C, const Eigen::MatrixXd& D) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n) throw DimensionError("A must be square");
  if (B.rows() != n) throw DimensionError("B rows must equal state dimension");
  if (C.cols() != n) throw DimensionError("C columns must equal state dimension");
  if (D.rows() != C.rows() || D.cols() != B.cols()) {
    throw DimensionError("D must be outputs x inputs");
  }
}

Eigen::Index rank_of(const Eigen::MatrixXd& M) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(M);
  return qr.rank();
}

}  // namespace

void validate(const ContinuousSystem& sys) {
  check_dims(sys.A, sys.B, sys.C, sys.D);
}

void validate(const DiscreteSystem& sys) {
  check_dims(sys.A, sys.B, sys.C, sys.D);
  if (!(sys.Ts > 0.0)) throw InvalidArgument("sample time must be positive");
  if (sys.delay_steps < 0) throw InvalidArgument("delay must be nonnegative");
}

PlantState initial_state(const DiscreteSystem& sys, const Eigen::VectorXd& x0) {
  if (x0.size() != sys.states()) throw DimensionError("x0 size mismatch");
  PlantState s;
  s.x = x0;
  s.delay_buffer.assign(static_cast<size_t>(sys.delay_steps),
                        Eigen::VectorXd::Zero(sys.inputs()));
  return s;
}

DiscreteSystem discretize_zoh(const ContinuousSystem& sys, double Ts) {
  validate(sys);
  if (!(Ts > 0.0)) throw InvalidArgument("sample time must be positive");
  const Eigen::Index n = sys.states();
  const Eigen::Index m = sys.inputs();

  // exp([A B; 0 0] Ts) = [A_d B_d; 0 I]
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n + m, n + m);
  M.topLeftCorner(n, n) = sys.A * Ts;
  M.topRightCorner(n, m) = sys.B * Ts;
  const Eigen::MatrixXd phi = M.exp();

  DiscreteSystem d;
  d.A = phi.topLeftCorner(n, n);
  d.B = phi.topRightCorner(n, m);
  d.C = sys.C;
  d.D = sys.D;
  d.Ts = Ts;
  return d;
}

Eigen::VectorXd step_inplace(PlantState& plant, const DiscreteSystem& sys,
                             const Eigen::VectorXd& u) {
  if (u.size() != sys.inputs()) {
    throw DimensionError("input has " + std::to_string(u.size()) +
                         " entries, plant expects " +
                         std::to_string(sys.inputs()));
  }
  if (plant.x.size() != sys.states() ||
      plant.delay_buffer.size() != static_cast<size_t>(sys.delay_steps)) {
    throw DimensionError("plant state does not match system");
  }
  Eigen::VectorXd u_eff;
  if (sys.delay_steps == 0) {
    u_eff = u;
  } else {
    u_eff = std::move(plant.delay_buffer.front());
    plant.delay_buffer.pop_front();
    plant.delay_buffer.push_back(u);
  }
  Eigen::VectorXd y = sys.C * plant.x + sys.D * u_eff;
  plant.x = sys.A * plant.x + sys.B * u_eff;
  return y;
}

std::pair<PlantState, Eigen::VectorXd> step(const PlantState& plant,
                                            const DiscreteSystem& sys,
                                            const Eigen::VectorXd& u) {
  PlantState next = plant;
  Eigen::VectorXd y = step_inplace(next, sys, u);
  return {std::move(next), std::move(y)};
}

Trajectory simulate(const DiscreteSystem& sys, PlantState plant,
                    const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != sys.inputs()) throw DimensionError("input dimension mismatch");
  Eigen::MatrixXd outputs(sys.outputs(), inputs.cols());
  for (Eigen::Index k = 0; k < inputs.cols(); ++k) {
    outputs.col(k) = step_inplace(plant, sys, inputs.col(k));
  }
  return Trajectory(inputs, std::move(outputs));
}

Trajectory simulate(const DiscreteSystem& sys, const Eigen::VectorXd& x0,
                    const Eigen::MatrixXd& inputs) {
  return simulate(sys, initial_state(sys, x0), inputs);
}

DiscreteSystem delay_augmented(const DiscreteSystem& sys) {
  const Eigen::Index n = sys.states();
  const Eigen::Index m = sys.inputs();
  const Eigen::Index k = sys.delay_steps;
  if (k == 0) return sys;
  const Eigen::Index na = n + k * m;
  DiscreteSystem a;
  a.A = Eigen::MatrixXd::Zero(na, na);
  a.B = Eigen::MatrixXd::Zero(na, m);
  a.C = Eigen::MatrixXd::Zero(sys.outputs(), na);
  a.D = Eigen::MatrixXd::Zero(sys.outputs(), m);
  a.Ts = sys.Ts;
  // Oldest buffered input drives the physical state.
  a.A.topLeftCorner(n, n) = sys.A;
  a.A.block(0, n, n, m) = sys.B;
  for (Eigen::Index i = 0; i + 1 < k; ++i) {
    a.A.block(n + i * m, n + (i + 1) * m, m, m).setIdentity();
  }
  a.B.bottomRows(m).setIdentity();
  a.C.leftCols(n) = sys.C;
  a.C.middleCols(n, m) = sys.D;
  return a;
}

Eigen::VectorXd augmented_state(const PlantState& plant) {
  Eigen::Index size = plant.x.size();
  for (const auto& u : plant.delay_buffer) size += u.size();
  Eigen::VectorXd out(size);
  out.head(plant.x.size()) = plant.x;
  Eigen::Index at = plant.x.size();
  for (const auto& u : plant.delay_buffer) {
    out.segment(at, u.size()) = u;
    at += u.size();
  }
  return out;
}

Eigen::MatrixXd observability_matrix(const Eigen::MatrixXd& A,
                                     const Eigen::MatrixXd& C, int l) {
  const Eigen::Index p = C.rows();
  Eigen::MatrixXd O(p * l, A.cols());
  Eigen::MatrixXd CAk = C;
  for (int k = 0; k < l; ++k) {
    O.middleRows(k * p, p) = CAk;
    CAk = CAk * A;
  }
  return O;
}

Eigen::MatrixXd controllability_matrix(const Eigen::MatrixXd& A,
                                       const Eigen::MatrixXd& B) {
  const Eigen::Index n = A.rows();
  const Eigen::Index m = B.cols();
  Eigen::MatrixXd Ctrb(n, n * m);
  Eigen::MatrixXd AkB = B;
  for (Eigen::Index k = 0; k < n; ++k) {
    Ctrb.middleCols(k * m, m) = AkB;
    AkB = A * AkB;
  }
  return Ctrb;
}

int lag(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C) {
  const auto n = static_cast<int>(A.rows());
  for (int l = 1; l <= n; ++l) {
    if (rank_of(observability_matrix(A, C, l)) == n) return l;
  }
  return -1;
}

Eigen::VectorXd steady_state(const DiscreteSystem& sys,
                             const Eigen::VectorXd& u_s,
                             const Eigen::VectorXd& y_s) {
  const Eigen::Index n = sys.states();
  const Eigen::Index p = sys.outputs();
  Eigen::MatrixXd M(n + p, n);
  M.topRows(n) = Eigen::MatrixXd::Identity(n, n) - sys.A;
  M.bottomRows(p) = sys.C;
  Eigen::VectorXd rhs(n + p);
  rhs.head(n) = sys.B * u_s;
  rhs.tail(p) = y_s - sys.D * u_s;
  return M.completeOrthogonalDecomposition().solve(rhs);
}

}  // namespace ddsf::lti
