#include "ddsf/trajectory.hpp"

#include <algorithm>
#include <limits>
#include <string>

namespace ddsf {

Trajectory::Trajectory(Eigen::MatrixXd inputs, Eigen::MatrixXd outputs)
    : inputs_(std::move(inputs)), outputs_(std::move(outputs)) {
  if (inputs_.cols() != outputs_.cols()) {
    throw DimensionError("trajectory inputs and outputs differ in length");
  }
}

Trajectory Trajectory::slice(Eigen::Index start, Eigen::Index count) const {
  if (start < 0 || count < 0 || start + count > length()) {
    throw DimensionError("trajectory slice out of range");
  }
  return Trajectory(inputs_.middleCols(start, count),
                    outputs_.middleCols(start, count));
}

Eigen::VectorXd Trajectory::stacked_inputs() const {
  return inputs_.reshaped();
}

Eigen::VectorXd Trajectory::stacked_outputs() const {
  return outputs_.reshaped();
}

void Trajectory::push_back(const Eigen::VectorXd& u, const Eigen::VectorXd& y) {
  if (length() > 0 && (u.size() != input_dim() || y.size() != output_dim())) {
    throw DimensionError("sample dimension differs from trajectory");
  }
  const Eigen::Index n = length();
  inputs_.conservativeResize(u.size(), n + 1);
  outputs_.conservativeResize(y.size(), n + 1);
  inputs_.col(n) = u;
  outputs_.col(n) = y;
}

Eigen::MatrixXd HankelPair::stacked() const {
  Eigen::MatrixXd H(Hu.rows() + Hy.rows(), Hu.cols());
  H << Hu, Hy;
  return H;
}

InitWindow::InitWindow(Trajectory samples) : samples_(std::move(samples)) {}

InitWindow InitWindow::shifted(const Eigen::VectorXd& u,
                               const Eigen::VectorXd& y) const {
  const Eigen::Index T = length();
  if (u.size() != samples_.input_dim() || y.size() != samples_.output_dim()) {
    throw DimensionError("window sample dimension mismatch");
  }
  Eigen::MatrixXd U(samples_.input_dim(), T);
  Eigen::MatrixXd Y(samples_.output_dim(), T);
  if (T > 1) {
    U.leftCols(T - 1) = samples_.inputs().rightCols(T - 1);
    Y.leftCols(T - 1) = samples_.outputs().rightCols(T - 1);
  }
  if (T > 0) {
    U.col(T - 1) = u;
    Y.col(T - 1) = y;
  }
  return InitWindow(Trajectory(std::move(U), std::move(Y)));
}

InitWindow InitWindow::constant(const Eigen::VectorXd& u, const Eigen::VectorXd& y,
                                Eigen::Index T_ini) {
  return InitWindow(Trajectory(u.replicate(1, T_ini), y.replicate(1, T_ini)));
}

Eigen::MatrixXd hankel(const Eigen::MatrixXd& signal, Eigen::Index L) {
  const Eigen::Index d = signal.rows();
  const Eigen::Index N = signal.cols();
  if (L < 1) throw InvalidArgument("Hankel depth must be positive");
  if (N < L) {
    throw WindowTooLong("window length " + std::to_string(L) +
                        " exceeds record length " + std::to_string(N));
  }
  const Eigen::Index cols = N - L + 1;
  Eigen::MatrixXd H(d * L, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    H.col(j) = signal.middleCols(j, L).reshaped();
  }
  return H;
}

HankelPair build_hankel(const Trajectory& traj, Eigen::Index L) {
  HankelPair h;
  h.Hu = hankel(traj.inputs(), L);
  h.Hy = hankel(traj.outputs(), L);
  h.L = L;
  h.m = traj.input_dim();
  h.p = traj.output_dim();
  h.N0 = traj.length();
  return h;
}

RankReport numerical_rank(const Eigen::MatrixXd& M, RankSettings settings) {
  RankReport r;
  if (M.size() == 0) return r;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(M);
  r.singular_values = svd.singularValues();
  const double smax = r.singular_values.size() > 0 ? r.singular_values(0) : 0.0;
  r.threshold = static_cast<double>(std::max(M.rows(), M.cols())) *
                std::numeric_limits<double>::epsilon() * smax * settings.scale;
  r.rank = (r.singular_values.array() > r.threshold).count();
  return r;
}

PeReport pe_order_check(const Eigen::MatrixXd& inputs, Eigen::Index L,
                        RankSettings settings) {
  const RankReport rr = numerical_rank(hankel(inputs, L), settings);
  PeReport pe;
  pe.rank = rr.rank;
  pe.required = inputs.rows() * L;
  pe.is_pe = pe.rank == pe.required;
  pe.singular_values = rr.singular_values;
  return pe;
}

Eigen::Index stacked_rank(const HankelPair& h, RankSettings settings) {
  return numerical_rank(h.stacked(), settings).rank;
}

double span_residual(const HankelPair& h, const Trajectory& candidate) {
  if (candidate.length() != h.L || candidate.input_dim() != h.m ||
      candidate.output_dim() != h.p) {
    throw DimensionError("candidate window does not match Hankel depth/dims");
  }
  const Eigen::MatrixXd H = h.stacked();
  Eigen::VectorXd w(H.rows());
  w << candidate.stacked_inputs(), candidate.stacked_outputs();

  Eigen::BDCSVD<Eigen::MatrixXd> svd(H, Eigen::ComputeThinU);
  const Eigen::VectorXd& s = svd.singularValues();
  const double smax = s.size() > 0 ? s(0) : 0.0;
  const double tol = static_cast<double>(std::max(H.rows(), H.cols())) *
                     std::numeric_limits<double>::epsilon() * smax *
                     RankSettings{}.scale;
  const Eigen::Index r = (s.array() > tol).count();
  const auto Ur = svd.matrixU().leftCols(r);
  const Eigen::VectorXd proj = Ur * (Ur.transpose() * w);
  return (w - proj).norm() / std::max(1.0, w.norm());
}

}  // namespace ddsf
