#pragma once

#include <Eigen/Dense>

#include "ddsf/errors.hpp"

namespace ddsf {

/// Input-output record. Column k holds the sample at time k.
class Trajectory {
 public:
  Trajectory() = default;
  /// Throws DimensionError when the two records differ in length.
  Trajectory(Eigen::MatrixXd inputs, Eigen::MatrixXd outputs);

  Eigen::Index input_dim() const { return inputs_.rows(); }
  Eigen::Index output_dim() const { return outputs_.rows(); }
  Eigen::Index length() const { return inputs_.cols(); }
  bool empty() const { return length() == 0; }

  const Eigen::MatrixXd& inputs() const { return inputs_; }
  const Eigen::MatrixXd& outputs() const { return outputs_; }

  Eigen::VectorXd input(Eigen::Index k) const { return inputs_.col(k); }
  Eigen::VectorXd output(Eigen::Index k) const { return outputs_.col(k); }

  /// Samples [start, start + count).
  Trajectory slice(Eigen::Index start, Eigen::Index count) const;

  /// Time-stacked vectors (u_0; u_1; ...) and (y_0; y_1; ...).
  Eigen::VectorXd stacked_inputs() const;
  Eigen::VectorXd stacked_outputs() const;

  void push_back(const Eigen::VectorXd& u, const Eigen::VectorXd& y);

  friend bool operator==(const Trajectory& a, const Trajectory& b) {
    return a.inputs_.rows() == b.inputs_.rows() &&
           a.outputs_.rows() == b.outputs_.rows() &&
           a.inputs_.cols() == b.inputs_.cols() && a.inputs_ == b.inputs_ &&
           a.outputs_ == b.outputs_;
  }

 private:
  Eigen::MatrixXd inputs_;
  Eigen::MatrixXd outputs_;
};

/**
 * Block-Hankel matrices of depth L built from one recorded trajectory.
 *
 * Column j is the window starting at sample j. Within a column the m input
 * channels of one time step are contiguous:
 *   Hu.block(i*m, j, m, 1) == u_{i+j},  Hy.block(i*p, j, p, 1) == y_{i+j}.
 */
struct HankelPair {
  Eigen::MatrixXd Hu;
  Eigen::MatrixXd Hy;
  Eigen::Index L{0};
  Eigen::Index m{0};
  Eigen::Index p{0};
  Eigen::Index N0{0};

  Eigen::Index columns() const { return Hu.cols(); }
  /// Rows of Hu for window step k.
  auto input_block(Eigen::Index k) const { return Hu.middleRows(k * m, m); }
  auto output_block(Eigen::Index k) const { return Hy.middleRows(k * p, p); }
  /// [Hu; Hy].
  Eigen::MatrixXd stacked() const;
};

/// Last T_ini measured samples, oldest first.
class InitWindow {
 public:
  InitWindow() = default;
  explicit InitWindow(Trajectory samples);

  Eigen::Index length() const { return samples_.length(); }
  const Trajectory& samples() const { return samples_; }

  /// Drops the oldest sample and appends (u, y).
  InitWindow shifted(const Eigen::VectorXd& u, const Eigen::VectorXd& y) const;

  /// T_ini copies of one (u, y) pair.
  static InitWindow constant(const Eigen::VectorXd& u, const Eigen::VectorXd& y,
                             Eigen::Index T_ini);

 private:
  Trajectory samples_;
};

/// sigma_i counts toward the rank when
/// sigma_i > max(rows, cols) * eps * sigma_max * scale.
struct RankSettings {
  double scale{10.0};
};

HankelPair build_hankel(const Trajectory& traj, Eigen::Index L);

/// Hankel matrix of a single signal record (rows = channels, cols = time).
Eigen::MatrixXd hankel(const Eigen::MatrixXd& signal, Eigen::Index L);

struct RankReport {
  Eigen::Index rank{0};
  Eigen::VectorXd singular_values;
  double threshold{0.0};
};

RankReport numerical_rank(const Eigen::MatrixXd& M, RankSettings settings = {});

struct PeReport {
  bool is_pe{false};
  Eigen::Index rank{0};
  Eigen::Index required{0};
  Eigen::VectorXd singular_values;
};

/// Persistency of excitation of order L: rank H_L(u) == m * L.
PeReport pe_order_check(const Eigen::MatrixXd& inputs, Eigen::Index L,
                        RankSettings settings = {});

/// Numerical rank of [Hu; Hy].
Eigen::Index stacked_rank(const HankelPair& h, RankSettings settings = {});

/// ||H a* - w|| / max(1, ||w||) with a* the least-squares coefficients and
/// w the stacked candidate window.
double span_residual(const HankelPair& h, const Trajectory& candidate);

}  // namespace ddsf
