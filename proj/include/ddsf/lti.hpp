#pragma once

#include <deque>
#include <utility>

#include <Eigen/Dense>

#include "ddsf/errors.hpp"
#include "ddsf/trajectory.hpp"

namespace ddsf::lti {

/// x' = A x + B u, y = C x + D u in continuous time.
struct ContinuousSystem {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd C;
  Eigen::MatrixXd D;

  Eigen::Index states() const { return A.rows(); }
  Eigen::Index inputs() const { return B.cols(); }
  Eigen::Index outputs() const { return C.rows(); }
};

/// Sampled plant with an optional integer input delay. The delay is a plant
/// property only; the safety filter never reads it.
struct DiscreteSystem {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd C;
  Eigen::MatrixXd D;
  double Ts{1.0};
  int delay_steps{0};

  Eigen::Index states() const { return A.rows(); }
  Eigen::Index inputs() const { return B.cols(); }
  Eigen::Index outputs() const { return C.rows(); }
};

/// Throws DimensionError / InvalidArgument on inconsistent matrices.
void validate(const ContinuousSystem& sys);
void validate(const DiscreteSystem& sys);

struct PlantState {
  Eigen::VectorXd x;
  /// Oldest input at the front.
  std::deque<Eigen::VectorXd> delay_buffer;
};

/// State x0 with the delay line filled with zero inputs.
PlantState initial_state(const DiscreteSystem& sys, const Eigen::VectorXd& x0);

/// Zero-order-hold discretization through the exponential of the augmented
/// matrix [A B; 0 0] * Ts.
DiscreteSystem discretize_zoh(const ContinuousSystem& sys, double Ts);

/// Emits y for the current state, then advances. The input that acts on the
/// state is the one pushed delay_steps calls earlier.
std::pair<PlantState, Eigen::VectorXd> step(const PlantState& plant,
                                            const DiscreteSystem& sys,
                                            const Eigen::VectorXd& u);

/// In-place variant of step used by closed-loop drivers.
Eigen::VectorXd step_inplace(PlantState& plant, const DiscreteSystem& sys,
                             const Eigen::VectorXd& u);

/// Drives the plant from x0 (zero delay line) with the given input columns.
Trajectory simulate(const DiscreteSystem& sys, const Eigen::VectorXd& x0,
                    const Eigen::MatrixXd& inputs);

/// Same, starting from an arbitrary plant state.
Trajectory simulate(const DiscreteSystem& sys, PlantState plant,
                    const Eigen::MatrixXd& inputs);

/// Realization of the delayed plant with the delay line appended to the
/// state: [x; u_{t-k}; ...; u_{t-1}].
DiscreteSystem delay_augmented(const DiscreteSystem& sys);

/// Stacked state [x; buffer] matching delay_augmented().
Eigen::VectorXd augmented_state(const PlantState& plant);

/// [C; CA; ...; CA^{l-1}].
Eigen::MatrixXd observability_matrix(const Eigen::MatrixXd& A,
                                     const Eigen::MatrixXd& C, int l);

/// [B, AB, ..., A^{n-1}B].
Eigen::MatrixXd controllability_matrix(const Eigen::MatrixXd& A,
                                       const Eigen::MatrixXd& B);

/// Smallest l with rank O_l = n, or -1 when the pair is not observable.
int lag(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C);

/// State x_s with x_s = A x_s + B u_s and y_s = C x_s + D u_s, in the least
/// squares sense (minimum norm when not unique).
Eigen::VectorXd steady_state(const DiscreteSystem& sys,
                             const Eigen::VectorXd& u_s,
                             const Eigen::VectorXd& y_s);

}  // namespace ddsf::lti
