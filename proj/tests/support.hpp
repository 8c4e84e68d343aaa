#pragma once

#include <algorithm>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "ddsf/filter.hpp"
#include "ddsf/lti.hpp"
#include "ddsf/qp.hpp"
#include "ddsf/trajectory.hpp"
#include "oracle/mpsf_oracle.hpp"

namespace ddsf::testing {

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c,
                                     double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Eigen::MatrixXd M(r, c);
  for (Eigen::Index j = 0; j < c; ++j) {
    for (Eigen::Index i = 0; i < r; ++i) M(i, j) = nd(rng);
  }
  return M;
}

inline Eigen::MatrixXd random_uniform(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c,
                                      double lo, double hi) {
  std::uniform_real_distribution<double> ud(lo, hi);
  Eigen::MatrixXd M(r, c);
  for (Eigen::Index j = 0; j < c; ++j) {
    for (Eigen::Index i = 0; i < r; ++i) M(i, j) = ud(rng);
  }
  return M;
}

/// x+ = [1 Ts; 0 1] x + [Ts^2/2; Ts] u, y = position.
inline lti::DiscreteSystem double_integrator(double Ts = 0.2) {
  lti::DiscreteSystem s;
  s.A = (Eigen::MatrixXd(2, 2) << 1.0, Ts, 0.0, 1.0).finished();
  s.B = (Eigen::MatrixXd(2, 1) << 0.5 * Ts * Ts, Ts).finished();
  s.C = (Eigen::MatrixXd(1, 2) << 1.0, 0.0).finished();
  s.D = Eigen::MatrixXd::Zero(1, 1);
  s.Ts = Ts;
  return s;
}

/// Random SISO system with spectral radius `radius`, observable and
/// controllable with probability one.
inline lti::DiscreteSystem random_stable_siso(std::mt19937_64& rng, Eigen::Index n,
                                              double radius = 0.9) {
  lti::DiscreteSystem s;
  Eigen::MatrixXd A = random_matrix(rng, n, n);
  const double rho = A.eigenvalues().cwiseAbs().maxCoeff();
  s.A = A * (radius / rho);
  s.B = random_matrix(rng, n, 1);
  s.C = random_matrix(rng, 1, n);
  s.D = Eigen::MatrixXd::Zero(1, 1);
  s.Ts = 1.0;
  return s;
}

/// Record of length N driven by uniform random inputs in [-amp, amp] from x0.
inline Trajectory random_record(const lti::DiscreteSystem& sys, Eigen::Index N,
                                std::uint64_t seed, double amp = 1.0,
                                const Eigen::VectorXd* x0 = nullptr) {
  std::mt19937_64 rng(seed);
  const Eigen::MatrixXd u = random_uniform(rng, sys.inputs(), N, -amp, amp);
  const Eigen::VectorXd x = x0 != nullptr ? *x0 : Eigen::VectorXd::Zero(sys.states());
  return lti::simulate(sys, x, u);
}

/// Filter configuration with box sets |u| <= u_max, |y| <= y_max and the
/// origin as terminal point.
inline FilterConfig box_config(const lti::DiscreteSystem& sys, Eigen::Index N_p,
                               Eigen::Index T_ini, double u_max, double y_max) {
  FilterConfig cfg;
  cfg.N_p = N_p;
  cfg.T_ini = T_ini;
  cfg.R = Eigen::MatrixXd::Identity(sys.inputs(), sys.inputs());
  cfg.terminal = {Eigen::VectorXd::Zero(sys.inputs()), Eigen::VectorXd::Zero(sys.outputs())};
  cfg.u_set = box(Eigen::VectorXd::Constant(sys.inputs(), -u_max),
                  Eigen::VectorXd::Constant(sys.inputs(), u_max));
  cfg.y_set = box(Eigen::VectorXd::Constant(sys.outputs(), -y_max),
                  Eigen::VectorXd::Constant(sys.outputs(), y_max));
  return cfg;
}

/// Window recorded while holding zero input at the origin.
inline InitWindow origin_window(const lti::DiscreteSystem& sys, Eigen::Index T_ini) {
  return InitWindow::constant(Eigen::VectorXd::Zero(sys.inputs()),
                              Eigen::VectorXd::Zero(sys.outputs()), T_ini);
}

/// Random strictly convex QP with n variables, me equalities and mi
/// inequalities, feasible by construction.
inline qp::QpProblem random_qp(std::mt19937_64& rng, Eigen::Index n, Eigen::Index me,
                               Eigen::Index mi) {
  const Eigen::MatrixXd M = random_matrix(rng, n, n);
  Eigen::MatrixXd P = M.transpose() * M + 0.1 * Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd q = random_matrix(rng, n, 1);
  const Eigen::VectorXd z0 = random_matrix(rng, n, 1);
  Eigen::MatrixXd A = random_matrix(rng, me, n);
  Eigen::VectorXd b = A * z0;
  Eigen::MatrixXd G = random_matrix(rng, mi, n);
  Eigen::VectorXd h = G * z0 + random_uniform(rng, mi, 1, 0.0, 0.5);
  return qp::make_problem(std::move(P), std::move(q), std::move(A), std::move(b),
                          std::move(G), std::move(h));
}

struct EquivalenceReport {
  double max_gap{0.0};
  long steps{0};
  long ddsf_failures{0};
  long oracle_failures{0};
  /// Steps where the filter changed the proposed input by more than 1e-6.
  long interventions{0};
};

/// Closed loop from the origin driven by the data-driven filter. At every
/// step the model-based oracle solves the same problem from the true state
/// and the two filtered inputs are compared.
inline EquivalenceReport oracle_equivalence(const lti::DiscreteSystem& sys,
                                            const FilterConfig& cfg,
                                            const HankelPair& h,
                                            const Eigen::MatrixXd& u_learn) {
  EquivalenceReport rep;
  const FilterSolver solver(h, cfg);
  lti::PlantState plant = lti::initial_state(sys, Eigen::VectorXd::Zero(sys.states()));
  FilterState st{origin_window(sys, cfg.T_ini), 0};
  for (Eigen::Index k = 0; k < u_learn.cols(); ++k) {
    const Eigen::VectorXd u_l = u_learn.col(k);
    const FilterStep fs = solver.step(st, u_l);
    const oracle::OracleResult ref = oracle::oracle_filter({sys, plant.x, cfg, u_l});
    ++rep.steps;
    if (fs.status != qp::QpStatus::Optimal) ++rep.ddsf_failures;
    if (ref.status != qp::QpStatus::Optimal) ++rep.oracle_failures;
    if (fs.status != qp::QpStatus::Optimal) break;
    rep.max_gap = std::max(rep.max_gap, (fs.u_safe - ref.u_safe).lpNorm<Eigen::Infinity>());
    if ((fs.u_safe - u_l).lpNorm<Eigen::Infinity>() > 1e-6) ++rep.interventions;
    const Eigen::VectorXd y = lti::step_inplace(plant, sys, fs.u_safe);
    st = advance(st, fs.u_safe, y);
  }
  return rep;
}

}  // namespace ddsf::testing
