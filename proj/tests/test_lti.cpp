#include <random>

#include <gtest/gtest.h>

#include "ddsf/lti.hpp"
#include "ddsf/scenarios.hpp"
#include "oracle/expm_taylor.hpp"
#include "support.hpp"

namespace ddsf {
namespace lti {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

ContinuousSystem mass(double m_c) {
  ContinuousSystem s;
  s.A = (MatrixXd(2, 2) << 0.0, 1.0, 0.0, 0.0).finished();
  s.B = (MatrixXd(2, 1) << 0.0, 1.0 / m_c).finished();
  s.C = (MatrixXd(1, 2) << 1.0, 0.0).finished();
  s.D = MatrixXd::Zero(1, 1);
  return s;
}

TEST(ZohTest, DoubleIntegrator) {
  const double m_c = 1650.0;
  const double Ts = 0.2;
  const DiscreteSystem d = discretize_zoh(mass(m_c), Ts);
  const MatrixXd A_expected = (MatrixXd(2, 2) << 1.0, Ts, 0.0, 1.0).finished();
  const MatrixXd B_expected = (MatrixXd(2, 1) << Ts * Ts / (2 * m_c), Ts / m_c).finished();
  EXPECT_TRUE(d.A.isApprox(A_expected, 1e-14));
  EXPECT_TRUE(d.B.isApprox(B_expected, 1e-14));
  EXPECT_EQ(d.Ts, Ts);
}

TEST(ZohTest, ZeroDynamics) {
  ContinuousSystem s;
  s.A = MatrixXd::Zero(3, 3);
  s.B = (MatrixXd(3, 2) << 1, 2, 3, 4, 5, 6).finished();
  s.C = MatrixXd::Identity(3, 3);
  s.D = MatrixXd::Zero(3, 2);
  const DiscreteSystem d = discretize_zoh(s, 0.5);
  EXPECT_TRUE(d.A.isApprox(MatrixXd::Identity(3, 3)));
  EXPECT_TRUE(d.B.isApprox(0.5 * s.B, 1e-15));
}

TEST(ZohTest, QuadrotorMatchesTaylorOracle) {
  const ContinuousSystem c = scenarios::build_quadrotor().model;
  const double Ts = 0.1;
  const Eigen::Index n = c.states();
  const Eigen::Index m = c.inputs();
  MatrixXd aug = MatrixXd::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = c.A * Ts;
  aug.topRightCorner(n, m) = c.B * Ts;
  const MatrixXd E = oracle::expm_taylor(aug);
  const DiscreteSystem d = discretize_zoh(c, Ts);
  EXPECT_LE((d.A - E.topLeftCorner(n, n)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((d.B - E.topRightCorner(n, m)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ZohTest, RejectsBadSampleTime) {
  EXPECT_THROW(discretize_zoh(mass(1.0), 0.0), InvalidArgument);
  EXPECT_THROW(discretize_zoh(mass(1.0), -0.1), InvalidArgument);
}

TEST(StepTest, Equilibrium) {
  const DiscreteSystem d = testing::double_integrator();
  const auto [next, y] = step(initial_state(d, VectorXd::Zero(2)), d, VectorXd::Zero(1));
  EXPECT_EQ(y, VectorXd::Zero(1));
  EXPECT_EQ(next.x, VectorXd::Zero(2));
}

TEST(StepTest, SingleKick) {
  const double m_c = 1650.0;
  const DiscreteSystem d = discretize_zoh(mass(m_c), 0.2);
  const auto [next, y] = step(initial_state(d, VectorXd::Zero(2)), d, VectorXd::Constant(1, m_c));
  EXPECT_TRUE(next.x.isApprox(Eigen::Vector2d(0.02, 0.2), 1e-12));
}

TEST(StepTest, DelayShiftsInputs) {
  std::mt19937_64 rng(5);
  for (int k = 0; k <= 10; ++k) {
    DiscreteSystem sys = testing::random_stable_siso(rng, 3);
    const VectorXd x0 = testing::random_matrix(rng, 3, 1);
    const MatrixXd u = testing::random_matrix(rng, 1, 40);
    DiscreteSystem delayed = sys;
    delayed.delay_steps = k;
    MatrixXd shifted = MatrixXd::Zero(1, 40);
    shifted.rightCols(40 - k) = u.leftCols(40 - k);
    const Trajectory a = simulate(delayed, x0, u);
    const Trajectory b = simulate(sys, x0, shifted);
    EXPECT_LE((a.outputs() - b.outputs()).cwiseAbs().maxCoeff(), 1e-12) << "delay " << k;
  }
}

TEST(StepTest, DelayAugmentedRealization) {
  std::mt19937_64 rng(9);
  DiscreteSystem sys = testing::random_stable_siso(rng, 2);
  sys.delay_steps = 3;
  const DiscreteSystem aug = delay_augmented(sys);
  EXPECT_EQ(aug.states(), 5);
  EXPECT_EQ(aug.delay_steps, 0);
  PlantState plant = initial_state(sys, testing::random_matrix(rng, 2, 1));
  VectorXd xa = augmented_state(plant);
  for (int t = 0; t < 20; ++t) {
    const VectorXd u = testing::random_matrix(rng, 1, 1);
    const VectorXd y = step_inplace(plant, sys, u);
    const VectorXd ya = aug.C * xa + aug.D * u;
    EXPECT_NEAR(y(0), ya(0), 1e-12);
    xa = aug.A * xa + aug.B * u;
    EXPECT_TRUE(xa.isApprox(augmented_state(plant), 1e-12));
  }
}

TEST(SimulateTest, ZeroStaysZero) {
  const DiscreteSystem d = testing::double_integrator();
  const Trajectory t = simulate(d, VectorXd::Zero(2), MatrixXd::Zero(1, 25));
  EXPECT_EQ(t.length(), 25);
  EXPECT_TRUE(t.outputs().isZero(0.0));
}

TEST(SimulateTest, Superposition) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const DiscreteSystem sys = testing::random_stable_siso(rng, 4, 1.1);
    const VectorXd x0 = testing::random_matrix(rng, 4, 1);
    const MatrixXd u1 = testing::random_matrix(rng, 1, 30);
    const MatrixXd u2 = testing::random_matrix(rng, 1, 30);
    const MatrixXd lhs = simulate(sys, x0, u1).outputs() +
                         simulate(sys, VectorXd::Zero(4), u2).outputs();
    const MatrixXd rhs = simulate(sys, x0, u1 + u2).outputs();
    EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-9 * (1.0 + rhs.cwiseAbs().maxCoeff()));
  }
}

TEST(SimulateTest, QuadrotorWindowsInDataSpan) {
  const scenarios::Scenario sc = scenarios::build_quadrotor();
  const Trajectory data = scenarios::collect_dataset(sc.config);
  const HankelPair h = build_hankel(data, sc.config.window_length());
  for (Eigen::Index s = 0; s + h.L <= data.length(); s += 37) {
    EXPECT_LE(span_residual(h, data.slice(s, h.L)), 1e-8);
  }
}

TEST(StructureTest, QuadrotorLag) {
  const ContinuousSystem c = scenarios::build_quadrotor().model;
  const DiscreteSystem d = discretize_zoh(c, 0.1);
  EXPECT_EQ(lag(d.A, d.C), 2);
  Eigen::FullPivLU<MatrixXd> lu(observability_matrix(d.A, d.C, 2));
  EXPECT_EQ(lu.rank(), 12);
  EXPECT_EQ(Eigen::FullPivLU<MatrixXd>(controllability_matrix(d.A, d.B)).rank(), 12);
}

TEST(StructureTest, UnobservablePair) {
  const MatrixXd A = MatrixXd::Identity(2, 2);
  const MatrixXd C = (MatrixXd(1, 2) << 1.0, 0.0).finished();
  EXPECT_EQ(lag(A, C), -1);
}

TEST(StructureTest, SteadyState) {
  const DiscreteSystem d = testing::double_integrator();
  const VectorXd xs = steady_state(d, VectorXd::Zero(1), VectorXd::Constant(1, 0.3));
  EXPECT_TRUE(xs.isApprox(Eigen::Vector2d(0.3, 0.0), 1e-12));
}

TEST(ValidateTest, RejectsMismatch) {
  DiscreteSystem d = testing::double_integrator();
  d.C = MatrixXd::Zero(1, 3);
  EXPECT_THROW(validate(d), DimensionError);
}

}  // namespace
}  // namespace lti
}  // namespace ddsf
