#include <gtest/gtest.h>

#include "ddsf/lti.hpp"
#include "ddsf/scenarios.hpp"

namespace ddsf {
namespace scenarios {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST(QuadrotorTest, ModelReadbacks) {
  const Scenario sc = build_quadrotor();
  EXPECT_EQ(sc.model.states(), 12);
  EXPECT_EQ(sc.model.inputs(), 4);
  EXPECT_EQ(sc.model.outputs(), 6);
  EXPECT_DOUBLE_EQ(sc.model.A(7, 0), 9.81);
  EXPECT_DOUBLE_EQ(sc.model.B(8, 0), 5.0);
  EXPECT_TRUE(sc.model.D.isZero(0.0));
  EXPECT_EQ(sc.config.N_p, 20);
  EXPECT_EQ(sc.config.T_ini, 2);
  EXPECT_EQ(sc.config.window_length(), 24);
  EXPECT_DOUBLE_EQ(sc.config.Ts, 0.1);
  EXPECT_NO_THROW(validate(sc.config));
}

TEST(QuadrotorTest, ZeroInputStaysAtOrigin) {
  const lti::DiscreteSystem d = plant_for(build_quadrotor().config);
  const Trajectory t = lti::simulate(d, VectorXd::Zero(12), MatrixXd::Zero(4, 50));
  EXPECT_TRUE(t.outputs().isZero(0.0));
}

TEST(QuadrotorTest, DatasetChecks) {
  const ScenarioConfig cfg = build_quadrotor().config;
  const Trajectory data = collect_dataset(cfg);
  const DatasetReport r = check_dataset(cfg, data);
  EXPECT_EQ(r.pe_order, 36);
  EXPECT_TRUE(r.pe.is_pe);
  EXPECT_EQ(r.stacked_rank, 108);
  EXPECT_EQ(r.order_estimate, 12);
  EXPECT_LE(r.self_residual, 1e-12);
  EXPECT_LE(r.terminal_residual, 1e-8);
}

TEST(AccTest, ModelAndDefaults) {
  const Scenario sc = build_acc(7);
  EXPECT_EQ(sc.config.delay_steps, 7);
  EXPECT_DOUBLE_EQ(sc.config.Ts, 0.2);
  EXPECT_EQ(sc.config.N_p, 15);
  EXPECT_EQ(sc.config.T_ini, 15);
  EXPECT_DOUBLE_EQ(sc.model.B(1, 0), 1.0 / 1650.0);
  EXPECT_EQ(sc.config.bounds.u_max(0), 2000.0);
  EXPECT_EQ(sc.config.bounds.y_max(0), 1.0);
  EXPECT_THROW(build_acc(11), InvalidArgument);
}

TEST(AccTest, StackedRankCountsDelayStates) {
  for (int delay : {0, 1, 4, 10}) {
    const ScenarioConfig cfg = build_acc(delay).config;
    const DatasetReport r = check_dataset(cfg, collect_dataset(cfg));
    EXPECT_TRUE(r.pe.is_pe) << "delay " << delay;
    EXPECT_EQ(r.stacked_rank, 45 + 2 + delay) << "delay " << delay;
  }
}

TEST(PrbsTest, DeterministicAndBounded) {
  const VectorXd amp = (VectorXd(2) << 0.5, 2.0).finished();
  const VectorXd lo = VectorXd::Constant(2, -1.0);
  const VectorXd hi = VectorXd::Constant(2, 1.0);
  const MatrixXd a = prbs(2, 500, amp, 9, lo, hi);
  const MatrixXd b = prbs(2, 500, amp, 9, lo, hi);
  const MatrixXd c = prbs(2, 500, amp, 10, lo, hi);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  EXPECT_LE(a.row(0).cwiseAbs().maxCoeff(), 0.5);
  EXPECT_GT(a.row(0).cwiseAbs().minCoeff(), 0.0);
  EXPECT_LE(a.row(1).cwiseAbs().maxCoeff(), 1.0);
  // Both signs appear on each channel.
  EXPECT_LT(a.row(0).minCoeff(), 0.0);
  EXPECT_GT(a.row(0).maxCoeff(), 0.0);
  EXPECT_THROW(prbs(2, 0, amp, 9, lo, hi), InvalidArgument);
}

TEST(PrbsTest, QuadrotorExcitationIsPersistent) {
  const ScenarioConfig cfg = build_quadrotor().config;
  const VectorXd amp = 0.5 * (cfg.bounds.u_max - cfg.bounds.u_min);
  int failures = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const MatrixXd u = prbs(4, 400, amp, seed, cfg.bounds.u_min, cfg.bounds.u_max);
    if (!pe_order_check(u, 36).is_pe) ++failures;
  }
  EXPECT_EQ(failures, 0);
}

TEST(UniformTest, WithinBox) {
  const MatrixXd u = uniform_inputs(VectorXd::Constant(1, -3.0), VectorXd::Constant(1, 2.0),
                                    1000, 4);
  EXPECT_GE(u.minCoeff(), -3.0);
  EXPECT_LT(u.maxCoeff(), 2.0);
  EXPECT_EQ(u, uniform_inputs(VectorXd::Constant(1, -3.0), VectorXd::Constant(1, 2.0), 1000, 4));
}

TEST(LqrTest, StabilizesQuadrotor) {
  const lti::DiscreteSystem d = plant_for(build_quadrotor().config);
  const MatrixXd K = dlqr(d.A, d.B, MatrixXd::Identity(12, 12), MatrixXd::Identity(4, 4));
  const MatrixXd Acl = d.A - d.B * K;
  EXPECT_LT(Acl.eigenvalues().cwiseAbs().maxCoeff(), 1.0);
}

TEST(ValidateTest, RejectsBadConfigs) {
  ScenarioConfig cfg = build_quadrotor().config;
  cfg.N_p = 1;
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg = build_quadrotor().config;
  cfg.dataset.length = 10;
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg = build_quadrotor().config;
  cfg.name = "boat";
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg = build_acc(0).config;
  cfg.R = VectorXd::Constant(1, -1.0);
  EXPECT_THROW(validate(cfg), ConfigError);
}

TEST(RunTest, EquilibriumHold) {
  const ScenarioConfig cfg = build_acc(3).config;
  const auto [plant, window] = equilibrium_hold(plant_for(cfg), cfg.terminal, cfg.T_ini);
  EXPECT_EQ(window.length(), 15);
  EXPECT_TRUE(window.samples().outputs().isZero(0.0));
  EXPECT_TRUE(plant.x.isZero(0.0));
}

TEST(RunTest, UnfilteredBaselinesViolate) {
  EXPECT_GT(max_output_violation(build_quadrotor().config, run_unfiltered(build_quadrotor().config)),
            1e-6);
  const ScenarioConfig acc = build_acc(1).config;
  EXPECT_GT(max_output_violation(acc, run_unfiltered(acc)), 1e-6);
}

TEST(RunTest, AccShortRunIsSafe) {
  ScenarioConfig cfg = build_acc(2).config;
  cfg.run.steps = 40;
  const RunLog log = run_scenario(cfg, collect_dataset(cfg));
  ASSERT_EQ(log.records.size(), 40u);
  EXPECT_LE(max_output_violation(cfg, log), 1e-6);
  EXPECT_LE(max_input_violation(cfg, log), 1e-6);
  for (const RunRecord& r : log.records) EXPECT_EQ(r.qp_status, "optimal");
}

}  // namespace
}  // namespace scenarios
}  // namespace ddsf
