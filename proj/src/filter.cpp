#include "ddsf/filter.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

namespace ddsf {

namespace {

Eigen::VectorXd repeat(const Eigen::VectorXd& v, Eigen::Index times) {
  return v.replicate(times, 1);
}

}  // namespace

void validate(const FilterConfig& cfg, const HankelPair& h) {
  if (cfg.T_ini < 1) throw ConfigError("T_ini must be at least 1");
  if (cfg.N_p < cfg.T_ini) {
    throw ConfigError("prediction horizon N_p must be at least T_ini");
  }
  if (h.L != cfg.window_length()) {
    throw ConfigError("Hankel depth " + std::to_string(h.L) +
                      " differs from N_p + 2 T_ini = " +
                      std::to_string(cfg.window_length()));
  }
  if (h.columns() < 1) throw ConfigError("Hankel matrix has no columns");
  if (cfg.R.rows() != h.m || cfg.R.cols() != h.m) {
    throw DimensionError("R must be m x m");
  }
  if (!cfg.R.isApprox(cfg.R.transpose(), 1e-12) ||
      Eigen::LLT<Eigen::MatrixXd>(cfg.R).info() != Eigen::Success) {
    throw ConfigError("R must be symmetric positive definite");
  }
  if (cfg.terminal.u_s.size() != h.m || cfg.terminal.y_s.size() != h.p) {
    throw DimensionError("terminal point dimension mismatch");
  }
  if (cfg.u_set.dim() != h.m) throw DimensionError("input set dimension mismatch");
  if (cfg.y_set.dim() != h.p) throw DimensionError("output set dimension mismatch");
}

namespace {

// Parts of the program that do not depend on the window or u_l.
struct StaticParts {
  Eigen::MatrixXd P;
  Eigen::MatrixXd RH0;
  Eigen::MatrixXd A_eq;
  Eigen::MatrixXd G;
  Eigen::VectorXd h;
};

StaticParts static_parts(const HankelPair& h, const FilterConfig& cfg) {
  validate(cfg, h);
  const Eigen::Index m = h.m;
  const Eigen::Index p = h.p;
  const Eigen::Index T = cfg.T_ini;
  const Eigen::Index Np = cfg.N_p;
  StaticParts sp;

  const auto H0 = h.input_block(T);
  sp.RH0 = cfg.R * H0;
  sp.P = 2.0 * H0.transpose() * sp.RH0;

  const Eigen::Index term = T + Np;
  sp.A_eq.resize(2 * (m + p) * T, h.columns());
  sp.A_eq << h.Hu.topRows(m * T), h.Hy.topRows(p * T), h.Hu.middleRows(m * term, m * T),
      h.Hy.middleRows(p * term, p * T);

  const Eigen::Index cu = cfg.u_set.rows();
  const Eigen::Index cy = cfg.y_set.rows();
  sp.G.resize(Np * (cu + cy), h.columns());
  sp.h.resize(Np * (cu + cy));
  for (Eigen::Index k = 0; k < Np; ++k) {
    const Eigen::Index r = k * (cu + cy);
    sp.G.middleRows(r, cu).noalias() = cfg.u_set.A * h.input_block(T + k);
    sp.h.segment(r, cu) = cfg.u_set.b;
    sp.G.middleRows(r + cu, cy).noalias() = cfg.y_set.A * h.output_block(T + k);
    sp.h.segment(r + cu, cy) = cfg.y_set.b;
  }
  return sp;
}

Eigen::VectorXd equality_rhs(const HankelPair& h, const FilterConfig& cfg,
                             const InitWindow& window) {
  const Eigen::Index T = cfg.T_ini;
  if (window.length() != T || window.samples().input_dim() != h.m ||
      window.samples().output_dim() != h.p) {
    throw DimensionError("initial window does not match configuration");
  }
  Eigen::VectorXd b(2 * (h.m + h.p) * T);
  b << window.samples().stacked_inputs(), window.samples().stacked_outputs(),
      repeat(cfg.terminal.u_s, T), repeat(cfg.terminal.y_s, T);
  return b;
}

void check_input(const HankelPair& h, const Eigen::VectorXd& u_l) {
  if (u_l.size() != h.m) throw DimensionError("learning input dimension mismatch");
  if (!u_l.allFinite()) throw InvalidArgument("learning input must be finite");
}

}  // namespace

qp::QpProblem assemble_qp(const HankelPair& h, const FilterConfig& cfg,
                          const InitWindow& window, const Eigen::VectorXd& u_l) {
  StaticParts sp = static_parts(h, cfg);
  Eigen::VectorXd b_eq = equality_rhs(h, cfg, window);
  check_input(h, u_l);
  Eigen::VectorXd q = -2.0 * sp.RH0.transpose() * u_l;
  return qp::make_problem(std::move(sp.P), std::move(q), std::move(sp.A_eq),
                          std::move(b_eq), std::move(sp.G), std::move(sp.h));
}

FilterSolver::FilterSolver(const HankelPair& h, const FilterConfig& cfg)
    : h_(h), cfg_(cfg) {
  StaticParts sp = static_parts(h, cfg);

  const Eigen::MatrixXd H = h.stacked();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(H, Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double threshold = static_cast<double>(std::max(H.rows(), H.cols())) *
                           std::numeric_limits<double>::epsilon() *
                           (sv.size() > 0 ? sv(0) : 0.0) * RankSettings{}.scale;
  basis_ = svd.matrixV().leftCols((sv.array() > threshold).count());

  full_.P = std::move(sp.P);
  full_.q = Eigen::VectorXd::Zero(h.columns());
  full_.A_eq = std::move(sp.A_eq);
  full_.b_eq = Eigen::VectorXd::Zero(full_.A_eq.rows());
  full_.G_in = std::move(sp.G);
  full_.h_in = std::move(sp.h);
  RH0_ = std::move(sp.RH0);

  Eigen::MatrixXd Pr = basis_.transpose() * full_.P * basis_;
  reduced_ = qp::make_problem(std::move(Pr), Eigen::VectorXd::Zero(basis_.cols()),
                              full_.A_eq * basis_, full_.b_eq, full_.G_in * basis_,
                              full_.h_in);
}

FilterStep FilterSolver::step(const FilterState& state, const Eigen::VectorXd& u_l,
                              const qp::InitialIterate* start) const {
  check_input(h_, u_l);
  qp::QpProblem full = full_;
  full.b_eq = equality_rhs(h_, cfg_, state.window);
  full.q = -2.0 * RH0_.transpose() * u_l;

  qp::QpProblem reduced = reduced_;
  reduced.b_eq = full.b_eq;
  reduced.q = basis_.transpose() * full.q;

  qp::InitialIterate reduced_start;
  if (start != nullptr) {
    reduced_start = *start;
    if (start->z.size() == full.num_vars()) reduced_start.z = basis_.transpose() * start->z;
  }
  qp::QpSolution sol =
      qp::solve_qp(reduced, cfg_.qp_settings, start != nullptr ? &reduced_start : nullptr);

  const Eigen::Index T = cfg_.T_ini;
  const Eigen::Index len = cfg_.N_p + T;
  FilterStep out;
  out.alpha = basis_ * sol.z;
  const Eigen::VectorXd u_pred = h_.Hu.bottomRows(h_.m * len) * out.alpha;
  const Eigen::VectorXd y_pred = h_.Hy.bottomRows(h_.p * len) * out.alpha;
  out.predicted = Trajectory(u_pred.reshaped(h_.m, len), y_pred.reshaped(h_.p, len));
  out.u_safe = out.predicted.input(0);
  const Eigen::VectorXd d = out.u_safe - u_l;
  out.intervention = d.dot(cfg_.R * d);
  out.status = sol.status;
  out.qp_iterations = sol.iterations;
  out.residuals = qp::verify_kkt(full, out.alpha, sol.lambda_eq, sol.mu_in);
  out.diagnostic = std::move(sol.diagnostic);
  if (out.status == qp::QpStatus::Optimal && !out.residuals.within(cfg_.qp_settings.kkt_tol)) {
    out.status = qp::QpStatus::MaxIterations;
    std::ostringstream msg;
    msg << "KKT residual " << out.residuals.max() << " of the coefficient program above "
        << cfg_.qp_settings.kkt_tol;
    out.diagnostic = msg.str();
  }
  return out;
}

FilterStep filter_step(const HankelPair& h, const FilterConfig& cfg,
                       const FilterState& state, const Eigen::VectorXd& u_l,
                       const qp::InitialIterate* start) {
  return FilterSolver(h, cfg).step(state, u_l, start);
}

FilterState advance(const FilterState& state, const Eigen::VectorXd& applied_u,
                    const Eigen::VectorXd& measured_y) {
  FilterState next;
  next.window = state.window.shifted(applied_u, measured_y);
  next.step_index = state.step_index + 1;
  return next;
}

LoopResult run_loop(const PlantInterface& plant, const HankelPair& h,
                    const FilterConfig& cfg, FilterState initial,
                    const Eigen::MatrixXd& learning_inputs) {
  const FilterSolver solver(h, cfg);
  if (learning_inputs.rows() != h.m) {
    throw DimensionError("learning inputs have wrong channel count");
  }
  LoopResult result;
  result.steps.reserve(static_cast<size_t>(learning_inputs.cols()));
  FilterState state = std::move(initial);
  for (Eigen::Index k = 0; k < learning_inputs.cols(); ++k) {
    FilterStep fs = solver.step(state, learning_inputs.col(k));
    if (fs.status != qp::QpStatus::Optimal) {
      std::optional<Eigen::VectorXd> fallback;
      if (!result.steps.empty()) fallback = result.steps.back().predicted.input(1);
      std::ostringstream msg;
      msg << "safety filter QP " << qp::to_string(fs.status) << " at step "
          << state.step_index << " (KKT residual " << fs.residuals.max() << ")";
      if (!fs.diagnostic.empty()) msg << ": " << fs.diagnostic;
      throw FilterFailure(msg.str(), state.step_index, fs.status, fs.residuals,
                          std::move(fallback));
    }
    const Eigen::VectorXd y = plant(fs.u_safe);
    result.log.push_back(fs.u_safe, y);
    state = advance(state, fs.u_safe, y);
    result.steps.push_back(std::move(fs));
  }
  result.final_state = std::move(state);
  return result;
}

}  // namespace ddsf
