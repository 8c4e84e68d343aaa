#include "ddsf/qp.hpp"

#include "active_set.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

namespace ddsf::qp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;
constexpr double kEqRhoScale = 1e3;
constexpr double kScaleMin = 1e-4;
constexpr double kScaleMax = 1e4;
constexpr double kInfeasTol = 1e-5;
constexpr double kPolishDelta = 1e-9;
constexpr int kPolishRefine = 20;
constexpr int kCrossoverIter = 500;
constexpr int kProximalPasses = 8;
constexpr int kPolishActiveSetPasses = 1;

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

void fix_empty(Eigen::MatrixXd& A, Eigen::VectorXd& b, Eigen::Index n,
               const char* name) {
  if (A.size() == 0 && b.size() == 0) {
    A.resize(0, n);
    b.resize(0);
    return;
  }
  if (A.cols() != n) {
    throw DimensionError(std::string(name) + " has " +
                         std::to_string(A.cols()) + " columns, expected " +
                         std::to_string(n));
  }
  if (A.rows() != b.size()) {
    throw DimensionError(std::string(name) + " rows and rhs size differ");
  }
}

double inf_norm(const Eigen::VectorXd& v) {
  return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>();
}

// Problem in equilibrated coordinates: z = D zs, y = E ys / c.
struct Scaled {
  Eigen::MatrixXd P;  // c D (P + eps I) D
  Eigen::VectorXd q;  // c D q
  Eigen::MatrixXd A;  // E [A_eq; G_in] D
  Eigen::VectorXd l;
  Eigen::VectorXd u;
  Eigen::VectorXd D;
  Eigen::VectorXd E;
  double c{1.0};
  Eigen::Index n{0};
  Eigen::Index me{0};
  Eigen::Index mi{0};
};

double clamp_scale(double norm) {
  if (norm < kScaleMin) return 1.0;
  return std::clamp(norm, kScaleMin, kScaleMax);
}

Scaled equilibrate(const QpProblem& pr, const QpSettings& st) {
  Scaled s;
  s.n = pr.num_vars();
  s.me = pr.num_eq();
  s.mi = pr.num_in();
  const Eigen::Index m = s.me + s.mi;

  s.P = pr.P;
  s.P.diagonal().array() += st.reg_eps;
  s.q = pr.q;
  s.A.resize(m, s.n);
  s.A.topRows(s.me) = pr.A_eq;
  s.A.bottomRows(s.mi) = pr.G_in;
  s.l.resize(m);
  s.u.resize(m);
  s.l.head(s.me) = pr.b_eq;
  s.u.head(s.me) = pr.b_eq;
  s.l.tail(s.mi).setConstant(-kInf);
  s.u.tail(s.mi) = pr.h_in;

  s.D = Eigen::VectorXd::Ones(s.n);
  s.E = Eigen::VectorXd::Ones(m);

  // Ruiz equilibration of the KKT matrix [P A'; A 0].
  for (int it = 0; it < st.scaling_iters; ++it) {
    Eigen::VectorXd dv(s.n);
    for (Eigen::Index j = 0; j < s.n; ++j) {
      double nrm = s.P.col(j).lpNorm<Eigen::Infinity>();
      if (m > 0) nrm = std::max(nrm, s.A.col(j).lpNorm<Eigen::Infinity>());
      dv(j) = 1.0 / std::sqrt(clamp_scale(nrm));
    }
    Eigen::VectorXd de(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      de(i) = 1.0 / std::sqrt(clamp_scale(s.A.row(i).lpNorm<Eigen::Infinity>()));
    }
    s.P = dv.asDiagonal() * s.P * dv.asDiagonal();
    s.A = de.asDiagonal() * s.A * dv.asDiagonal();
    s.q = dv.cwiseProduct(s.q);
    s.D = s.D.cwiseProduct(dv);
    s.E = s.E.cwiseProduct(de);
  }
  s.l = s.E.cwiseProduct(s.l);  // -inf stays -inf
  s.u = s.E.cwiseProduct(s.u);

  // Cost scaling.
  double mean_col = 0.0;
  for (Eigen::Index j = 0; j < s.n; ++j) {
    mean_col += s.P.col(j).lpNorm<Eigen::Infinity>();
  }
  mean_col = s.n > 0 ? mean_col / static_cast<double>(s.n) : 1.0;
  const double cost_norm = std::max(mean_col, inf_norm(s.q));
  s.c = 1.0 / clamp_scale(cost_norm);
  s.P *= s.c;
  s.q *= s.c;
  return s;
}

struct Unscaled {
  Eigen::VectorXd z;
  Eigen::VectorXd lambda_eq;
  Eigen::VectorXd mu_in;
};

Unscaled unscale(const Scaled& s, const Eigen::VectorXd& x,
                 const Eigen::VectorXd& y) {
  Unscaled out;
  out.z = s.D.cwiseProduct(x);
  const Eigen::VectorXd yu = s.E.cwiseProduct(y) / s.c;
  out.lambda_eq = yu.head(s.me);
  out.mu_in = yu.tail(s.mi);
  return out;
}

// Solves [P A'; A 0] [x; lam] = [r1; r2] through the quasi-definite
// regularization [P+dI A'; A -dI] and iterative refinement.
bool solve_kkt_refined(const Eigen::MatrixXd& P, const Eigen::MatrixXd& A,
                       const Eigen::VectorXd& r1, const Eigen::VectorXd& r2,
                       Eigen::VectorXd& x, Eigen::VectorXd& lam) {
  const Eigen::Index n = P.rows();
  const Eigen::Index k = A.rows();
  Eigen::MatrixXd K(n + k, n + k);
  K.topLeftCorner(n, n) = P;
  K.topRightCorner(n, k) = A.transpose();
  K.bottomLeftCorner(k, n) = A;
  K.bottomRightCorner(k, k).setZero();

  Eigen::MatrixXd Kreg = K;
  Kreg.diagonal().head(n).array() += kPolishDelta;
  Kreg.diagonal().tail(k).array() -= kPolishDelta;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(Kreg);

  Eigen::VectorXd rhs(n + k);
  rhs << r1, r2;
  Eigen::VectorXd sol = Eigen::VectorXd::Zero(n + k);
  const double rhs_norm = std::max(1.0, inf_norm(rhs));
  double prev = kInf;
  for (int it = 0; it < kPolishRefine; ++it) {
    const Eigen::VectorXd res = rhs - K * sol;
    const double rn = inf_norm(res);
    if (!std::isfinite(rn)) return false;
    if (rn <= 1e-14 * rhs_norm || rn >= prev) break;
    prev = rn;
    sol += lu.solve(res);
  }
  x = sol.head(n);
  lam = sol.tail(k);
  return sol.allFinite();
}

// Equality-constrained solves on a guessed active set, corrected by
// primal-dual active-set passes. Returns unscaled candidate.
bool polish(const Scaled& s, const Eigen::VectorXd& z, const Eigen::VectorXd& y,
            double tol, double reg_eps, Unscaled& out) {
  std::vector<char> active(static_cast<size_t>(s.mi), 0);
  for (Eigen::Index i = 0; i < s.mi; ++i) {
    const Eigen::Index r = s.me + i;
    active[static_cast<size_t>(i)] = (s.u(r) - z(r) < y(r)) ? 1 : 0;
  }

  Eigen::VectorXd xs;
  Eigen::VectorXd ys;
  Eigen::MatrixXd Aact;
  Eigen::VectorXd bact;
  std::vector<Eigen::Index> rows;
  for (int pass = 0; pass < kPolishActiveSetPasses; ++pass) {
    rows.clear();
    for (Eigen::Index r = 0; r < s.me; ++r) rows.push_back(r);
    for (Eigen::Index i = 0; i < s.mi; ++i) {
      if (active[static_cast<size_t>(i)]) rows.push_back(s.me + i);
    }
    const auto k = static_cast<Eigen::Index>(rows.size());
    Aact.resize(k, s.n);
    bact.resize(k);
    for (Eigen::Index r = 0; r < k; ++r) {
      const Eigen::Index src = rows[static_cast<size_t>(r)];
      Aact.row(r) = s.A.row(src);
      bact(r) = s.u(src);
    }
    Eigen::VectorXd lam;
    if (!solve_kkt_refined(s.P, Aact, -s.q, bact, xs, lam)) return false;

    ys = Eigen::VectorXd::Zero(s.me + s.mi);
    for (Eigen::Index r = 0; r < k; ++r) ys(rows[static_cast<size_t>(r)]) = lam(r);

    // Primal violation and multiplier sign, measured in original units.
    const Eigen::VectorXd Ax = s.A.bottomRows(s.mi) * xs;
    bool changed = false;
    for (Eigen::Index i = 0; i < s.mi; ++i) {
      const Eigen::Index r = s.me + i;
      const double e = s.E(r);
      if (active[static_cast<size_t>(i)]) {
        if (ys(r) * e / s.c < -tol) {
          active[static_cast<size_t>(i)] = 0;
          changed = true;
        }
      } else if ((Ax(i) - s.u(r)) / e > tol) {
        active[static_cast<size_t>(i)] = 1;
        changed = true;
      }
    }
    if (!changed) break;
  }

  // Proximal passes on the final active set cancel the ridge.
  const Eigen::VectorXd ridge = (s.c * reg_eps) * s.D.cwiseAbs2();
  for (int pass = 0; pass < kProximalPasses && reg_eps > 0.0; ++pass) {
    Eigen::VectorXd xn;
    Eigen::VectorXd lam;
    if (!solve_kkt_refined(s.P, Aact, ridge.cwiseProduct(xs) - s.q, bact, xn, lam)) break;
    const double step = inf_norm(xn - xs);
    xs = std::move(xn);
    ys.setZero();
    for (size_t r = 0; r < rows.size(); ++r) ys(rows[r]) = lam(static_cast<Eigen::Index>(r));
    if (step <= 1e-15 * (1.0 + inf_norm(xs))) break;
  }
  out = unscale(s, xs, ys);
  return out.z.allFinite();
}

class AdmmSolver {
 public:
  AdmmSolver(const Scaled& s, const QpSettings& st) : s_(s), st_(st) {
    const Eigen::Index m = s.me + s.mi;
    rho_base_ = st.rho;
    rho_.resize(m);
    set_rho(rho_base_);
    x_ = Eigen::VectorXd::Zero(s.n);
    z_ = Eigen::VectorXd::Zero(m);
    y_ = Eigen::VectorXd::Zero(m);
    factor();
  }

  void warm_start(const InitialIterate& start) {
    if (start.z.size() == s_.n) x_ = start.z.cwiseQuotient(s_.D);
    Eigen::VectorXd y(s_.me + s_.mi);
    if (start.lambda_eq.size() == s_.me && start.mu_in.size() == s_.mi) {
      y << start.lambda_eq, start.mu_in;
      y_ = s_.c * y.cwiseQuotient(s_.E);
    }
    z_ = project(s_.A * x_);
  }

  void iterate() {
    y_prev_ = y_;
    const Eigen::VectorXd rhs =
        st_.sigma * x_ - s_.q + s_.A.transpose() * (rho_.cwiseProduct(z_) - y_);
    const Eigen::VectorXd xt = llt_.solve(rhs);
    const Eigen::VectorXd zt = s_.A * xt;
    const double a = st_.relaxation;
    x_ = a * xt + (1.0 - a) * x_;
    const Eigen::VectorXd zr = a * zt + (1.0 - a) * z_;
    const Eigen::VectorXd znew = project(zr + y_.cwiseQuotient(rho_));
    y_ += rho_.cwiseProduct(zr - znew);
    z_ = znew;
  }

  struct Residuals {
    double prim{0};
    double dual{0};
    double prim_scale{0};
    double dual_scale{0};
  };

  Residuals residuals() const {
    Residuals r;
    const Eigen::VectorXd Ax = s_.A * x_;
    const Eigen::VectorXd Einv = s_.E.cwiseInverse();
    r.prim = inf_norm(Einv.cwiseProduct(Ax - z_));
    r.prim_scale = std::max(inf_norm(Einv.cwiseProduct(Ax)),
                            inf_norm(Einv.cwiseProduct(z_)));
    const Eigen::VectorXd Dinv = s_.D.cwiseInverse();
    const Eigen::VectorXd Px = s_.P * x_;
    const Eigen::VectorXd Aty = s_.A.transpose() * y_;
    r.dual = inf_norm(Dinv.cwiseProduct(Px + s_.q + Aty)) / s_.c;
    r.dual_scale = std::max({inf_norm(Dinv.cwiseProduct(Px)),
                             inf_norm(Dinv.cwiseProduct(Aty)),
                             inf_norm(Dinv.cwiseProduct(s_.q))}) /
                   s_.c;
    return r;
  }

  // Farkas-type test on the last dual increment.
  bool infeasibility_certificate(Eigen::VectorXd& cert) const {
    const Eigen::VectorXd dy = y_ - y_prev_;
    const Eigen::VectorXd dyu = s_.E.cwiseProduct(dy);
    const double dnorm = inf_norm(dyu);
    if (dnorm <= 1e-12) return false;
    const Eigen::VectorXd Atdy = s_.D.cwiseInverse().cwiseProduct(s_.A.transpose() * dy);
    if (inf_norm(Atdy) > kInfeasTol * dnorm) return false;
    double support = 0.0;
    for (Eigen::Index i = 0; i < dy.size(); ++i) {
      if (dy(i) > 0) {
        support += s_.u(i) * dy(i);
      } else if (dy(i) < 0) {
        if (!std::isfinite(s_.l(i))) return false;
        support += s_.l(i) * dy(i);
      }
    }
    if (support >= -kInfeasTol * dnorm) return false;
    cert = dyu / dnorm;
    return true;
  }

  void adapt_rho(const Residuals& r) {
    const double pn = r.prim / std::max(r.prim_scale, 1e-30);
    const double dn = r.dual / std::max(r.dual_scale, 1e-30);
    if (!(pn > 0) || !(dn > 0)) return;
    double next = rho_base_ * std::sqrt(pn / dn);
    next = std::clamp(next, kRhoMin, kRhoMax);
    if (next > 5.0 * rho_base_ || next < 0.2 * rho_base_) {
      // Duals are stored in absolute units, so only the penalty changes.
      rho_base_ = next;
      set_rho(rho_base_);
      factor();
    }
  }

  const Eigen::VectorXd& x() const { return x_; }
  const Eigen::VectorXd& z() const { return z_; }
  const Eigen::VectorXd& y() const { return y_; }

 private:
  void set_rho(double base) {
    for (Eigen::Index i = 0; i < rho_.size(); ++i) {
      rho_(i) = i < s_.me ? base * kEqRhoScale : base;
    }
  }

  void factor() {
    Eigen::MatrixXd K = s_.P;
    K.diagonal().array() += st_.sigma;
    if (gram_eq_.size() == 0) {
      gram_eq_ = Eigen::MatrixXd::Zero(s_.n, s_.n);
      gram_in_ = Eigen::MatrixXd::Zero(s_.n, s_.n);
      gram_eq_.selfadjointView<Eigen::Lower>().rankUpdate(s_.A.topRows(s_.me).transpose());
      gram_in_.selfadjointView<Eigen::Lower>().rankUpdate(s_.A.bottomRows(s_.mi).transpose());
    }
    K += rho_base_ * kEqRhoScale * gram_eq_ + rho_base_ * gram_in_;
    llt_.compute(K);
  }

  Eigen::VectorXd project(const Eigen::VectorXd& v) const {
    return v.cwiseMax(s_.l).cwiseMin(s_.u);
  }

  const Scaled& s_;
  const QpSettings& st_;
  double rho_base_;
  Eigen::VectorXd rho_;
  Eigen::VectorXd x_;
  Eigen::VectorXd z_;
  Eigen::VectorXd y_;
  Eigen::VectorXd y_prev_;
  Eigen::MatrixXd gram_eq_;
  Eigen::MatrixXd gram_in_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

// Exact dual active-set solves of the equilibrated problem. The ridge is
// cancelled by proximal passes, each centred at the previous solution.
bool crossover(const Scaled& s, double reg_eps, Unscaled& out) {
  const Eigen::VectorXd ridge = (s.c * reg_eps) * s.D.cwiseAbs2();
  const auto A_eq = s.A.topRows(s.me);
  const auto G = s.A.bottomRows(s.mi);
  Eigen::VectorXd q = s.q;
  detail::DualActiveSetResult r;
  for (int pass = 0; pass < kProximalPasses; ++pass) {
    auto next = detail::dual_active_set(s.P, q, A_eq, s.u.head(s.me), G, s.u.tail(s.mi));
    if (next.status != detail::DualActiveSetStatus::Optimal) {
      if (pass == 0) return false;
      break;
    }
    const double step = pass == 0 ? kInf : inf_norm(next.x - r.x);
    r = std::move(next);
    if (step <= 1e-15 * (1.0 + inf_norm(r.x))) break;
    q = s.q - ridge.cwiseProduct(r.x);
  }
  Eigen::VectorXd y(s.me + s.mi);
  y << r.lambda_eq, r.mu_in;
  out = unscale(s, r.x, y);
  return out.z.allFinite();
}

void finish(const QpProblem& pr, QpSolution& sol, Unscaled&& cand) {
  sol.z = std::move(cand.z);
  sol.lambda_eq = std::move(cand.lambda_eq);
  sol.mu_in = std::move(cand.mu_in);
  sol.residuals = verify_kkt(pr, sol.z, sol.lambda_eq, sol.mu_in);
  sol.objective = objective(pr, sol.z);
}

}  // namespace

double KktResiduals::max() const {
  return std::max({stationarity, primal_eq, primal_in, dual_in, comp_slack});
}

std::string_view to_string(QpStatus status) {
  switch (status) {
    case QpStatus::Optimal:
      return "optimal";
    case QpStatus::Infeasible:
      return "infeasible";
    case QpStatus::MaxIterations:
      return "max_iterations";
  }
  return "unknown";
}

QpProblem make_problem(Eigen::MatrixXd P, Eigen::VectorXd q,
                       Eigen::MatrixXd A_eq, Eigen::VectorXd b_eq,
                       Eigen::MatrixXd G_in, Eigen::VectorXd h_in) {
  if (P.rows() != P.cols()) throw DimensionError("P must be square");
  const Eigen::Index n = P.rows();
  if (q.size() != n) throw DimensionError("q size differs from P");
  fix_empty(A_eq, b_eq, n, "A_eq");
  fix_empty(G_in, h_in, n, "G_in");
  if (!all_finite(P) || !q.allFinite() || !all_finite(A_eq) ||
      !b_eq.allFinite() || !all_finite(G_in) || !h_in.allFinite()) {
    throw InvalidArgument("QP data must be finite");
  }

  QpProblem pr;
  pr.P = 0.5 * (P + P.transpose());
  const double pnorm = pr.P.norm();
  if (pnorm > 0.0) {
    Eigen::MatrixXd shifted = pr.P;
    shifted.diagonal().array() += 1e-10 * pnorm;
    if (Eigen::LLT<Eigen::MatrixXd>(shifted).info() != Eigen::Success) {
      throw InvalidArgument("P is not positive semidefinite");
    }
  }
  pr.q = std::move(q);
  pr.A_eq = std::move(A_eq);
  pr.b_eq = std::move(b_eq);
  pr.G_in = std::move(G_in);
  pr.h_in = std::move(h_in);
  return pr;
}

double objective(const QpProblem& problem, const Eigen::VectorXd& z) {
  return 0.5 * z.dot(problem.P * z) + problem.q.dot(z);
}

KktResiduals verify_kkt(const QpProblem& pr, const Eigen::VectorXd& z,
                        const Eigen::VectorXd& lambda_eq,
                        const Eigen::VectorXd& mu_in) {
  if (z.size() != pr.num_vars() || lambda_eq.size() != pr.num_eq() ||
      mu_in.size() != pr.num_in()) {
    throw DimensionError("verify_kkt: solution sizes do not match problem");
  }
  KktResiduals r;
  Eigen::VectorXd grad = pr.P * z + pr.q;
  if (pr.num_eq() > 0) grad.noalias() += pr.A_eq.transpose() * lambda_eq;
  if (pr.num_in() > 0) grad.noalias() += pr.G_in.transpose() * mu_in;
  r.stationarity = inf_norm(grad);
  if (pr.num_eq() > 0) r.primal_eq = inf_norm(pr.A_eq * z - pr.b_eq);
  if (pr.num_in() > 0) {
    const Eigen::VectorXd slack = pr.G_in * z - pr.h_in;
    r.primal_in = std::max(0.0, slack.maxCoeff());
    r.dual_in = std::max(0.0, -mu_in.minCoeff());
    r.comp_slack = inf_norm(mu_in.cwiseProduct(slack));
  }
  return r;
}

QpSolution solve_qp(const QpProblem& pr, const QpSettings& st,
                    const InitialIterate* start) {
  if (st.kkt_tol <= 0.0 || st.max_iter <= 0 || st.reg_eps < 0.0) {
    throw InvalidArgument("invalid QP settings");
  }
  const Scaled s = equilibrate(pr, st);
  AdmmSolver admm(s, st);
  if (start != nullptr) admm.warm_start(*start);

  QpSolution best;
  best.status = QpStatus::MaxIterations;
  double best_res = kInf;
  auto consider = [&](Unscaled&& cand, int iters, bool polished) -> bool {
    QpSolution trial;
    finish(pr, trial, std::move(cand));
    trial.iterations = iters;
    trial.polished = polished;
    const double res = trial.residuals.max();
    if (res < best_res) {
      best_res = res;
      best = std::move(trial);
    }
    return res <= st.kkt_tol;
  };

  // Exact dual active-set solve; needs reg_eps > 0.
  bool crossed = st.reg_eps <= 0.0;
  auto try_crossover = [&](int iter) -> bool {
    if (crossed) return false;
    crossed = true;
    Unscaled exact;
    return crossover(s, st.reg_eps, exact) && consider(std::move(exact), iter, true);
  };

  const int check = std::max(1, st.check_interval);
  double eps = 1e-3;
  int infeasible_run = 0;
  int checks_since_rho = 0;
  for (int iter = 1; iter <= st.max_iter; ++iter) {
    admm.iterate();
    if (iter % check != 0 && iter != st.max_iter) continue;

    const auto r = admm.residuals();
    if (r.prim <= eps * (1.0 + r.prim_scale) &&
        r.dual <= eps * (1.0 + r.dual_scale)) {
      Unscaled cand;
      if (polish(s, admm.z(), admm.y(), st.kkt_tol, st.reg_eps, cand) &&
          consider(std::move(cand), iter, true)) {
        best.status = QpStatus::Optimal;
        return best;
      }
      if (try_crossover(iter)) {
        best.status = QpStatus::Optimal;
        return best;
      }
      if (consider(unscale(s, admm.x(), admm.y()), iter, false)) {
        best.status = QpStatus::Optimal;
        return best;
      }
      eps = std::max(eps * 0.1, 1e-13);
    }

    if (iter >= kCrossoverIter && try_crossover(iter)) {
      best.status = QpStatus::Optimal;
      return best;
    }

    Eigen::VectorXd cert;
    if (admm.infeasibility_certificate(cert)) {
      infeasible_run += check;
      if (infeasible_run >= st.infeasible_patience) {
        QpSolution out;
        finish(pr, out, unscale(s, admm.x(), admm.y()));
        out.status = QpStatus::Infeasible;
        out.iterations = iter;
        out.certificate = std::move(cert);
        std::ostringstream msg;
        msg << "primal infeasible: dual ray held for " << infeasible_run
            << " iterations; primal residual " << r.prim;
        out.diagnostic = msg.str();
        return out;
      }
    } else {
      infeasible_run = 0;
    }

    if (++checks_since_rho >= 5) {
      checks_since_rho = 0;
      admm.adapt_rho(r);
    }
  }

  if (best_res == kInf) {
    consider(unscale(s, admm.x(), admm.y()), st.max_iter, false);
  }
  best.status = QpStatus::MaxIterations;
  best.iterations = st.max_iter;
  std::ostringstream msg;
  msg << "KKT residual " << best.residuals.max() << " above tolerance "
      << st.kkt_tol << " after " << st.max_iter << " iterations";
  best.diagnostic = msg.str();
  return best;
}

}  // namespace ddsf::qp
