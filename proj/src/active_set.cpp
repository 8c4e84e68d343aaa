#include "active_set.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace ddsf::qp::detail {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kDependentTol = 1e-11;
constexpr double kViolationTol = 1e-10;
constexpr double kDependentSlack = 1e-7;

// Constraints are stored as n_k' x >= c_k (equalities hold with equality).
class DualActiveSet {
 public:
  DualActiveSet(const Eigen::MatrixXd& P, const Eigen::VectorXd& q,
                const Eigen::MatrixXd& A_eq, const Eigen::VectorXd& b_eq,
                const Eigen::MatrixXd& G, const Eigen::VectorXd& h)
      : q_(q), A_eq_(A_eq), b_eq_(b_eq), G_(G), h_(h), n_(P.rows()),
        me_(A_eq.rows()), mi_(G.rows()) {
    llt_.compute(P);
    ok_ = llt_.info() == Eigen::Success;
    if (!ok_) return;
    const Eigen::MatrixXd Linv = llt_.matrixL().solve(Eigen::MatrixXd::Identity(n_, n_));
    J_ = Linv.transpose();
    R_ = Eigen::MatrixXd::Zero(n_, n_);
    u_ = Eigen::VectorXd::Zero(n_);
    x_ = llt_.solve(-q_);
    is_active_.assign(static_cast<size_t>(mi_), 0);
    ignored_.assign(static_cast<size_t>(mi_), 0);
  }

  DualActiveSetResult run() {
    DualActiveSetResult out;
    if (!ok_) return out;

    for (Eigen::Index i = 0; i < me_; ++i) {
      const Eigen::VectorXd np = A_eq_.row(i).transpose();
      Eigen::VectorXd d = J_.transpose() * np;
      const double res = b_eq_(i) - np.dot(x_);
      if (dependent(d)) {
        if (std::abs(res) > 1e-9 * (1.0 + std::abs(b_eq_(i)))) {
          out.status = DualActiveSetStatus::Infeasible;
          return out;
        }
        continue;
      }
      const Eigen::VectorXd z = step_primal(d);
      const Eigen::VectorXd r = step_dual(d);
      const double t = res / z.dot(np);
      x_ += t * z;
      u_.head(qa_) -= t * r;
      u_(qa_) = t;
      active_.push_back(i);
      if (!add(d)) return out;
    }

    const int max_iter = 20 * static_cast<int>(n_ + me_ + mi_) + 100;
    for (int it = 0; it < max_iter; ++it) {
      out.iterations = it;
      Eigen::Index ip = -1;
      double worst = 0.0;
      const Eigen::VectorXd slack = h_ - G_ * x_;
      for (Eigen::Index j = 0; j < mi_; ++j) {
        if (is_active_[static_cast<size_t>(j)] || ignored_[static_cast<size_t>(j)]) continue;
        const double scale = std::max(1.0, std::abs(h_(j)));
        const double v = -slack(j) / scale;
        if (v > kViolationTol && v > worst) {
          worst = v;
          ip = j;
        }
      }
      if (ip < 0) {
        out.status = DualActiveSetStatus::Optimal;
        fill(out);
        return out;
      }
      const DualActiveSetStatus st = enter(ip);
      if (st != DualActiveSetStatus::Optimal) {
        out.status = st;
        return out;
      }
    }
    return out;
  }

 private:
  bool dependent(const Eigen::VectorXd& d) const {
    return d.tail(n_ - qa_).norm() <= kDependentTol * d.norm();
  }

  Eigen::VectorXd step_primal(const Eigen::VectorXd& d) const {
    return J_.rightCols(n_ - qa_) * d.tail(n_ - qa_);
  }

  Eigen::VectorXd step_dual(const Eigen::VectorXd& d) const {
    if (qa_ == 0) return Eigen::VectorXd(0);
    return R_.topLeftCorner(qa_, qa_).triangularView<Eigen::Upper>().solve(d.head(qa_));
  }

  // Brings constraint ip into the active set through partial and full steps.
  // A dependent constraint violated within kDependentSlack is set aside.
  DualActiveSetStatus enter(Eigen::Index ip) {
    const Eigen::VectorXd np = -G_.row(ip).transpose();
    const double c = -h_(ip);
    double u_plus = 0.0;
    for (;;) {
      Eigen::VectorXd d = J_.transpose() * np;
      const bool dep = dependent(d);
      const double s0 = np.dot(x_) - c;
      if (dep && -s0 <= kDependentSlack * std::max(1.0, std::abs(c))) {
        ignored_[static_cast<size_t>(ip)] = 1;
        return DualActiveSetStatus::Optimal;
      }
      const Eigen::VectorXd z = dep ? Eigen::VectorXd::Zero(n_) : step_primal(d);
      const Eigen::VectorXd r = step_dual(d);

      double t1 = kInf;
      Eigen::Index drop = -1;
      for (Eigen::Index k = 0; k < qa_; ++k) {
        if (active_[static_cast<size_t>(k)] < me_ || r(k) <= 0.0) continue;
        const double ratio = u_(k) / r(k);
        if (ratio < t1) {
          t1 = ratio;
          drop = k;
        }
      }
      const double s = np.dot(x_) - c;
      const double t2 = dep ? kInf : -s / z.dot(np);

      if (!std::isfinite(t1) && !std::isfinite(t2)) return DualActiveSetStatus::Infeasible;
      if (!std::isfinite(t2)) {
        u_.head(qa_) -= t1 * r;
        u_plus += t1;
        remove(drop);
        continue;
      }
      const double t = std::min(t1, t2);
      x_ += t * z;
      u_.head(qa_) -= t * r;
      u_plus += t;
      if (t2 <= t1) {
        u_(qa_) = u_plus;
        active_.push_back(me_ + ip);
        is_active_[static_cast<size_t>(ip)] = 1;
        return add(d) ? DualActiveSetStatus::Optimal : DualActiveSetStatus::Failed;
      }
      remove(drop);
    }
  }

  // Rotates d so that J' N stays upper triangular with the new column.
  bool add(Eigen::VectorXd& d) {
    for (Eigen::Index j = n_ - 1; j > qa_; --j) {
      if (d(j) == 0.0) continue;
      const double hyp = std::hypot(d(j - 1), d(j));
      const double cc = d(j - 1) / hyp;
      const double ss = d(j) / hyp;
      d(j - 1) = hyp;
      d(j) = 0.0;
      J_.applyOnTheRight(j - 1, j, Eigen::JacobiRotation<double>(cc, -ss));
    }
    if (std::abs(d(qa_)) <= kDependentTol * d.norm()) return false;
    R_.col(qa_).head(qa_ + 1) = d.head(qa_ + 1);
    ++qa_;
    return true;
  }

  void remove(Eigen::Index l) {
    const Eigen::Index idx = active_[static_cast<size_t>(l)];
    if (idx >= me_) is_active_[static_cast<size_t>(idx - me_)] = 0;
    active_.erase(active_.begin() + l);
    for (Eigen::Index k = l; k + 1 < qa_; ++k) {
      R_.col(k).head(qa_) = R_.col(k + 1).head(qa_);
      u_(k) = u_(k + 1);
    }
    R_.col(qa_ - 1).setZero();
    u_(qa_ - 1) = 0.0;
    for (Eigen::Index j = l; j + 1 < qa_; ++j) {
      const double a = R_(j, j);
      const double b = R_(j + 1, j);
      if (b == 0.0) continue;
      const double hyp = std::hypot(a, b);
      const double cc = a / hyp;
      const double ss = b / hyp;
      const Eigen::Index w = qa_ - 1 - j;
      R_.middleCols(j, w).applyOnTheLeft(j, j + 1, Eigen::JacobiRotation<double>(cc, ss));
      R_(j + 1, j) = 0.0;
      J_.applyOnTheRight(j, j + 1, Eigen::JacobiRotation<double>(cc, -ss));
    }
    --qa_;
  }

  void fill(DualActiveSetResult& out) const {
    out.x = x_;
    out.lambda_eq = Eigen::VectorXd::Zero(me_);
    out.mu_in = Eigen::VectorXd::Zero(mi_);
    for (Eigen::Index k = 0; k < qa_; ++k) {
      const Eigen::Index idx = active_[static_cast<size_t>(k)];
      if (idx < me_) {
        out.lambda_eq(idx) = -u_(k);
      } else {
        out.mu_in(idx - me_) = u_(k);
      }
    }
  }

  const Eigen::VectorXd& q_;
  const Eigen::MatrixXd& A_eq_;
  const Eigen::VectorXd& b_eq_;
  const Eigen::MatrixXd& G_;
  const Eigen::VectorXd& h_;
  Eigen::Index n_;
  Eigen::Index me_;
  Eigen::Index mi_;
  bool ok_{false};
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::MatrixXd J_;
  Eigen::MatrixXd R_;
  Eigen::VectorXd u_;
  Eigen::VectorXd x_;
  Eigen::Index qa_{0};
  std::vector<Eigen::Index> active_;
  std::vector<char> is_active_;
  std::vector<char> ignored_;
};

}  // namespace

DualActiveSetResult dual_active_set(const Eigen::MatrixXd& P, const Eigen::VectorXd& q,
                                    const Eigen::MatrixXd& A_eq, const Eigen::VectorXd& b_eq,
                                    const Eigen::MatrixXd& G, const Eigen::VectorXd& h) {
  return DualActiveSet(P, q, A_eq, b_eq, G, h).run();
}

}  // namespace ddsf::qp::detail
