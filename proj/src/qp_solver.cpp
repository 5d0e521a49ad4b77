#include "pmon/qp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace pmon {

namespace {

constexpr double kInf = 1e20;

double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

AdmmSolver::AdmmSolver(const Eigen::MatrixXd& P, const Eigen::MatrixXd& A, QpSettings settings)
    : settings_(settings), P_(P), A_(A), rho_(settings.rho) {
  if (P.rows() != P.cols() || A.cols() != P.rows())
    throw std::invalid_argument("AdmmSolver: dimension mismatch");
  row_scale_.resize(A.rows());
  As_ = A;
  for (int i = 0; i < A.rows(); ++i) {
    const double m = A.row(i).cwiseAbs().maxCoeff();
    row_scale_(i) = m > 0.0 ? 1.0 / m : 1.0;
    As_.row(i) *= row_scale_(i);
  }
  factor();
}

void AdmmSolver::factor() {
  const int n = num_vars();
  Eigen::MatrixXd K = P_ + settings_.sigma * Eigen::MatrixXd::Identity(n, n) +
                      rho_ * As_.transpose() * As_;
  kkt_.compute(K);
}

void AdmmSolver::reset_warm_start() { warm_ = false; }

QpResult AdmmSolver::solve(const Eigen::VectorXd& q, const Eigen::VectorXd& l,
                           const Eigen::VectorXd& u) {
  const int n = num_vars();
  const int m = num_constraints();
  if (q.size() != n || l.size() != m || u.size() != m)
    throw std::invalid_argument("AdmmSolver::solve: dimension mismatch");
  if (!q.allFinite()) throw std::invalid_argument("AdmmSolver::solve: non-finite q");

  Eigen::VectorXd ls = l.cwiseProduct(row_scale_).cwiseMax(-kInf);
  Eigen::VectorXd us = u.cwiseProduct(row_scale_).cwiseMin(kInf);
  if (!warm_ || x_.size() != n) {
    x_ = Eigen::VectorXd::Zero(n);
    z_ = Eigen::VectorXd::Zero(m);
    y_ = Eigen::VectorXd::Zero(m);
  }

  QpResult res;
  Eigen::VectorXd xt(n), zt(m), zhat(m), Ax(m), Px(n), ATy(n);
  for (int it = 1; it <= settings_.max_iter; ++it) {
    Eigen::VectorXd rhs = settings_.sigma * x_ - q + As_.transpose() * (rho_ * z_ - y_);
    xt = kkt_.solve(rhs);
    zt = As_ * xt;
    x_ = settings_.alpha * xt + (1.0 - settings_.alpha) * x_;
    zhat = settings_.alpha * zt + (1.0 - settings_.alpha) * z_;
    Eigen::VectorXd znew = (zhat + y_ / rho_).cwiseMax(ls).cwiseMin(us);
    y_ += rho_ * (zhat - znew);
    z_ = znew;
    res.iterations = it;

    const bool check = it % 5 == 0 || it == settings_.max_iter;
    if (!check) continue;
    Ax = As_ * x_;
    Px = P_ * x_;
    ATy = As_.transpose() * y_;
    const Eigen::VectorXd unscale = row_scale_.cwiseInverse();
    res.prim_res = inf_norm((Ax - z_).cwiseProduct(unscale));
    res.dual_res = inf_norm(Px + q + ATy);
    const double eps_p = settings_.eps_abs + settings_.eps_rel *
                                                 std::max(inf_norm(Ax.cwiseProduct(unscale)),
                                                          inf_norm(z_.cwiseProduct(unscale)));
    const double eps_d = settings_.eps_abs +
                         settings_.eps_rel * std::max({inf_norm(Px), inf_norm(ATy), inf_norm(q)});
    if (res.prim_res <= eps_p && res.dual_res <= eps_d) {
      res.status = QpStatus::solved;
      break;
    }
    if (settings_.adapt_every > 0 && it % settings_.adapt_every == 0) {
      const double pn = res.prim_res / std::max(eps_p, 1e-12);
      const double dn = res.dual_res / std::max(eps_d, 1e-12);
      const double ratio = std::sqrt(pn / std::max(dn, 1e-12));
      if (ratio > 5.0 || ratio < 0.2) {
        const double new_rho = std::clamp(rho_ * ratio, 1e-6, 1e6);
        y_ *= 1.0;  // y is independent of rho in this scaling
        rho_ = new_rho;
        factor();
      }
    }
  }
  warm_ = true;

  res.x = x_;
  res.y = y_.cwiseProduct(row_scale_);
  const Eigen::VectorXd z_unscaled = z_.cwiseProduct(row_scale_.cwiseInverse());
  if (settings_.polish) {
    QpResult polished = res;
    if (polish(q, l, u, z_unscaled, polished)) {
      res = polished;
      res.polished = true;
      res.status = QpStatus::solved;
    }
  }
  return res;
}

bool AdmmSolver::polish(const Eigen::VectorXd& q, const Eigen::VectorXd& l,
                        const Eigen::VectorXd& u, const Eigen::VectorXd& z,
                        QpResult& res) const {
  const int n = num_vars();
  const int m = num_constraints();
  // -1 lower active, +1 upper active, 0 inactive
  std::vector<int> act(m, 0);
  for (int i = 0; i < m; ++i) {
    if (l(i) > -kInf && z(i) - l(i) < -res.y(i)) act[i] = -1;
    else if (u(i) < kInf && u(i) - z(i) < res.y(i)) act[i] = 1;
  }

  Eigen::VectorXd x(n), nu;
  std::vector<int> idx;
  for (int round = 0; round < 40; ++round) {
    idx.clear();
    for (int i = 0; i < m; ++i)
      if (act[i] != 0) idx.push_back(i);
    const int k = static_cast<int>(idx.size());
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + k, n + k);
    Eigen::VectorXd rhs(n + k);
    K.topLeftCorner(n, n) = P_;
    rhs.head(n) = -q;
    for (int r = 0; r < k; ++r) {
      const int i = idx[r];
      K.block(n + r, 0, 1, n) = A_.row(i);
      K.block(0, n + r, n, 1) = A_.row(i).transpose();
      rhs(n + r) = act[i] < 0 ? l(i) : u(i);
    }
    constexpr double delta = 1e-10;
    Eigen::MatrixXd Kreg = K;
    Kreg.topLeftCorner(n, n).diagonal().array() += delta;
    Kreg.bottomRightCorner(k, k).diagonal().array() -= delta;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(Kreg);
    Eigen::VectorXd sol = lu.solve(rhs);
    for (int ref = 0; ref < 5; ++ref) sol += lu.solve(rhs - K * sol);
    if (!sol.allFinite()) break;
    x = sol.head(n);
    nu = sol.tail(k);

    const Eigen::VectorXd Ax = A_ * x;
    bool changed = false;
    for (int r = 0; r < k; ++r) {
      const int i = idx[r];
      const double tol = 1e-9 * (1.0 + std::abs(nu(r)));
      if ((act[i] > 0 && nu(r) < -tol) || (act[i] < 0 && nu(r) > tol)) {
        act[i] = 0;
        changed = true;
      }
    }
    for (int i = 0; i < m; ++i) {
      if (act[i] != 0) continue;
      const double tol_u = 1e-10 * (1.0 + std::abs(u(i)));
      const double tol_l = 1e-10 * (1.0 + std::abs(l(i)));
      if (u(i) < kInf && Ax(i) > u(i) + tol_u) {
        act[i] = 1;
        changed = true;
      } else if (l(i) > -kInf && Ax(i) < l(i) - tol_l) {
        act[i] = -1;
        changed = true;
      }
    }
    if (!changed) {
      res.x = x;
      res.y = Eigen::VectorXd::Zero(m);
      for (int r = 0; r < k; ++r) res.y(idx[r]) = nu(r);
      finish(res, q, l, u);
      return true;
    }
  }
  // The guessed active set cycled; fall back to the exact dual method.
  auto exact = dual_active_set(P_, q, A_, l, u);
  if (!exact) return false;
  res.x = exact->x;
  res.y = exact->y;
  finish(res, q, l, u);
  return true;
}

void AdmmSolver::finish(QpResult& res, const Eigen::VectorXd& q, const Eigen::VectorXd& l,
                        const Eigen::VectorXd& u) const {
  const Eigen::VectorXd Ax = A_ * res.x;
  res.prim_res = 0.0;
  for (int i = 0; i < num_constraints(); ++i) {
    res.prim_res = std::max(res.prim_res, std::max(0.0, Ax(i) - u(i)));
    res.prim_res = std::max(res.prim_res, std::max(0.0, l(i) - Ax(i)));
  }
  res.dual_res = inf_norm(P_ * res.x + q + A_.transpose() * res.y);
}

std::optional<ActiveSetSolution> dual_active_set(const Eigen::MatrixXd& P,
                                                 const Eigen::VectorXd& q,
                                                 const Eigen::MatrixXd& A,
                                                 const Eigen::VectorXd& l,
                                                 const Eigen::VectorXd& u, int max_steps) {
  const int n = static_cast<int>(P.rows());
  const int m = static_cast<int>(A.rows());
  Eigen::LLT<Eigen::MatrixXd> llt(P);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const Eigen::MatrixXd Ginv = llt.solve(Eigen::MatrixXd::Identity(n, n));

  // Inequalities c^T x >= b: rows 0..m-1 are lower bounds, m..2m-1 upper.
  auto normal = [&](int j) -> Eigen::VectorXd {
    return j < m ? Eigen::VectorXd(A.row(j).transpose()) : Eigen::VectorXd(-A.row(j - m).transpose());
  };
  auto bound = [&](int j) { return j < m ? l(j) : -u(j - m); };
  auto usable = [&](int j) { return j < m ? l(j) > -kInf : u(j - m) < kInf; };

  ActiveSetSolution out;
  Eigen::VectorXd x = -Ginv * q;
  std::vector<int> act;
  std::vector<double> mult;
  const int cap = max_steps > 0 ? max_steps : 50 * (n + 2 * m + 1);
  const double scale = 1.0 + q.cwiseAbs().maxCoeff();

  while (out.steps < cap) {
    // Most violated inequality.
    int p = -1;
    double worst = 0.0;
    for (int j = 0; j < 2 * m; ++j) {
      if (!usable(j) || std::find(act.begin(), act.end(), j) != act.end()) continue;
      const double b = bound(j);
      const double s = normal(j).dot(x) - b;
      const double tol = 1e-12 * (1.0 + std::abs(b)) * scale;
      if (s < -tol && s < worst) {
        worst = s;
        p = j;
      }
    }
    if (p < 0) break;
    const Eigen::VectorXd np = normal(p);
    double up = 0.0;
    for (;;) {
      if (++out.steps > cap) return std::nullopt;
      const int k = static_cast<int>(act.size());
      Eigen::VectorXd z = Ginv * np;
      const double zfull = np.dot(z);
      Eigen::VectorXd r(k);
      if (k > 0) {
        Eigen::MatrixXd N(n, k);
        for (int a = 0; a < k; ++a) N.col(a) = normal(act[a]);
        const Eigen::MatrixXd GN = Ginv * N;
        const Eigen::MatrixXd M = N.transpose() * GN;
        r = M.ldlt().solve(GN.transpose() * np);
        z -= GN * r;
      }
      double t1 = std::numeric_limits<double>::infinity();
      int drop = -1;
      for (int a = 0; a < k; ++a)
        if (r(a) > 1e-14 && mult[a] / r(a) < t1) {
          t1 = mult[a] / r(a);
          drop = a;
        }
      const double zn = z.dot(np);
      double t2 = std::numeric_limits<double>::infinity();
      // Relative to the unprojected step, so a numerically dependent row is not stepped along.
      if (zn > 1e-10 * zfull)
        t2 = -(np.dot(x) - bound(p)) / zn;
      const double t = std::min(t1, t2);
      if (!std::isfinite(t)) return std::nullopt;  // infeasible
      for (int a = 0; a < k; ++a) mult[a] -= t * r(a);
      up += t;
      if (std::isfinite(t2)) x += t * z;
      if (t2 <= t1) {
        act.push_back(p);
        mult.push_back(up);
        break;
      }
      act.erase(act.begin() + drop);
      mult.erase(mult.begin() + drop);
    }
  }
  if (out.steps >= cap) return std::nullopt;
  out.x = x;
  out.y = Eigen::VectorXd::Zero(m);
  for (size_t a = 0; a < act.size(); ++a) {
    const int j = act[a];
    if (j < m) out.y(j) -= mult[a];
    else out.y(j - m) += mult[a];
  }
  return out;
}

QpResult solve_qp(const QpProblem& p, QpSettings settings) {
  AdmmSolver s(p.P, p.A, settings);
  return s.solve(p.q, p.l, p.u);
}

}  // namespace pmon
