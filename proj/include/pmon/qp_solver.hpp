#pragma once

#include <Eigen/Dense>

#include <optional>

namespace pmon {

/// min 1/2 x'Px + q'x  s.t.  l <= Ax <= u.  Infinite bounds are allowed.
struct QpProblem {
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  Eigen::MatrixXd A;
  Eigen::VectorXd l;
  Eigen::VectorXd u;
};

struct QpSettings {
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;
  double eps_abs = 1e-6;
  double eps_rel = 1e-6;
  int max_iter = 500;
  int adapt_every = 25;
  bool polish = true;
};

enum class QpStatus { solved, max_iter, primal_infeasible };

struct QpResult {
  Eigen::VectorXd x;
  Eigen::VectorXd y;  // multipliers, P x + q + A'y = 0 at the optimum
  QpStatus status = QpStatus::max_iter;
  int iterations = 0;
  bool polished = false;
  double prim_res = 0.0;
  double dual_res = 0.0;
};

/// Operator-splitting (ADMM) solver for small dense QPs with a fixed P and
/// A; q, l, u may change between solves. The iterate is finished by an
/// active-set polish that solves the equality-constrained KKT system of the
/// identified active set, which makes the returned point feasible to
/// rounding error when the active set is right.
class AdmmSolver {
 public:
  AdmmSolver() = default;
  AdmmSolver(const Eigen::MatrixXd& P, const Eigen::MatrixXd& A, QpSettings settings = {});

  /// Warm-starts from the previous solution when sizes match.
  QpResult solve(const Eigen::VectorXd& q, const Eigen::VectorXd& l,
                 const Eigen::VectorXd& u);

  void reset_warm_start();
  int num_vars() const { return static_cast<int>(P_.rows()); }
  int num_constraints() const { return static_cast<int>(A_.rows()); }

 private:
  void factor();
  bool polish(const Eigen::VectorXd& q, const Eigen::VectorXd& l, const Eigen::VectorXd& u,
              const Eigen::VectorXd& z, QpResult& res) const;
  void finish(QpResult& res, const Eigen::VectorXd& q, const Eigen::VectorXd& l,
              const Eigen::VectorXd& u) const;

  QpSettings settings_;
  Eigen::MatrixXd P_;
  Eigen::MatrixXd A_;         // unscaled
  Eigen::MatrixXd As_;        // row-equilibrated
  Eigen::VectorXd row_scale_;
  double rho_ = 0.1;
  Eigen::LDLT<Eigen::MatrixXd> kkt_;
  Eigen::VectorXd x_, z_, y_;  // scaled-space warm start
  bool warm_ = false;
};

struct ActiveSetSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd y;  // same sign convention as the ADMM multipliers
  int steps = 0;
};

/// Goldfarb-Idnani dual active-set method for l <= A x <= u with P positive
/// definite. Exact up to rounding; nullopt when infeasible or P is singular.
std::optional<ActiveSetSolution> dual_active_set(const Eigen::MatrixXd& P,
                                                 const Eigen::VectorXd& q,
                                                 const Eigen::MatrixXd& A,
                                                 const Eigen::VectorXd& l,
                                                 const Eigen::VectorXd& u, int max_steps = 0);

/// Convenience one-shot solve.
QpResult solve_qp(const QpProblem& problem, QpSettings settings = {});

}  // namespace pmon
