#include "oracles.hpp"
#include "pmon/qp_solver.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace pmon;

namespace {

struct Instance {
  Eigen::MatrixXd P, A;
  Eigen::VectorXd q, l, u;
};

// Random strictly convex QP whose constraints contain a known interior point.
Instance random_instance(std::mt19937_64& rng, int n, int m) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> w(0.05, 1.0);
  Instance k;
  Eigen::MatrixXd M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = g(rng);
  k.P = M * M.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
  k.q.resize(n);
  for (int i = 0; i < n; ++i) k.q(i) = 3.0 * g(rng);
  k.A.resize(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) k.A(i, j) = g(rng);
  Eigen::VectorXd x0(n);
  for (int i = 0; i < n; ++i) x0(i) = 0.3 * g(rng);
  const Eigen::VectorXd c = k.A * x0;
  k.l = c.array() - Eigen::ArrayXd::NullaryExpr(m, [&] { return w(rng); });
  k.u = c.array() + Eigen::ArrayXd::NullaryExpr(m, [&] { return w(rng); });
  return k;
}

double objective(const Instance& k, const Eigen::VectorXd& x) {
  return 0.5 * x.dot(k.P * x) + k.q.dot(x);
}

double violation(const Instance& k, const Eigen::VectorXd& x) {
  const Eigen::VectorXd c = k.A * x;
  return std::max({0.0, (k.l - c).maxCoeff(), (c - k.u).maxCoeff()});
}

}  // namespace

TEST(QpSolver, UnconstrainedMatchesNormalEquations) {
  std::mt19937_64 rng(1);
  auto k = random_instance(rng, 4, 3);
  k.l.setConstant(-1e9);
  k.u.setConstant(1e9);
  AdmmSolver s(k.P, k.A);
  const auto r = s.solve(k.q, k.l, k.u);
  const Eigen::VectorXd ref = k.P.ldlt().solve(-k.q);
  EXPECT_EQ(r.status, QpStatus::solved);
  EXPECT_LT((r.x - ref).norm(), 1e-6);
}

TEST(QpSolver, MatchesEnumeration) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 150; ++trial) {
    const int n = 1 + trial % 5;
    const int m = n + 1 + trial % 4;
    const auto k = random_instance(rng, n, m);
    const auto ref = oracle::qp_enumerate(k.P, k.q, k.A, k.l, k.u);
    ASSERT_TRUE(ref.found) << trial;
    AdmmSolver s(k.P, k.A);
    const auto r = s.solve(k.q, k.l, k.u);
    EXPECT_EQ(r.status, QpStatus::solved) << trial;
    EXPECT_NEAR(objective(k, r.x), ref.objective, 1e-6 * (1 + std::abs(ref.objective))) << trial;
    EXPECT_LT(violation(k, r.x), 1e-8) << trial;
    // Stationarity with the documented multiplier sign.
    EXPECT_LT((k.P * r.x + k.q + k.A.transpose() * r.y).norm(), 1e-5) << trial;
  }
}

TEST(QpSolver, DualActiveSetMatchesEnumeration) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 150; ++trial) {
    const int n = 1 + trial % 6;
    const int m = 2 * n;
    const auto k = random_instance(rng, n, m);
    const auto ref = oracle::qp_enumerate(k.P, k.q, k.A, k.l, k.u);
    ASSERT_TRUE(ref.found);
    const auto r = dual_active_set(k.P, k.q, k.A, k.l, k.u);
    ASSERT_TRUE(r.has_value()) << trial;
    EXPECT_NEAR(objective(k, r->x), ref.objective, 1e-8 * (1 + std::abs(ref.objective))) << trial;
    EXPECT_LT(violation(k, r->x), 1e-9) << trial;
    EXPECT_LT((k.P * r->x + k.q + k.A.transpose() * r->y).norm(), 1e-8) << trial;
  }
}

TEST(QpSolver, DualActiveSetDetectsInfeasible) {
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(1, 1);
  Eigen::VectorXd q = Eigen::VectorXd::Zero(1);
  Eigen::MatrixXd A(2, 1);
  A << 1, 1;
  Eigen::VectorXd l(2), u(2);
  l << 1, -3;
  u << 2, -2;
  EXPECT_FALSE(dual_active_set(P, q, A, l, u).has_value());
}

TEST(QpSolver, WarmStartReusesFactorization) {
  std::mt19937_64 rng(4);
  const auto k = random_instance(rng, 5, 10);
  AdmmSolver s(k.P, k.A);
  const auto first = s.solve(k.q, k.l, k.u);
  const auto second = s.solve(k.q, k.l, k.u);
  EXPECT_LE(second.iterations, first.iterations);
  EXPECT_LT((first.x - second.x).norm(), 1e-8);
}

TEST(QpSolver, Deterministic) {
  std::mt19937_64 rng(5);
  const auto k = random_instance(rng, 4, 7);
  AdmmSolver a(k.P, k.A), b(k.P, k.A);
  const auto ra = a.solve(k.q, k.l, k.u);
  const auto rb = b.solve(k.q, k.l, k.u);
  EXPECT_EQ(ra.x, rb.x);
  EXPECT_EQ(ra.iterations, rb.iterations);
}
