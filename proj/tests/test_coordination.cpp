#include "pmon/coordination.hpp"
#include "pmon/curve.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

using namespace pmon;

TEST(Ring, NeighborsAndEdges) {
  RingTopology r(5);
  EXPECT_EQ(r.neighbors(0), (std::array<int, 2>{4, 1}));
  EXPECT_TRUE(r.is_edge(4, 0));
  EXPECT_FALSE(r.is_edge(0, 2));
  EXPECT_EQ(r.edges().size(), 5u);

  RingTopology custom(std::vector<int>{0, 2, 4, 1, 3});
  EXPECT_EQ(custom.neighbors(2), (std::array<int, 2>{0, 4}));
  EXPECT_EQ(custom.position_of(1), 3);
  EXPECT_THROW(RingTopology(std::vector<int>{0, 0, 1}), std::invalid_argument);
}

TEST(Ring, EveryRobotHasTwoNeighbors) {
  for (int n = 3; n <= 12; ++n) {
    RingTopology r(n);
    std::vector<int> degree(n, 0);
    for (const auto& e : r.edges()) {
      ++degree[e[0]];
      ++degree[e[1]];
    }
    for (int d : degree) EXPECT_EQ(d, 2);
  }
}

TEST(KuramotoRate, Examples) {
  EXPECT_NEAR(kuramoto_rate(0.0, {kPi / 2, -kPi / 2}, 0.03, 30.0), 0.03, 1e-12);
  for (double K : {0.1, 5.0, 1000.0}) EXPECT_NEAR(kuramoto_rate(0.0, {kPi, kPi}, 0.2, K), 0.2, 1e-9);
  EXPECT_NEAR(kuramoto_rate(0.0, {4 * kPi / 5, -4 * kPi / 5}, 0.0, 1.0), 0.0, 1e-12);
}

TEST(KuramotoRate, RotationalInvariance) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  for (int k = 0; k < 100; ++k) {
    const double a = u(rng), b = u(rng), c = u(rng), s = u(rng);
    EXPECT_NEAR(kuramoto_rate(a, {b, c}, 0.1, 7.0), kuramoto_rate(a + s, {b + s, c + s}, 0.1, 7.0),
                1e-11);
  }
}

TEST(Step, Examples) {
  EXPECT_DOUBLE_EQ(step(1.0, 0.03, 0.01), 1.0003);
  EXPECT_EQ(step(2.5, 0.0, 0.01), 2.5);
  double th = 0.4;
  for (int k = 0; k < 100; ++k) th = step(th, 0.37, 0.01);
  EXPECT_NEAR(th, 0.4 + 100 * 0.37 * 0.01, 1e-12);
}

TEST(Equilibrium, Phases) {
  const auto four = equilibrium_phases(4, 2, 0.0);
  ASSERT_EQ(four.size(), 4u);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(four[i], i * kPi, 1e-12);
  const auto seven = equilibrium_phases(7, 3, 0.0);
  for (int i = 0; i < 7; ++i) EXPECT_NEAR(seven[i], 6.0 * kPi * i / 7.0, 1e-12);
}

TEST(Equilibrium, IsFixedPoint) {
  for (int N = 3; N <= 12; ++N)
    for (int p = 0; p < N; ++p) {
      const auto th = equilibrium_phases(N, p, 0.7);
      RingTopology r(N);
      for (int i = 0; i < N; ++i) {
        const auto nb = r.neighbors(i);
        EXPECT_NEAR(kuramoto_rate(th[i], {th[nb[0]], th[nb[1]]}, 0.0, 1.0), 0.0, 1e-12);
      }
      EXPECT_LT(order_residual(th, r), 1e-12);
    }
}

TEST(Equilibrium, ArbitraryRingOrder) {
  RingTopology r(std::vector<int>{0, 3, 1, 4, 2});
  const auto th = equilibrium_phases(r, 2, 0.0);
  EXPECT_LT(order_residual(th, r), 1e-12);
  EXPECT_NEAR(wrap_angle(th[3] - th[0]), wrap_angle(4 * kPi / 5), 1e-12);
}

TEST(StableSet, Examples) {
  EXPECT_EQ(stable_p_set(7), (std::vector<int>{2, 3, 4, 5}));
  EXPECT_EQ(stable_p_set(4), (std::vector<int>{2}));
  std::vector<int> fifty(25);
  std::iota(fifty.begin(), fifty.end(), 13);
  EXPECT_EQ(stable_p_set(50), fifty);
  EXPECT_EQ(stable_p_set(2), (std::vector<int>{1}));
  EXPECT_TRUE(stable_p_set(1).empty());
}

TEST(StableSet, CosineNegative) {
  for (int N = 3; N <= 40; ++N)
    for (int p : stable_p_set(N)) EXPECT_LT(std::cos(kTwoPi * p / N), 0.0);
}

TEST(Clusters, Count) {
  EXPECT_EQ(cluster_count(50, 27), 1);
  EXPECT_EQ(cluster_count(50, 26), 2);
  EXPECT_EQ(cluster_count(6, 3), 3);
}

TEST(Clusters, FromPhases) {
  const auto all = analyze_clusters({0.0, kTwoPi, 2 * kTwoPi}, 1e-3);
  EXPECT_EQ(all.classes, 1);
  EXPECT_EQ(all.cluster_size, 3);
  EXPECT_EQ(clusters_from_phases(equilibrium_phases(6, 3, 0.0), 1e-3), 3);
  EXPECT_EQ(analyze_clusters(equilibrium_phases(6, 3, 0.0), 1e-3).classes, 2);
  EXPECT_EQ(analyze_clusters(equilibrium_phases(7, 2, 0.5), 1e-3).classes, 7);
  EXPECT_EQ(clusters_from_phases(equilibrium_phases(7, 2, 0.5), 1e-3), 1);
}

TEST(Clusters, MatchesGcdAtEquilibrium) {
  for (int N = 3; N <= 30; ++N)
    for (int p = 1; p < N; ++p)
      EXPECT_EQ(clusters_from_phases(equilibrium_phases(N, p, 0.2)), cluster_count(N, p));
}

TEST(Clusters, AmbiguousGapFlagged) {
  const auto a = analyze_clusters({0.0, 0.01, 3.0}, 0.01);
  EXPECT_TRUE(a.ambiguous);
  EXPECT_THROW(analyze_clusters({0.0}, 0.0), std::invalid_argument);
}

TEST(Perturbation, Examples) {
  const auto eq = EquilibriumSpec::make(5, 2);
  RingTopology r(5);
  EXPECT_TRUE(perturbation_safe(eq, 0, 0.2, r));
  EXPECT_FALSE(perturbation_safe(eq, 0, 1.5, r));
  for (int N = 3; N <= 12; ++N)
    for (int p : stable_p_set(N))
      for (int i = 0; i < N; ++i)
        EXPECT_TRUE(perturbation_safe(EquilibriumSpec::make(N, p), i, 0.0, RingTopology(N)));
}

TEST(OrderResidual, Examples) {
  RingTopology r(7);
  auto th = equilibrium_phases(7, 3, 0.0);
  EXPECT_LT(order_residual(th, r), 1e-12);
  th[2] += 0.1;
  EXPECT_GT(order_residual(th, r), 0.01);
}

TEST(OrderResidual, DecreasesAlongTrajectory) {
  RingTopology r(7);
  auto th = equilibrium_phases(7, 3, 0.0);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (auto& x : th) x += u(rng);
  SwarmParams sp{7, 0.0, 1.0, 0.01, 1};
  double prev = order_residual(th, r);
  int rises = 0;
  for (int k = 0; k < 60; ++k) {
    th = simulate_ring(th, r, sp, 50);
    const double now = order_residual(th, r);
    if (now > prev * (1 + 1e-9)) ++rises;
    prev = now;
  }
  EXPECT_EQ(rises, 0);
  EXPECT_LT(prev, 1e-6);
}

TEST(SwarmParams, StabilityGuard) {
  SwarmParams ok{50, 0.01, 1000.0, 0.01, 20};
  EXPECT_NO_THROW(ok.check());
  SwarmParams bad{50, 0.01, 1000.0, 0.01, 1};
  EXPECT_THROW(bad.check(), std::invalid_argument);
  SwarmParams zero_dt{5, 0.0, 1.0, 0.0, 1};
  EXPECT_THROW(zero_dt.check(), std::invalid_argument);
}

TEST(Simulate, SingleRobotAdvancesAtOmega) {
  RingTopology r(1);
  SwarmParams sp{1, 0.2, 5.0, 0.01, 1};
  const auto th = simulate_ring({0.3}, r, sp, 1000);
  EXPECT_NEAR(th[0], 0.3 + 0.2 * 10.0, 1e-9);
}

TEST(Simulate, EquilibriumRotatesRigidly) {
  RingTopology r(9);
  SwarmParams sp{9, 0.05, 3.0, 0.01, 1};
  const auto th0 = equilibrium_phases(9, 4, 0.1);
  const auto th = simulate_ring(th0, r, sp, 2000);
  for (int i = 0; i < 9; ++i) EXPECT_NEAR(th[i] - th0[i], 0.05 * 20.0, 1e-9);
}

// Sweep over N and p from noisy equilibria; the small cases of the lemma.
TEST(Simulate, ClusterSweepSmall) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (int N = 3; N <= 8; ++N)
    for (int p : stable_p_set(N)) {
      RingTopology r(N);
      auto th = equilibrium_phases(N, p, 0.0);
      for (auto& x : th) x += u(rng);
      SwarmParams sp{N, 0.0, 1.0, 0.05, 1};
      th = simulate_ring(th, r, sp, 20000);
      EXPECT_LT(order_residual(th, r), 1e-6) << N << " " << p;
      EXPECT_EQ(clusters_from_phases(th), cluster_count(N, p)) << N << " " << p;
    }
}
