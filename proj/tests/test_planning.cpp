#include "pmon/curve.hpp"
#include "pmon/planning.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace pmon;

TEST(CoverageBound, Examples) {
  EXPECT_NEAR(min_radius_coverage(20, 20, 3, 4), 10.0, 1e-12);
  EXPECT_NEAR(min_radius_coverage(7, 7, 5, 5), 7 * std::sin(kPi / 10), 1e-12);
  for (int a = 1; a < 15; a += 2) EXPECT_GT(min_radius_coverage(0.0, 20, a, 4), min_radius_coverage(0.0, 20, a + 2, 4));
}

TEST(CoverageBound, MonotoneDecreasing) {
  for (int a = 1; a < 20; ++a)
    for (int b = 1; b < 20; ++b) {
      EXPECT_GE(min_radius_coverage(20, 30, a, b), min_radius_coverage(20, 30, a + 1, b));
      EXPECT_GE(min_radius_coverage(20, 30, a, b), min_radius_coverage(20, 30, a, b + 1));
    }
}

TEST(DetectionBound, Examples) {
  EXPECT_NEAR(min_radius_detection(20, 20, 7, 1), 12.272, 1e-3);
  // sin(pi / N) * sqrt(A^2 + B^2); the quoted 8.878 is rounded.
  EXPECT_NEAR(min_radius_detection(100, 100, 50, 1), std::sin(kPi / 50) * std::sqrt(20000.0), 1e-12);
  EXPECT_NEAR(min_radius_detection(100, 100, 50, 1), 8.878, 5e-3);
  EXPECT_LT(min_radius_detection(20, 20, 100000, 1), 1e-3);
  for (int N = 2; N < 60; ++N)
    EXPECT_GT(min_radius_detection(20, 20, N, 1), min_radius_detection(20, 20, N + 1, 1));
}

TEST(InflatedRadius, Examples) {
  EXPECT_NEAR(inflated_radius(12.272, 1.05), 12.885, 1e-3);
  EXPECT_EQ(inflated_radius(3.5, 1.0), 3.5);
  EXPECT_NEAR(inflated_radius(min_radius_detection(20, 20, 11, 1), 1.10),
              1.10 * std::sin(kPi / 11) * std::sqrt(800.0), 1e-12);
  EXPECT_NEAR(inflated_radius(min_radius_detection(20, 20, 11, 1), 1.10), 8.768, 5e-3);
}

TEST(MinRobots, Examples) {
  EXPECT_EQ(min_robots(20, 20, 15, 1).value(), 6);
  EXPECT_EQ(min_robots(20, 20, std::sqrt(800.0) * std::sin(kPi / 7), 1).value(), 8);
  EXPECT_FALSE(min_robots(20, 20, 30, 1).has_value());
  // kappa = 2 doubles the bound: pi*2/asin(.) = 2 * 5.62 = 11.24 -> 12.
  EXPECT_EQ(min_robots(20, 20, 15, 2).value(), 12);
}

TEST(MinRobots, RoundTrip) {
  for (int N = 3; N <= 60; ++N)
    for (int kappa : {1, 2}) {
      const double r = min_radius_detection(50, 70, N * kappa, kappa) + 1e-6;
      EXPECT_LE(min_robots(50, 70, r, kappa).value(), N * kappa);
    }
}

TEST(DetectionTime, Examples) {
  EXPECT_NEAR(max_detection_time(0.03, 7, 1), 29.92, 1e-2);
  EXPECT_NEAR(max_detection_time(0.06, 50, 1), 2.094, 1e-3);
  EXPECT_NEAR(max_detection_time(0.12, 50, 1), 0.5 * max_detection_time(0.06, 50, 1), 1e-12);
  EXPECT_THROW(max_detection_time(0.0, 5, 1), std::invalid_argument);
}

TEST(Encumbrance2d, Examples) {
  EXPECT_NEAR(max_encumbrance_2d(20, 20, 3, 4, 7), 1.736, 1e-3);
  EXPECT_NEAR(max_encumbrance_2d(100, 100, 23, 27, 50), 0.177, 1e-3);
  EXPECT_LT(max_encumbrance_2d(20, 20, 3, 4, 1000000), 1e-4);
  for (int N = 2; N < 60; ++N)
    EXPECT_GT(max_encumbrance_2d(20, 20, 3, 4, N), max_encumbrance_2d(20, 20, 3, 4, N + 1));
}

TEST(Encumbrance3d, AtLeastPlanar) {
  const int S = 1 << 14;
  struct Case { double A, B; int a, b, c, N; double C, phi; };
  for (const Case& k : {Case{20, 20, 3, 4, 5, 7, 2.0, kPi / 2}, Case{20, 20, 5, 6, 7, 11, 3.0, kPi / 2},
                        Case{20, 20, 3, 2, 7, 5, 2.0, kPi / 2}, Case{100, 100, 23, 27, 5, 50, 5.0, kPi / 4}}) {
    const auto flat = LissajousParams::make(k.A, k.B, 0.0, k.a, k.b);
    const auto knot = LissajousParams::make(k.A, k.B, k.C, k.a, k.b, k.c, k.phi);
    ASSERT_TRUE(is_knot(knot));
    const double e2 = max_encumbrance_3d(flat, k.N, S);
    EXPECT_GE(max_encumbrance_3d(knot, k.N, S), e2);
    // Planar numeric separation is never below the closed-form sufficient bound.
    EXPECT_GE(e2, max_encumbrance_2d(k.A, k.B, k.a, k.b, k.N) - 1e-9);
    EXPECT_NEAR(e2, min_pairwise_separation(flat, k.N, S) / 2, 1e-12);
  }
}

TEST(Encumbrance3d, GridConverges) {
  const auto p = LissajousParams::make(100, 100, 5, 23, 27, 5, kPi / 4);
  const double a = max_encumbrance_3d(p, 50, 1 << 15);
  const double b = max_encumbrance_3d(p, 50, 1 << 16);
  EXPECT_LT(std::abs(a - b) / b, 0.01);
}

TEST(Search, BestAmongExhaustiveGrid) {
  SearchSpace s;
  s.c_candidates = {5, 7};
  s.C_min = 1.0;
  s.C_max = 2.0;
  s.C_points = 3;
  s.phi_grid = {0.0, kPi / 4, kPi / 2};
  s.samples = 1 << 12;
  const auto r = search_3d_params(20, 20, 3, 4, 7, s);
  int knots = 0;
  for (int c : s.c_candidates)
    for (double C : {1.0, 1.5, 2.0})
      for (double phi : s.phi_grid) {
        const auto p = LissajousParams::make_unchecked(20, 20, C, 3, 4, c, phi);
        if (!is_knot(p)) continue;
        ++knots;
        EXPECT_GE(r.encumbrance, max_encumbrance_3d(p, 7, s.samples));
      }
  EXPECT_EQ(r.evaluated, knots);
  EXPECT_TRUE(is_knot(LissajousParams::make_unchecked(20, 20, r.C, 3, 4, r.c, r.phi)));
}

TEST(Search, SingleCandidate) {
  SearchSpace s;
  s.c_candidates = {5};
  s.C_min = s.C_max = 2.0;
  s.C_points = 1;
  s.phi_grid = {kPi / 2};
  s.samples = 1 << 12;
  const auto r = search_3d_params(20, 20, 3, 4, 7, s);
  EXPECT_EQ(r.c, 5);
  EXPECT_EQ(r.C, 2.0);
  EXPECT_EQ(r.phi, kPi / 2);
}

TEST(Search, SharedFactorExcluded) {
  SearchSpace s;
  s.c_candidates = {2, 6};
  s.samples = 1 << 10;
  EXPECT_THROW(search_3d_params(20, 20, 3, 4, 7, s), SearchFailure);
  s.c_candidates = {2, 5};
  s.C_points = 2;
  EXPECT_EQ(search_3d_params(20, 20, 3, 4, 7, s).c, 5);
}

TEST(Guarantees, ExperimentOnePasses) {
  const auto p = LissajousParams::make(20, 20, 2, 3, 4, 5, kPi / 2);
  MissionSpec m{20, 20, 0.0, 1.05, 1, 7};
  m.r_s = inflated_radius(min_radius_detection(20, 20, 7, 1), 1.05);
  const auto r = check_guarantees(m, p, 0.03);
  EXPECT_TRUE(r.ok()) << (r.violated.empty() ? "" : r.violated.front());
  EXPECT_TRUE(r.coverage_ok && r.detection_ok && r.curve_ok && r.spacing_ok && r.omega_ok);
  EXPECT_NEAR(r.coverage_bound, 10.0, 1e-9);
  EXPECT_NEAR(r.detection_bound, 12.272, 1e-3);
  EXPECT_NEAR(r.collision_bound, 1.736, 1e-3);
  EXPECT_NEAR(r.T_max, 29.92, 1e-2);
  EXPECT_EQ(r.stable_p, (std::vector<int>{2, 3, 4, 5}));
}

TEST(Guarantees, SmallRadiusFailsCoverage) {
  const auto p = LissajousParams::make(20, 20, 2, 3, 4, 5, kPi / 2);
  MissionSpec m{20, 20, 5.0, 1.05, 1, 7};
  const auto r = check_guarantees(m, p, 0.03);
  EXPECT_FALSE(r.coverage_ok);
  EXPECT_FALSE(r.ok());
}

TEST(Guarantees, FewerRobotsFailDetection) {
  const auto p = LissajousParams::make(20, 20, 0, 1, 2);
  MissionSpec m{20, 20, 0.0, 1.05, 1, 3};
  m.r_s = inflated_radius(min_radius_detection(20, 20, 7, 1), 1.05);
  const auto r = check_guarantees(m, p, 0.03);
  EXPECT_FALSE(r.detection_ok);
  // The report is consistent: violated is empty iff every flag holds.
  EXPECT_EQ(r.ok(), r.curve_ok && r.spacing_ok && r.coverage_ok && r.detection_ok && r.omega_ok);
}
