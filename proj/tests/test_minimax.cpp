#include <gtest/gtest.h>

#include <cmath>

#include "nodalflow/minimax.hpp"
#include "support.hpp"

using namespace nodalflow;

TEST(Bumps, SingleCentredBumpHasNoPenalty) {
  const System sys = nftest::reduced_system();
  const auto b = build_bumps(sys, 1, 3.0);
  ASSERT_EQ(b.bumps.size(), 1u);
  EXPECT_EQ(b.centers[0][0], 0.0);
  EXPECT_EQ(penalty_mass(sys, b.combine({1.0})), 0.0);
  EXPECT_NEAR(nftest::max_abs(b.combine({1.0})), 3.0, 1e-12);
}

TEST(Bumps, DisjointSupports) {
  const System sys = nftest::reduced_system();
  const auto b = build_bumps(sys, 2, 1.0);
  EXPECT_DOUBLE_EQ(b.centers[0][0], -2.0);
  EXPECT_DOUBLE_EQ(b.centers[1][0], 2.0);
  for (std::size_t i = 0; i < b.bumps[0].size(); ++i) EXPECT_EQ(b.bumps[0][i] * b.bumps[1][i], 0.0);
}

TEST(Bumps, InsufficientRoom) {
  const System sys = nftest::reduced_system(0.5, 256);  // Lambda_eps radius 6
  EXPECT_NO_THROW(build_bumps(sys, 3, 1.0));
  try {
    (void)build_bumps(sys, 4, 1.0);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("smaller n or a smaller eps"), std::string::npos);
  }
  EXPECT_THROW(build_bumps(sys, 2, 1.0, {2.5, 4.0}), ConfigError);
}

TEST(Bumps, NegativeEnergyRadius) {
  const System sys = nftest::reduced_system();
  const double R = negative_energy_radius(sys, 2, {}, 50, 1);
  EXPECT_EQ(std::exp2(std::round(std::log2(R))), R);
  const auto b = build_bumps(sys, 2, R);
  for (const auto& s : sphere_starts(b, 50, 1)) EXPECT_LT(energy(sys, s.u).total, 0.0);
}

TEST(Starts, AlternatingFirstThenCanonicalDraws) {
  const System sys = nftest::reduced_system();
  const auto b = build_bumps(sys, 3, 2.0);
  const auto s = sphere_starts(b, 16, 5);
  ASSERT_EQ(s.size(), 16u);
  const double a = 1 / std::sqrt(3.0);
  EXPECT_DOUBLE_EQ(s[0].t[0], a);
  EXPECT_DOUBLE_EQ(s[0].t[1], -a);
  for (const auto& st : s) {
    double n2 = 0.0;
    for (double x : st.t) n2 += x * x;
    EXPECT_NEAR(n2, 1.0, 1e-14);
    EXPECT_GT(st.t[0], 0.0);
  }
  const auto again = sphere_starts(b, 16, 5);
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(s[i].t, again[i].t);
}

TEST(Starts, SignStructure) {
  const System sys = nftest::reduced_system();
  auto b = build_bumps(sys, 2, 2.0);
  EXPECT_TRUE(cone_distances(b.combine({1.0, 0.0}), 0.0).dplus == 0.0);
  EXPECT_TRUE(cone_distances(b.combine({M_SQRT1_2, -M_SQRT1_2}), 0.0).sign_changing());
  EXPECT_EQ(sphere_starts(build_bumps(sys, 1, 2.0), 10, 1).size(), 1u);
}

TEST(FindSolutions, OneDimensionalPair) {
  const RunConfig rc = nftest::reduced_1d();
  const System sys(rc.model);
  const auto set = find_solutions(sys, 2, rc.minimax, 1);
  ASSERT_EQ(set.solutions.size(), 2u);
  EXPECT_FALSE(set.partial);
  EXPECT_LT(set.solutions[0].energy, set.solutions[1].energy);
  for (const auto& s : set.solutions) {
    EXPECT_GT(s.energy, 0.0);
    EXPECT_LT(s.residual, s.tol);
    EXPECT_LT(s.penalty_mass, 1.0);
    const double rho = rc.flow.rho_rel * h1_norm(s.u);
    EXPECT_GE(s.norm_plus, rho);
    EXPECT_GE(s.norm_minus, rho);
  }
  EXPECT_FALSE(same_solution(set.solutions[0], set.solutions[1].u, set.solutions[1].energy, 1e-3, 1e-6));
  EXPECT_TRUE(same_solution(set.solutions[0], -set.solutions[0].u, set.solutions[0].energy, 1e-3, 1e-6));
}

TEST(FindSolutions, BudgetExhaustionIsPartial) {
  RunConfig rc = nftest::reduced_1d();
  rc.minimax.starts_per_n = 1;
  rc.minimax.extra_sizes = -1;  // basis size 2 only
  const System sys(rc.model);
  const auto set = find_solutions(sys, 2, rc.minimax, 1);
  EXPECT_TRUE(set.partial);
  EXPECT_EQ(set.attempts, 1);
  EXPECT_EQ(set.solutions.size(), 1u);
  EXPECT_TRUE(find_solutions(sys, 0, rc.minimax, 1).solutions.empty());
}
