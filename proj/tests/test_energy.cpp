#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nodalflow/energy.hpp"
#include "support.hpp"

using namespace nodalflow;

TEST(Penalty, FromMass) {
  const auto a = penalty_from_mass(2.0, 2.25);
  EXPECT_EQ(a.q, 1.0);
  EXPECT_EQ(a.kappa, 1.0);
  EXPECT_EQ(a.lambda, 4.5);
  const auto b = penalty_from_mass(0.9, 2.25);
  EXPECT_EQ(b.q, 0.0);
  EXPECT_EQ(b.kappa, 0.0);
  EXPECT_EQ(b.lambda, 0.0);
  const auto c = penalty_from_mass(3.0, 2.125);
  EXPECT_NEAR(c.q, std::pow(2.0, 2.125), 1e-12);
  EXPECT_NEAR(c.kappa, std::pow(2.0, 1.125), 1e-12);
}

TEST(Penalty, VanishesInsideLambda) {
  const System sys = nftest::reduced_system();
  // Lambda_eps = [-12, 12]; support [-5, 5]
  const Field u = Field::from_function(sys.grid(), [](const Point& x) {
    const double z = 1 - x[0] * x[0] / 25.0;
    return z > 0 ? z * z * z * z : 0.0;
  });
  const auto s = penalty(sys, u);
  EXPECT_EQ(s.mass, 0.0);
  EXPECT_EQ(s.q, 0.0);
  EXPECT_EQ(s.kappa, 0.0);
}

TEST(Energy, ZeroField) {
  const System sys = nftest::reduced_system();
  const Field z(sys.grid());
  const auto e = energy(sys, z);
  EXPECT_EQ(e.kinetic, 0.0);
  EXPECT_EQ(e.linear, 0.0);
  EXPECT_EQ(e.nonlocal, 0.0);
  EXPECT_EQ(e.penalty, 0.0);
  EXPECT_EQ(e.nonlinear, 0.0);
  EXPECT_EQ(e.total, 0.0);
  EXPECT_TRUE(gradient(sys, z).is_zero());
  EXPECT_EQ(dual_residual(sys, z), 0.0);
}

TEST(Energy, EvenInU) {
  std::mt19937_64 rng(17);
  const System sys = nftest::reduced_system();
  for (int i = 0; i < 10; ++i) {
    const Field u = nftest::random_smooth(sys.grid(), rng, 1.0, 14.0);
    EXPECT_EQ(energy(sys, -u).total, energy(sys, u).total);
  }
}

TEST(Energy, TermsAgainstDirectSums) {
  // V well 0.3..1, K = 1; sin-free Gaussian so every term has a closed form
  // check on the kinetic part: int |u'|^2 for exp(-x^2/2) is sqrt(pi)/2
  const System sys = nftest::reduced_system();
  const Field u = nftest::gaussian(sys.grid(), 1.0);
  const auto e = energy(sys, u);
  EXPECT_NEAR(e.kinetic, 0.5 * std::sqrt(M_PI) / 2.0, 1e-10);
  double lin = 0.0, nl = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double ex = sys.epsilon() * sys.grid().point(i)[0];
    const double V = 1.0 - 0.7 * std::exp(-ex * ex);
    lin += 0.5 * V * u[i] * u[i] * sys.grid().h();
    nl += std::pow(std::abs(u[i]), 4.5) / 4.5 * sys.grid().h();
  }
  EXPECT_NEAR(e.linear, lin, 1e-13);
  EXPECT_NEAR(e.nonlinear, nl, 1e-13);
  EXPECT_EQ(e.nonlocal, 0.0);
  EXPECT_NEAR(e.total, e.kinetic + e.linear - e.nonlinear, 1e-14);
}

TEST(Energy, ScaledBumpGoesNegative) {
  const System sys = nftest::reduced_system();
  const Field v = Field::from_function(sys.grid(), [](const Point& x) {
    const double z = 1 - x[0] * x[0] / 4.0;
    return z > 0 ? z * z * z * z : 0.0;
  });
  double R = 1.0;
  while (energy(sys, R * v).total >= 0.0) {
    R *= 2.0;
    ASSERT_LT(R, 1e6);
  }
  EXPECT_GT(R, 1.0);
  EXPECT_GT(energy(sys, v).total, 0.0);
}

TEST(Energy, GradientMatchesFiniteDifference1D) {
  std::mt19937_64 rng(23);
  const System sys = nftest::reduced_system();
  for (int i = 0; i < 20; ++i) {
    // spread past Lambda_eps so the penalty is active on some draws
    const Field u = nftest::random_smooth(sys.grid(), rng, 1.0, 16.0);
    const Field v = nftest::overlapping_direction(u, rng, 16.0);
    EXPECT_LT(nftest::fd_gradient_mismatch(sys, u, v), 1e-4);
  }
}

TEST(Energy, GradientMatchesFiniteDifference3D) {
  std::mt19937_64 rng(29);
  const System sys(nftest::coupled_3d().model);
  for (int i = 0; i < 3; ++i) {
    const Field u = nftest::random_smooth(sys.grid(), rng, 1.0, 6.0);
    const Field v = nftest::overlapping_direction(u, rng, 6.0);
    EXPECT_LT(nftest::fd_gradient_mismatch(sys, u, v), 1e-4);
  }
}

TEST(Energy, DualNormOfSpectralMode) {
  // g = sin(kx): H^-1 norm^2 = L / (1 + k^2)
  const Grid g = Grid::make(1, 64, 4.0);
  const double k = 2 * M_PI / 4.0;
  const Field s = Field::from_function(g, [&](const Point& x) { return std::sin(k * x[0]); });
  EXPECT_NEAR(dual_norm(s), std::sqrt(4.0 / (1 + k * k)), 1e-12);
}

TEST(Energy, BreakdownCsv) {
  EnergyBreakdown e{1, 2, 3, 4, 5, 6};
  EXPECT_EQ(EnergyBreakdown::csv_header(), "kinetic,linear,nonlocal,penalty,nonlinear,total");
  EXPECT_EQ(e.csv_row(), "1,2,3,4,5,6");
}
