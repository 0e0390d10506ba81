#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nodalflow/flow.hpp"
#include "support.hpp"

using namespace nodalflow;

namespace {

Field bump(const Grid& g, double c, double r) {
  return Field::from_function(g, [&](const Point& x) {
    const double z = 1 - (x[0] - c) * (x[0] - c) / (r * r);
    return z > 0 ? z * z * z * z : 0.0;
  });
}

// u(x) -> u(-x) on the cell-start grid: index i maps to (n - i) mod n.
Field reflect1d(const Field& u) {
  Field r(u.grid());
  const int n = u.grid().n;
  for (int i = 0; i < n; ++i) r[i] = u[(n - i) % n];
  return r;
}

}  // namespace

TEST(OperatorA, ZeroMapsToZero) {
  const System sys = nftest::reduced_system();
  EXPECT_TRUE(apply_A(sys, Field(sys.grid())).is_zero());
}

TEST(OperatorA, SolvesLinearProblem) {
  std::mt19937_64 rng(31);
  const System sys = nftest::reduced_system();
  const Field u = nftest::random_smooth(sys.grid(), rng, 1.0, 16.0);
  const Field v = apply_A(sys, u, 1e-12);
  const double lambda = penalty(sys, u).lambda;
  Field r = laplacian(v);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double rhs = sys.K()[i] * sys.nonlinearity().f(u[i]);
    const double lhs = -r[i] + (sys.V()[i] + lambda * sys.chi()[i]) * v[i];
    num += (lhs - rhs) * (lhs - rhs);
    den += rhs * rhs;
  }
  EXPECT_LT(std::sqrt(num / den), 1e-11);
}

TEST(OperatorA, IterationCapRaisesWithResidual) {
  std::mt19937_64 rng(37);
  const System sys = nftest::reduced_system();
  const Field u = nftest::random_smooth(sys.grid(), rng, 1.0, 16.0);
  try {
    (void)solve_A(sys, u, 1e-14, 1);
    FAIL() << "expected SolverError";
  } catch (const SolverError& e) {
    EXPECT_GT(e.residual, 1e-14);
  }
}

TEST(Coercivity, ZeroField) {
  const System sys = nftest::reduced_system();
  const auto c = coercivity_check(sys, Field(sys.grid()));
  EXPECT_EQ(c.lhs, 0.0);
  EXPECT_EQ(c.rhs, 0.0);
  EXPECT_TRUE(c.ok);
}

TEST(Coercivity, RandomFields) {
  std::mt19937_64 rng(41);
  const System sys = nftest::reduced_system();
  for (int i = 0; i < 30; ++i) {
    const Field u = nftest::random_smooth(sys.grid(), rng, 1.5, 16.0);
    const auto c = coercivity_check(sys, u);
    EXPECT_TRUE(c.ok) << "lhs=" << c.lhs << " rhs=" << c.rhs;
    EXPECT_GE(c.rhs, 0.0);
  }
}

TEST(Cones, SignedAndOddFields) {
  const Grid g = Grid::make(1, 128, 10.0);
  const Field pos = bump(g, 0.0, 3.0);
  auto c = cone_distances(pos, 1e-2);
  EXPECT_GT(c.dminus, 0.0);
  EXPECT_EQ(c.dplus, 0.0);
  EXPECT_TRUE(c.in_plus());

  const Field odd = bump(g, -3.0, 2.0) - bump(g, 3.0, 2.0);
  c = cone_distances(odd, 1e-2);
  EXPECT_NEAR(c.dplus, c.dminus, 1e-12 * c.dplus);
  EXPECT_TRUE(c.sign_changing());

  const Field pert = pos - 1e-4 * bump(g, 6.0, 1.0);
  c = cone_distances(pert, 1e-2);
  EXPECT_GT(c.dplus, 0.0);
  EXPECT_TRUE(c.in_plus());
  EXPECT_FALSE(c.in_minus());
}

TEST(Cones, ContractionOnBoundary) {
  std::mt19937_64 rng(43);
  const System sys = nftest::reduced_system();
  for (double sigma : {1e-2, 1e-3}) {
    for (int i = 0; i < 5; ++i) {
      const Field w = nftest::random_smooth(sys.grid(), rng, 2.0, 8.0, 4);
      const auto parts = split_signs(w);
      if (parts.plus.is_zero()) continue;
      const Field u = parts.minus + (sigma / h1_norm(parts.plus)) * parts.plus;
      ASSERT_NEAR(h1_norm(split_signs(u).plus), sigma, 1e-12 * sigma);
      const Field Au = apply_A(sys, u, 1e-12);
      EXPECT_LE(h1_norm(split_signs(Au).plus), 0.5 * sigma + 1e-10);
    }
  }
}

TEST(SignComponents, CountsWithoutWrap) {
  const Grid g = Grid::make(1, 64, 8.0);
  // + on [-8,-4), - on (-4,4), + on (4,8): the two + ends would merge under wrap
  const Field u = Field::from_function(g, [](const Point& x) { return std::cos(M_PI * x[0] / 8.0) < 0 ? 1.0 : -1.0; });
  const auto c = sign_components(u);
  EXPECT_EQ(c.count, 3);
  EXPECT_EQ(sign_components(Field(g)).count, 0);
}

TEST(Normalize, ComponentsAreStationary) {
  const System sys = nftest::reduced_system(0.25, 256);
  const Grid& g = sys.grid();
  const Field w = 3.0 * bump(g, -2.0, 1.9) - 0.5 * bump(g, 2.0, 1.9);
  const Field u = normalize_components(sys, w);
  const Field gu = gradient(sys, u);
  const auto comps = sign_components(u);
  ASSERT_EQ(comps.count, 2);
  for (int k = 0; k < comps.count; ++k) {
    Field part(g);
    for (std::size_t i = 0; i < u.size(); ++i)
      if (comps.label[i] == k) part[i] = u[i];
    EXPECT_LT(std::abs(inner(gu, part)), 1e-9 * std::pow(h1_norm(part), 2));
  }
  EXPECT_EQ(normalize_components(sys, -w).values(), (-u).values());
}

TEST(Descend, ZeroStartIsTrivialCritical) {
  const System sys = nftest::reduced_system(0.25, 64);
  FlowParams p;
  p.normalize = false;
  const auto r = descend(sys, Field(sys.grid()), p);
  EXPECT_EQ(r.iterations, 0);
  EXPECT_EQ(r.classification, FlowStatus::SignedCritical);
  EXPECT_EQ(r.energy, 0.0);
}

TEST(Descend, PositiveBumpStaysPositive) {
  const System sys = nftest::reduced_system(0.25, 64);
  FlowParams p;
  p.tol = 1e-9;
  const auto r = descend(sys, 4.0 * bump(sys.grid(), 0.5, 1.9), p);
  EXPECT_EQ(r.classification, FlowStatus::SignedCritical);
  // the discrete inverse is not exactly positivity preserving: only roundoff
  // sized negative values, far below the cone threshold, are allowed
  const auto& vals = r.u_final.values();
  EXPECT_GE(*std::min_element(vals.begin(), vals.end()), -1e-6 * *std::max_element(vals.begin(), vals.end()));
  EXPECT_LT(h1_norm(split_signs(r.u_final).minus), p.rho_rel * h1_norm(r.u_final));
  EXPECT_GT(r.energy, 0.0);
}

TEST(Descend, OddDipoleConvergesSignChanging) {
  const System sys = nftest::reduced_system(0.25, 64);
  const Grid& g = sys.grid();
  const Field v = bump(g, -2.0, 1.9);
  const Field u0 = 2.0 * (v - reflect1d(v));
  FlowParams p;
  p.tol = 1e-9;
  const auto r = descend(sys, u0, p);
  ASSERT_EQ(r.classification, FlowStatus::SignChangingCritical);
  EXPECT_LT(r.residual, 1e-9);
  const double rho_min = p.rho_rel * h1_norm(r.u_final);
  EXPECT_GE(r.cone.dplus, rho_min);
  EXPECT_GE(r.cone.dminus, rho_min);
  // oddness of the start survives every step
  const Field refl = reflect1d(r.u_final);
  EXPECT_LT(nftest::max_abs(r.u_final + refl), 1e-10 * nftest::max_abs(r.u_final));
  // descent: energy never rises beyond the energy resolution
  const auto E = r.energy_history();
  for (std::size_t i = 1; i < E.size(); ++i)
    EXPECT_LE(E[i], E[i - 1] + p.resolution * std::max(1.0, std::abs(E[i - 1])));
}

TEST(Descend, NegatedStartGivesNegatedRun) {
  const System sys = nftest::reduced_system(0.25, 64);
  const Field u0 = 2.0 * (bump(sys.grid(), -2.0, 1.9) - 0.7 * bump(sys.grid(), 2.5, 1.9));
  FlowParams p;
  p.tol = 1e-9;
  const auto a = descend(sys, u0, p), b = descend(sys, -u0, p);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].energy, b.history[i].energy);
    EXPECT_EQ(a.history[i].dplus, b.history[i].dminus);
  }
  EXPECT_EQ(a.u_final.values(), (-b.u_final).values());
}

TEST(Descend, IterationCap) {
  const System sys = nftest::reduced_system(0.25, 64);
  FlowParams p;
  p.max_iters = 1;
  p.tol = 1e-14;
  const auto r = descend(sys, 2.0 * bump(sys.grid(), 0.0, 1.9), p);
  EXPECT_EQ(r.classification, FlowStatus::MaxIters);
  EXPECT_EQ(r.history.size(), 2u);
  EXPECT_EQ(history_csv(r).substr(0, 52), "iteration,energy,residual,dplus,dminus,penalty_mass,");
}
