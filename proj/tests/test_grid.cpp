#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "nodalflow/field_io.hpp"
#include "nodalflow/grid.hpp"
#include "support.hpp"

using namespace nodalflow;

TEST(Grid, RejectsBadShapes) {
  EXPECT_THROW(Grid::make(1, 8, 1.0), ConfigError);
  EXPECT_THROW(Grid::make(1, 48, 1.0), ConfigError);
  EXPECT_THROW(Grid::make(4, 16, 1.0), ConfigError);
  EXPECT_THROW(Grid::make(2, 16, 0.0), ConfigError);
  EXPECT_NO_THROW(Grid::make(3, 16, 2.0));
}

TEST(Grid, CoordinatesAreCellStarts) {
  const Grid g = Grid::make(1, 16, 4.0);
  EXPECT_DOUBLE_EQ(g.h(), 0.5);
  EXPECT_DOUBLE_EQ(g.point(0)[0], -4.0);
  EXPECT_DOUBLE_EQ(g.point(8)[0], 0.0);
  const Grid g3 = Grid::make(3, 16, 4.0);
  for (std::size_t i : {std::size_t{0}, std::size_t{17}, std::size_t{4095}}) EXPECT_EQ(g3.flat(g3.multi_index(i)), i);
}

TEST(Laplacian, ConstantIsHarmonic) {
  const Grid g = Grid::make(2, 32, 3.0);
  const Field u = Field::from_function(g, [](const Point&) { return 1.0; });
  EXPECT_LT(nftest::max_abs(laplacian(u)), 1e-12);
}

TEST(Laplacian, SineEigenfunction1D) {
  const double L = 5.0;
  const Grid g = Grid::make(1, 64, L);
  const double k = M_PI / L;
  const Field u = Field::from_function(g, [&](const Point& x) { return std::sin(k * x[0]); });
  const Field lap = laplacian(u);
  double err = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) err = std::max(err, std::abs(lap[i] + k * k * u[i]));
  EXPECT_LT(err, 1e-8);
}

TEST(Laplacian, ProductOfModes3D) {
  const double L = 2.0;
  const Grid g = Grid::make(3, 16, L);
  const double k1 = M_PI / L, k2 = 2 * M_PI / L, k3 = 3 * M_PI / L;
  const Field u = Field::from_function(
      g, [&](const Point& x) { return std::cos(k1 * x[0]) * std::sin(k2 * x[1]) * std::cos(k3 * x[2]); });
  const Field lap = laplacian(u);
  const double lam = k1 * k1 + k2 * k2 + k3 * k3;
  double err = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) err = std::max(err, std::abs(lap[i] + lam * u[i]));
  EXPECT_LT(err, 1e-9 * lam);
}

TEST(Derivative, SineToCosine) {
  const double L = 3.0;
  const Grid g = Grid::make(1, 64, L);
  const double k = 3 * M_PI / L;
  const Field d = derivative(Field::from_function(g, [&](const Point& x) { return std::sin(k * x[0]); }), 0);
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_NEAR(d[i], k * std::cos(k * g.point(i)[0]), 1e-10);
}

TEST(ShiftedInverse, InvertsOperator) {
  std::mt19937_64 rng(3);
  const Grid g = Grid::make(2, 32, 6.0);
  const Field u = nftest::random_smooth(g, rng);
  const double a = 0.4;
  Field m = laplacian(u);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = -m[i] + a * u[i];
  const Field back = shifted_inverse(m, a);
  EXPECT_LT(nftest::max_abs(back - u), 1e-11 * nftest::max_abs(u));
}

TEST(Norms, ZeroField) {
  const Grid g = Grid::make(1, 32, 1.0);
  const Field z(g);
  const auto n = norms(z);
  EXPECT_EQ(n.l2, 0.0);
  EXPECT_EQ(n.h1, 0.0);
  EXPECT_EQ(n.linf, 0.0);
  EXPECT_EQ(lp_norm(z, 3.0), 0.0);
}

TEST(Norms, GaussianL2) {
  const Grid g = Grid::make(1, 256, 16.0);
  const Field u = Field::from_function(g, [](const Point& x) { return std::exp(-x[0] * x[0]); });
  EXPECT_NEAR(std::pow(l2_norm(u), 2), std::sqrt(M_PI / 2.0), 1e-6);
}

TEST(Norms, SineH1) {
  // int sin^2 = L, int (k cos)^2 = k^2 L over one period of length 2L
  const double L = 4.0, k = M_PI / L;
  const Grid g = Grid::make(1, 64, L);
  const Field u = Field::from_function(g, [&](const Point& x) { return std::sin(k * x[0]); });
  const auto n = norms(u);
  EXPECT_NEAR(n.l2 * n.l2, L, 1e-12);
  EXPECT_NEAR(n.grad * n.grad, k * k * L, 1e-12);
  EXPECT_NEAR(n.h1 * n.h1, (1 + k * k) * L, 1e-12);
  EXPECT_NEAR(n.linf, 1.0, 1e-12);
}

TEST(Norms, LpAgreesWithDirectSum) {
  std::mt19937_64 rng(5);
  const Grid g = Grid::make(2, 32, 5.0);
  const Field u = nftest::random_smooth(g, rng);
  EXPECT_EQ(lp_norm(u, 2.0), norms(u).l2);
  EXPECT_EQ(lp_norm(u, INFINITY), norms(u).linf);
  double s = 0.0;
  for (double v : u.values()) s += std::pow(std::abs(v), 3.0);
  EXPECT_NEAR(lp_norm(u, 3.0), std::cbrt(s * g.h() * g.h()), 1e-12);
}

TEST(SplitSigns, NegativeConstant) {
  const Grid g = Grid::make(1, 16, 1.0);
  const Field u = Field::from_function(g, [](const Point&) { return -3.0; });
  const auto s = split_signs(u);
  EXPECT_TRUE(s.plus.is_zero());
  for (double v : s.minus.values()) EXPECT_EQ(v, -3.0);
}

TEST(SplitSigns, Identity) {
  const Grid g = Grid::make(1, 32, 2.0);
  const Field u = Field::from_function(g, [](const Point& x) { return x[0]; });
  const auto s = split_signs(u);
  for (std::size_t i = 0; i < u.size(); ++i) {
    EXPECT_EQ(s.plus[i], std::max(u[i], 0.0));
    EXPECT_EQ(s.minus[i], std::min(u[i], 0.0));
    EXPECT_EQ(s.plus[i] + s.minus[i], u[i]);
  }
}

TEST(Field, GridMismatchThrows) {
  Field a(Grid::make(1, 16, 1.0)), b(Grid::make(1, 32, 1.0));
  EXPECT_THROW(a += b, std::invalid_argument);
  EXPECT_THROW(inner(a, b), std::invalid_argument);
}

TEST(FieldIo, BinaryAndCsvRoundTrip) {
  std::mt19937_64 rng(9);
  const Grid g = Grid::make(2, 16, 3.0);
  const Field u = nftest::random_smooth(g, rng);
  const auto dir = std::filesystem::temp_directory_path() / "nodalflow_test_io";
  std::filesystem::create_directories(dir);
  write_field((dir / "u.bin").string(), u, 0.125);
  const auto b = read_field((dir / "u.bin").string());
  EXPECT_EQ(b.epsilon, 0.125);
  EXPECT_TRUE(b.field.grid() == g);
  EXPECT_EQ(b.field.values(), u.values());
  write_field_csv((dir / "u.csv").string(), u, 0.125);
  const auto c = read_field_csv((dir / "u.csv").string());
  EXPECT_EQ(c.field.values(), u.values());
  std::filesystem::remove_all(dir);
}
