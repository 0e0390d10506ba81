#pragma once
// Fixtures shared by the unit tests and the acceptance binary.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "nodalflow/config.hpp"
#include "nodalflow/energy.hpp"
#include "nodalflow/grid.hpp"

namespace nftest {

using namespace nodalflow;

inline std::string source_path(const std::string& rel) { return std::string(NODALFLOW_SOURCE_DIR) + "/" + rel; }

inline RunConfig reduced_1d() { return load_config(source_path("configs/reduced_1d.json")); }
inline RunConfig coupled_3d() { return load_config(source_path("configs/coupled_3d.json")); }

// Sum of `terms` Gaussians with random centres, widths and signed amplitudes.
// Centres lie within `spread` of the origin on each active axis.
inline Field random_smooth(const Grid& g, std::mt19937_64& rng, double amp = 1.0, double spread = 3.0,
                           int terms = 3) {
  std::uniform_real_distribution<double> uc(-spread, spread), uw(0.7, 2.0);
  std::normal_distribution<double> ua(0.0, amp);
  Field u(g);
  for (int t = 0; t < terms; ++t) {
    Point c{0, 0, 0};
    for (int a = 0; a < g.dim; ++a) c[a] = uc(rng);
    const double w = uw(rng), A = ua(rng);
    u += Field::from_function(g, [&](const Point& x) {
      const Point d{x[0] - c[0], x[1] - c[1], x[2] - c[2]};
      return A * std::exp(-dot(d, d) / (w * w));
    });
  }
  return u;
}

// Test direction for derivative checks. Half of u is mixed in so <grad, v>
// cannot vanish just because u and the random bumps have disjoint support.
inline Field overlapping_direction(const Field& u, std::mt19937_64& rng, double spread) {
  return random_smooth(u.grid(), rng, 1.0, spread) + 0.5 * u;
}

inline Field gaussian(const Grid& g, double s, const Point& c = {0, 0, 0}) {
  return Field::from_function(g, [&](const Point& x) {
    const Point d{x[0] - c[0], x[1] - c[1], x[2] - c[2]};
    return std::exp(-dot(d, d) / (2.0 * s * s));
  });
}

// 1D reduced system with the box and grid overridden.
inline System reduced_system(double eps = 0.25, int n = 256) {
  RunConfig rc = reduced_1d();
  rc.model.epsilon = eps;
  rc.model.grid.n = n;
  return System(rc.model);
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

inline double max_abs(const Field& u) {
  double m = 0.0;
  for (double v : u.values()) m = std::max(m, std::abs(v));
  return m;
}


// phi for rho = exp(-r^2 / s^2): total mass pi^{3/2} s^3 spread as erf(r/s).
inline double gaussian_phi(double r, double s) {
  if (r < 1e-12) return 0.5 * s * s;
  return std::pow(M_PI, 1.5) * s * s * s * std::erf(r / s) / (4.0 * M_PI * r);
}

// int over the unit cube centred at 0 of 1/|x|, by m^3 subcell midpoints.
inline double cube_inverse_distance_midpoint(int m) {
  double s = 0.0;
  const double d = 1.0 / m;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int k = 0; k < m; ++k) {
        const double x = -0.5 + (i + 0.5) * d, y = -0.5 + (j + 0.5) * d, z = -0.5 + (k + 0.5) * d;
        s += 1.0 / std::sqrt(x * x + y * y + z * z);
      }
  return s * d * d * d;
}

// Brute-force sum of rho(y) h^3 / (4 pi |x - y|) over every grid cell, self
// cell from the given cube constant.
inline double direct_phi(const Field& rho, std::size_t at, double cube) {
  const Grid& g = rho.grid();
  const double h = g.h();
  const Point x = g.point(at);
  double s = 0.0;
  for (std::size_t j = 0; j < rho.size(); ++j) {
    if (j == at) {
      s += rho[j] * cube * h * h / (4.0 * M_PI);
      continue;
    }
    const Point y = g.point(j);
    const Point d{x[0] - y[0], x[1] - y[1], x[2] - y[2]};
    s += rho[j] * h * h * h / (4.0 * M_PI * norm(d));
  }
  return s;
}

// Fourth-order central difference of Phi along v against <gradient(u), v>;
// returns the relative mismatch. The penalty is only C^2 where the outside
// mass crosses 1, so the step stays small enough not to straddle that kink
// by much; the wide stencil keeps truncation error down at that step.
inline double fd_gradient_mismatch(const System& sys, const Field& u, const Field& v, double step = 3e-5) {
  auto phi = [&](double t) { return energy(sys, u + (t * step) * v).total; };
  const double fd = (-phi(2) + 8 * phi(1) - 8 * phi(-1) + phi(-2)) / (12.0 * step);
  const double an = inner(gradient(sys, u), v);
  return std::abs(fd - an) / std::max(std::abs(an), 1e-300);
}

}  // namespace nftest
