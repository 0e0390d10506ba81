#pragma once
// Bump bases R sum t_i v_i on the unit sphere in R^n, multi-start descents and
// the deduplicated, energy-sorted solution set.
//
// Bumps are (1 - |x-c|^2/r^2)_+^4 centred on the first axis at spacing d,
// symmetric about 0. Centres and radius live in the rescaled frame, so an eps
// sweep reuses the same bump functions while Lambda_eps grows.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nodalflow/energy.hpp"
#include "nodalflow/errors.hpp"
#include "nodalflow/flow.hpp"

namespace nodalflow {

struct BumpLayout {
  double radius = 1.9;
  double spacing = 4.0;
};

struct BumpBasis {
  int n = 0;
  double R = 1.0;
  double radius = 0.0;
  std::vector<Point> centers;
  std::vector<Field> bumps;

  Field combine(const std::vector<double>& t) const {
    Field u(bumps.at(0).grid());
    for (int i = 0; i < n; ++i) u.axpy(R * t.at(i), bumps[i]);
    return u;
  }
};

inline BumpBasis build_bumps(const System& sys, int n, double R, const BumpLayout& layout = {}) {
  if (n < 1) throw ConfigError("bump count must be at least 1");
  if (!(layout.radius > 0.0)) throw ConfigError("bump radius must be positive");
  if (n > 1 && layout.spacing < 2.0 * layout.radius)
    throw ConfigError("bump spacing must be at least twice the bump radius");
  const double room = sys.config().domain.radius / sys.epsilon();
  const double reach = 0.5 * (n - 1) * layout.spacing + layout.radius;
  if (reach > room) {
    std::ostringstream os;
    os << "insufficient room in Lambda_eps for " << n << " bumps (need radius " << reach << ", have " << room
       << "); use a smaller n or a smaller eps";
    throw ConfigError(os.str());
  }
  BumpBasis b;
  b.n = n;
  b.R = R;
  b.radius = layout.radius;
  const Grid& g = sys.grid();
  for (int i = 0; i < n; ++i) {
    const Point c{(i - 0.5 * (n - 1)) * layout.spacing, 0.0, 0.0};
    b.centers.push_back(c);
    b.bumps.push_back(Field::from_function(g, [&](const Point& x) {
      const Point d{x[0] - c[0], x[1] - c[1], x[2] - c[2]};
      const double z = 1.0 - dot(d, d) / (layout.radius * layout.radius);
      return z > 0.0 ? z * z * z * z : 0.0;
    }));
  }
  return b;
}

namespace detail {

inline std::vector<double> alternating(int n) {
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) t[i] = (i % 2 == 0 ? 1.0 : -1.0) / std::sqrt(static_cast<double>(n));
  return t;
}

// Flip so the first nonzero entry is positive.
inline void canonical_sign(std::vector<double>& t) {
  for (double v : t) {
    if (v == 0.0) continue;
    if (v < 0.0)
      for (double& x : t) x = -x;
    return;
  }
}

}  // namespace detail

// Smallest R = 2^j with Phi(R sum t_i v_i) < 0 on every sampled direction.
inline double negative_energy_radius(const System& sys, int n, const BumpLayout& layout, int directions = 50,
                                     std::uint64_t seed = 1) {
  BumpBasis b = build_bumps(sys, n, 1.0, layout);
  std::vector<std::vector<double>> ts{detail::alternating(n)};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  while (static_cast<int>(ts.size()) < directions) {
    std::vector<double> t(n);
    double s = 0.0;
    for (double& x : t) {
      x = g(rng);
      s += x * x;
    }
    for (double& x : t) x /= std::sqrt(s);
    ts.push_back(t);
  }
  for (double R = 1.0; R <= 1048576.0; R *= 2.0) {
    b.R = R;
    bool all = true;
    for (const auto& t : ts)
      if (!(energy(sys, b.combine(t)).total < 0.0)) {
        all = false;
        break;
      }
    if (all) return R;
  }
  throw ConfigError("no negative-energy radius found up to 2^20");
}

struct Start {
  std::vector<double> t;
  Field u;
};

// Canonical alternating start first, then seeded draws; t and -t never both.
inline std::vector<Start> sphere_starts(const BumpBasis& basis, int m, std::uint64_t seed) {
  if (m < 1) throw ConfigError("sphere_starts needs m >= 1");
  std::vector<std::vector<double>> ts{detail::alternating(basis.n)};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  const int cap = basis.n == 1 ? 1 : m;
  while (static_cast<int>(ts.size()) < cap) {
    std::vector<double> t(basis.n);
    double s = 0.0;
    for (double& x : t) {
      x = g(rng);
      s += x * x;
    }
    if (s == 0.0) continue;
    for (double& x : t) x /= std::sqrt(s);
    detail::canonical_sign(t);
    if (std::find(ts.begin(), ts.end(), t) != ts.end()) continue;
    ts.push_back(t);
  }
  std::vector<Start> out;
  for (auto& t : ts) out.push_back({t, basis.combine(t)});
  return out;
}

struct MinimaxParams {
  int starts_per_n = 64;
  int extra_sizes = 2;  // basis sizes tried: 2 .. k+1+extra_sizes, while they fit
  std::optional<double> R;
  BumpLayout layout;
  double dedup_l2 = 1e-3;
  double dedup_energy = 1e-6;
  FlowParams flow;
};

struct Solution {
  Field u;
  double energy = 0.0;
  double residual = 0.0;       // ||u - A u||_h1
  double dual_residual = 0.0;
  double norm_plus = 0.0;      // ||u^+||_h1
  double norm_minus = 0.0;     // ||u^-||_h1
  double penalty_mass = 0.0;
  double tol = 0.0;
  int basis_size = 0;
  int start_index = 0;
  FlowResult flow;
};

struct SolutionSet {
  std::vector<Solution> solutions;
  bool partial = false;
  int attempts = 0;
  std::vector<std::string> log;
};

inline bool same_solution(const Solution& a, const Field& u, double E, double l2_rel, double e_rel) {
  const double scale = std::max(std::abs(a.energy), std::abs(E));
  if (std::abs(a.energy - E) > e_rel * std::max(scale, 1e-300)) return false;
  const double na = l2_norm(a.u), nu = l2_norm(u);
  const double d = std::min(l2_norm(a.u - u), l2_norm(a.u + u));
  return d <= l2_rel * std::max(na, nu);
}

inline SolutionSet find_solutions(const System& sys, int k, const MinimaxParams& params, std::uint64_t seed) {
  SolutionSet set;
  if (k <= 0) return set;
  std::vector<int> sizes;
  std::vector<std::vector<Start>> starts;
  for (int nb = 2; nb <= k + 1 + params.extra_sizes; ++nb) {
    try {
      const double R = params.R.value_or(negative_energy_radius(sys, nb, params.layout, 50, seed));
      BumpBasis b = build_bumps(sys, nb, R, params.layout);
      starts.push_back(sphere_starts(b, params.starts_per_n, seed + static_cast<std::uint64_t>(nb)));
      sizes.push_back(nb);
    } catch (const ConfigError& e) {
      if (nb <= k + 1) set.log.push_back(std::string("basis size skipped: ") + e.what());
      break;
    }
  }
  if (sizes.empty()) throw ConfigError("no bump basis fits inside Lambda_eps");

  for (int j = 0; j < params.starts_per_n && static_cast<int>(set.solutions.size()) < k; ++j) {
    for (std::size_t s = 0; s < sizes.size() && static_cast<int>(set.solutions.size()) < k; ++s) {
      if (j >= static_cast<int>(starts[s].size())) continue;
      ++set.attempts;
      FlowResult fr = descend(sys, starts[s][j].u, params.flow);
      std::ostringstream os;
      os << "n=" << sizes[s] << " start=" << j << " -> " << status_name(fr.classification) << " E=" << fr.energy
         << " it=" << fr.iterations;
      if (fr.classification != FlowStatus::SignChangingCritical) {
        set.log.push_back(os.str());
        continue;
      }
      bool dup = false;
      for (const auto& have : set.solutions)
        dup = dup || same_solution(have, fr.u_final, fr.energy, params.dedup_l2, params.dedup_energy);
      os << (dup ? " (duplicate)" : " (stored)");
      set.log.push_back(os.str());
      if (dup) continue;
      Solution sol;
      sol.u = fr.u_final;
      sol.energy = fr.energy;
      sol.residual = fr.residual;
      sol.tol = fr.tol;
      sol.basis_size = sizes[s];
      sol.start_index = j;
      sol.flow = std::move(fr);
      set.solutions.push_back(std::move(sol));
    }
  }
  set.partial = static_cast<int>(set.solutions.size()) < k;
  std::stable_sort(set.solutions.begin(), set.solutions.end(),
                   [](const Solution& a, const Solution& b) { return a.energy < b.energy; });

  for (auto& sol : set.solutions) {
    const Field d = sol.u - apply_A(sys, sol.u, params.flow.lin_tol, params.flow.lin_max_iters);
    sol.residual = h1_norm(d);
    sol.dual_residual = dual_residual(sys, sol.u);
    const auto cone = cone_distances(sol.u, sys.config().sigma);
    sol.norm_plus = cone.dminus;
    sol.norm_minus = cone.dplus;
    sol.penalty_mass = penalty_mass(sys, sol.u);
    const double rho_min = params.flow.rho_rel * h1_norm(sol.u);
    if (!(sol.residual < sol.tol) || sol.norm_plus < rho_min || sol.norm_minus < rho_min)
      throw ConsistencyError("stored solution failed re-certification");
  }
  return set;
}

}  // namespace nodalflow
