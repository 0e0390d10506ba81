#pragma once
// Auxiliary operator A and the descending flow.
//
// A(u) = v solves M_u v = K f(u), M_u = -Lap + W, W = V + phi_u + lambda(u) chi,
// by PCG preconditioned with S (-Lap + a1)^{-1} S, S^2 = (a1 + k)/(W + k) and
// k the largest kinetic symbol. S = 1 where W is small; where the penalty
// makes W huge, S scales the preconditioner down to about 1/W. Every step is
// sign-symmetric, so A(-u) = -A(u) bit for bit.
//
// descend() iterates u <- N(u + s (A(u) - u)) with Armijo backtracking on s.
// N rescales each significant connected sign component of its argument so the
// energy is maximal along the span of those components. Without N the plain
// iteration is repelled from saddle-type nodal critical points; with it the
// flow runs on a Nehari-type set where they are local minima.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "nodalflow/energy.hpp"
#include "nodalflow/errors.hpp"
#include "nodalflow/grid.hpp"

namespace nodalflow {

struct ASolve {
  Field v;
  int iterations = 0;
  double residual = 0.0;  // relative l2 residual of the linear solve
};

inline ASolve solve_A(const System& sys, const Field& u, double lin_tol = 1e-10, int max_iters = 2000) {
  const Grid& g = u.grid();
  const std::size_t n = u.size();
  const auto phi = sys.phi(u);
  const double lambda = penalty(sys, u).lambda;
  const double a1 = sys.a1();
  const double kmax = g.dim * std::pow(M_PI / g.h(), 2);
  std::vector<double> pot(n), scale(n);
  Field b(g);
  const auto& nl = sys.nonlinearity();
  for (std::size_t i = 0; i < n; ++i) {
    pot[i] = sys.V()[i] + lambda * sys.chi()[i] + (phi ? (*phi)[i] : 0.0);
    scale[i] = std::sqrt((a1 + kmax) / (pot[i] + kmax));
    b[i] = sys.K()[i] * nl.f(u[i]);
  }
  auto precondition = [&](Field r) {
    for (std::size_t i = 0; i < n; ++i) r[i] *= scale[i];
    Field z = shifted_inverse(r, a1);
    for (std::size_t i = 0; i < n; ++i) z[i] *= scale[i];
    return z;
  };
  auto apply_M = [&](const Field& p) {
    Field r = laplacian(p);
    for (std::size_t i = 0; i < n; ++i) r[i] = -r[i] + pot[i] * p[i];
    return r;
  };
  auto dotp = [&](const Field& a, const Field& c) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * c[i];
    return s;
  };

  ASolve out{Field(g), 0, 0.0};
  const double bnorm = std::sqrt(dotp(b, b));
  if (bnorm == 0.0) return out;
  Field r = b;
  Field z = precondition(r);
  Field p = z;
  double rz = dotp(r, z);
  for (int it = 1; it <= max_iters; ++it) {
    const Field Mp = apply_M(p);
    const double alpha = rz / dotp(p, Mp);
    out.v.axpy(alpha, p);
    r.axpy(-alpha, Mp);
    out.iterations = it;
    out.residual = std::sqrt(dotp(r, r)) / bnorm;
    if (out.residual <= lin_tol) return out;
    z = precondition(r);
    const double rz_new = dotp(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  throw SolverError("A: PCG did not converge", out.residual);
}

inline Field apply_A(const System& sys, const Field& u, double lin_tol = 1e-10, int max_iters = 2000) {
  return solve_A(sys, u, lin_tol, max_iters).v;
}

struct CoercivityResult {
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  bool ok = true;
};

// <g(u), u - A u> >= min(1, a1) ||u - A u||_h1^2, up to the linear-solve error.
inline CoercivityResult coercivity_check(const System& sys, const Field& u, double lin_tol = 1e-10) {
  CoercivityResult r;
  const Field d = u - apply_A(sys, u, lin_tol);
  r.lhs = inner(gradient(sys, u), d);
  r.rhs = std::min(1.0, sys.a1()) * std::pow(h1_norm(d), 2);
  Field b(u.grid());
  for (std::size_t i = 0; i < u.size(); ++i) b[i] = sys.K()[i] * sys.nonlinearity().f(u[i]);
  r.slack = 10.0 * lin_tol * l2_norm(b) * l2_norm(d) + 1e-13 * (std::abs(r.lhs) + r.rhs);
  r.ok = r.lhs >= r.rhs - r.slack;
  return r;
}

struct ConeGeometry {
  double sigma = 0.0;
  double dplus = 0.0;   // ||u^-||_h1, surrogate distance to the positive cone
  double dminus = 0.0;  // ||u^+||_h1, surrogate distance to the negative cone
  bool in_plus() const { return dplus < sigma; }
  bool in_minus() const { return dminus < sigma; }
  bool sign_changing() const { return dplus > 0.0 && dminus > 0.0; }
};

inline ConeGeometry cone_distances(const Field& u, double sigma) {
  const auto parts = split_signs(u);
  return {sigma, h1_norm(parts.minus), h1_norm(parts.plus)};
}

struct SignComponents {
  std::vector<int> label;  // -1 where u == 0
  int count = 0;
};

// Face-connected regions of constant strict sign. No wrap-around: a region
// touching opposite box faces is two regions.
inline SignComponents sign_components(const Field& u) {
  const Grid& g = u.grid();
  SignComponents c;
  c.label.assign(u.size(), -1);
  std::vector<std::size_t> stack;
  std::array<std::size_t, 3> stride{1, 1, 1};
  for (int a = g.dim - 2; a >= 0; --a) stride[a] = stride[a + 1] * g.n;
  for (std::size_t seed = 0; seed < u.size(); ++seed) {
    if (u[seed] == 0.0 || c.label[seed] >= 0) continue;
    const bool pos = u[seed] > 0.0;
    const int id = c.count++;
    c.label[seed] = id;
    stack.push_back(seed);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      const auto m = g.multi_index(i);
      for (int a = 0; a < g.dim; ++a) {
        for (int dir = -1; dir <= 1; dir += 2) {
          const int mm = m[a] + dir;
          if (mm < 0 || mm >= g.n) continue;
          const std::size_t j = dir > 0 ? i + stride[a] : i - stride[a];
          if (c.label[j] >= 0 || u[j] == 0.0 || (u[j] > 0.0) != pos) continue;
          c.label[j] = id;
          stack.push_back(j);
        }
      }
    }
  }
  return c;
}

namespace detail {

// Solves A x = b in place (A row-major m x m); false if singular.
inline bool solve_dense(std::vector<double> A, std::vector<double>& b) {
  const std::size_t m = b.size();
  for (std::size_t col = 0; col < m; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < m; ++r)
      if (std::abs(A[r * m + col]) > std::abs(A[piv * m + col])) piv = r;
    if (A[piv * m + col] == 0.0 || !std::isfinite(A[piv * m + col])) return false;
    if (piv != col) {
      for (std::size_t k = 0; k < m; ++k) std::swap(A[col * m + k], A[piv * m + k]);
      std::swap(b[col], b[piv]);
    }
    for (std::size_t r = col + 1; r < m; ++r) {
      const double f = A[r * m + col] / A[col * m + col];
      for (std::size_t k = col; k < m; ++k) A[r * m + k] -= f * A[col * m + k];
      b[r] -= f * b[col];
    }
  }
  for (std::size_t r = m; r-- > 0;) {
    double s = b[r];
    for (std::size_t k = r + 1; k < m; ++k) s -= A[r * m + k] * b[k];
    b[r] = s / A[r * m + r];
  }
  return true;
}

}  // namespace detail

// Rescales the significant sign components w_i of w by s_i > 0 so that
// s -> Phi(sum s_i w_i + rest) is stationary. The rest (components with l2
// norm below rel * ||w||_l2) is held fixed. Exactly odd in w.
inline Field normalize_components(const System& sys, const Field& w, double rel = 1e-3) {
  const auto comps = sign_components(w);
  if (comps.count == 0) return w;
  const Grid& g = w.grid();
  const double dv = g.cell_volume();
  std::vector<double> sq(comps.count, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (comps.label[i] >= 0) sq[comps.label[i]] += w[i] * w[i];
    total += w[i] * w[i];
  }
  std::vector<int> big;
  for (int c = 0; c < comps.count; ++c)
    if (std::sqrt(sq[c]) >= rel * std::sqrt(total)) big.push_back(c);
  const std::size_t m = big.size();
  if (m == 0) return w;
  std::vector<int> slot(comps.count, -1);
  for (std::size_t k = 0; k < m; ++k) slot[big[k]] = static_cast<int>(k);

  std::vector<Field> parts(m, Field(g));
  for (std::size_t i = 0; i < w.size(); ++i)
    if (comps.label[i] >= 0 && slot[comps.label[i]] >= 0) parts[slot[comps.label[i]]][i] = w[i];

  Field rest = w;
  for (const auto& part : parts) rest -= part;

  const auto& nl = sys.nonlinearity();
  const double p = nl.p;
  const double beta = sys.config().beta;
  auto L = [&](const Field& f) {
    Field l = laplacian(f);
    for (std::size_t i = 0; i < f.size(); ++i) l[i] = -l[i] + sys.V()[i] * f[i];
    return l;
  };
  // Phi(sum s_i w_i + rest) = 1/2 s.Q.s + s.b + 1/4 sum N_ij s_i^2 s_j^2 + 1/2 sum n_i s_i^2
  //                          + (sum m_i s_i^2 + m_rest - 1)_+^beta - sum F_i s_i^p + const
  std::vector<double> Q(m * m), N(m * m, 0.0), mass(m), Fi(m), bvec(m), nvec(m, 0.0);
  std::vector<Field> Lw;
  Lw.reserve(m);
  const Field Lrest = L(rest);
  for (std::size_t a = 0; a < m; ++a) {
    Lw.push_back(L(parts[a]));
    double ms = 0.0, fs = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      ms += sys.chi()[i] * parts[a][i] * parts[a][i];
      fs += sys.K()[i] * nl.F(parts[a][i]);
    }
    mass[a] = ms * dv;
    Fi[a] = fs * dv;
    bvec[a] = 0.5 * (inner(Lw[a], rest) + inner(Lrest, parts[a]));
  }
  const double mass_rest = penalty_mass(sys, rest);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a; b < m; ++b) {
      const double q = 0.5 * (inner(Lw[a], parts[b]) + inner(Lw[b], parts[a]));
      Q[a * m + b] = Q[b * m + a] = q;
    }
  if (sys.coupled()) {
    std::vector<Field> phis, sqp;
    for (std::size_t a = 0; a < m; ++a) {
      phis.push_back(*sys.phi(parts[a]));
      sqp.push_back(squared(parts[a]));
    }
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = a; b < m; ++b) {
        const double v = 0.5 * (inner(phis[a], sqp[b]) + inner(phis[b], sqp[a]));
        N[a * m + b] = N[b * m + a] = v;
      }
    if (!rest.is_zero()) {
      const Field phi_rest = *sys.phi(rest);
      const Field rest_sq = squared(rest);
      for (std::size_t a = 0; a < m; ++a) nvec[a] = 0.5 * (inner(phi_rest, sqp[a]) + inner(phis[a], rest_sq));
    }
  }

  // Seed: each s_i maximizes its own ray, Q + N s^2 = p F s^(p-2) (penalty ignored).
  std::vector<double> s(m, 1.0);
  for (std::size_t a = 0; a < m; ++a) {
    const double Qa = Q[a * m + a], Na = N[a * m + a];
    if (!(Qa > 0.0 && Fi[a] > 0.0)) continue;
    auto h = [&](double ls) {
      const double x = std::exp(ls);
      return Qa + Na * x * x - p * Fi[a] * std::pow(x, p - 2.0);
    };
    double lo = -50.0, hi = 50.0;
    if (!(h(lo) > 0.0 && h(hi) < 0.0)) continue;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (h(mid) > 0.0 ? lo : hi) = mid;
    }
    s[a] = std::exp(0.5 * (lo + hi));
  }
  // Newton on grad_s Phi(sum s_i w_i) = 0, keeping s > 0.
  for (int it = 0; it < 200; ++it) {
    double M = mass_rest;
    for (std::size_t a = 0; a < m; ++a) M += s[a] * s[a] * mass[a];
    const double ex = std::max(0.0, M - 1.0);
    const double k1 = ex > 0.0 ? std::pow(ex, beta - 1.0) : 0.0;
    const double k2 = ex > 0.0 ? std::pow(ex, beta - 2.0) : 0.0;
    std::vector<double> grad(m), H(m * m);
    for (std::size_t a = 0; a < m; ++a) {
      double qs = 0.0, ns = 0.0;
      for (std::size_t b = 0; b < m; ++b) {
        qs += Q[a * m + b] * s[b];
        ns += N[a * m + b] * s[b] * s[b];
      }
      grad[a] = qs + bvec[a] + s[a] * (ns + nvec[a]) + 2.0 * beta * k1 * s[a] * mass[a] - p * std::pow(s[a], p - 1.0) * Fi[a];
      for (std::size_t b = 0; b < m; ++b) {
        double hab = Q[a * m + b] + 2.0 * s[a] * s[b] * N[a * m + b] +
                     4.0 * beta * (beta - 1.0) * k2 * s[a] * s[b] * mass[a] * mass[b];
        if (a == b) hab += ns + nvec[a] + 2.0 * beta * k1 * mass[a] - p * (p - 1.0) * std::pow(s[a], p - 2.0) * Fi[a];
        H[a * m + b] = hab;
      }
    }
    std::vector<double> step(m);
    for (std::size_t a = 0; a < m; ++a) step[a] = -grad[a];
    if (!detail::solve_dense(H, step)) break;
    double t = 1.0;
    auto positive = [&] {
      for (std::size_t a = 0; a < m; ++a)
        if (!(s[a] + t * step[a] > 0.0)) return false;
      return true;
    };
    while (!positive() && t > 1e-12) t *= 0.5;
    if (!positive()) break;
    double biggest = 0.0;
    for (std::size_t a = 0; a < m; ++a) {
      s[a] += t * step[a];
      biggest = std::max(biggest, std::abs(step[a]) / std::max(1.0, s[a]));
    }
    if (biggest < 1e-14) break;
  }
  for (double v : s)
    if (!std::isfinite(v)) return w;

  Field out = w;
  for (std::size_t i = 0; i < w.size(); ++i)
    if (comps.label[i] >= 0 && slot[comps.label[i]] >= 0) out[i] = s[slot[comps.label[i]]] * w[i];
  return out;
}

struct FlowParams {
  int max_iters = 5000;
  std::optional<double> tol;  // on ||u - A u||_h1; default 1e-8 (1 + ||u0||_h1)
  double step0 = 1.0;
  double backtrack = 0.5;
  double armijo = 1e-4;
  double lin_tol = 1e-10;
  int lin_max_iters = 2000;
  double min_step = 1e-10;
  double energy_floor = -1e8;
  double norm_cap = 1e8;
  double rho_rel = 1e-3;       // rho_min = rho_rel ||u||_h1
  double component_rel = 1e-3;
  double resolution = 1e-13;   // relative energy resolution for step acceptance
  bool normalize = true;
};

enum class FlowStatus { SignChangingCritical, SignedCritical, MaxIters, Diverged, Stalled };

inline std::string status_name(FlowStatus s) {
  switch (s) {
    case FlowStatus::SignChangingCritical: return "sign_changing_critical";
    case FlowStatus::SignedCritical: return "signed_critical";
    case FlowStatus::MaxIters: return "max_iters";
    case FlowStatus::Diverged: return "diverged";
    case FlowStatus::Stalled: return "stalled";
  }
  return "?";
}

struct FlowRecord {
  int iteration = 0;
  double energy = 0.0;
  double residual = 0.0;  // ||u - A u||_h1
  double dplus = 0.0;
  double dminus = 0.0;
  double mass = 0.0;
  double step = 0.0;               // step accepted to reach this iterate
  bool resolution_limited = false; // accepted below the energy resolution
};

struct FlowResult {
  Field u_final;
  int iterations = 0;
  std::vector<FlowRecord> history;
  FlowStatus classification = FlowStatus::MaxIters;
  double residual = 0.0;
  double tol = 0.0;
  double energy = 0.0;
  ConeGeometry cone;

  std::vector<double> residual_history() const {
    std::vector<double> r;
    for (const auto& h : history) r.push_back(h.residual);
    return r;
  }
  std::vector<double> energy_history() const {
    std::vector<double> r;
    for (const auto& h : history) r.push_back(h.energy);
    return r;
  }
};

inline FlowStatus classify(const Field& u, double rho_rel) {
  const auto cone = cone_distances(u, 0.0);
  const double rho_min = rho_rel * h1_norm(u);
  if (rho_min > 0.0 && cone.dplus >= rho_min && cone.dminus >= rho_min) return FlowStatus::SignChangingCritical;
  return FlowStatus::SignedCritical;
}

inline FlowResult descend(const System& sys, const Field& u0, const FlowParams& params = {}) {
  if (!u0.finite()) throw std::invalid_argument("descend: non-finite start");
  if (!(params.step0 > 0.0 && params.step0 <= 1.0)) throw ConfigError("step0 must be in (0, 1]");
  const double c = std::min(1.0, sys.a1());
  auto N = [&](const Field& w) { return params.normalize ? normalize_components(sys, w, params.component_rel) : w; };
  auto A = [&](const Field& w) { return apply_A(sys, w, params.lin_tol, params.lin_max_iters); };

  FlowResult res;
  res.tol = params.tol.value_or(1e-8 * (1.0 + h1_norm(u0)));
  if (!(res.tol > 0.0)) throw ConfigError("flow tol must be positive");
  Field u = N(u0);
  double E = energy(sys, u).total;
  double last_step = 0.0;
  bool last_limited = false;
  for (int it = 0;; ++it) {
    const Field d = A(u) - u;
    const double r = h1_norm(d);
    const auto cone = cone_distances(u, sys.config().sigma);
    res.history.push_back({it, E, r, cone.dplus, cone.dminus, penalty_mass(sys, u), last_step, last_limited});
    res.iterations = it;
    res.residual = r;
    res.cone = cone;
    if (r < res.tol) {
      res.classification = classify(u, params.rho_rel);
      break;
    }
    if (it >= params.max_iters) {
      res.classification = FlowStatus::MaxIters;
      break;
    }
    double s = params.step0;
    std::optional<Field> accepted;
    double E_new = 0.0;
    bool limited = false;
    while (s >= params.min_step) {
      Field trial = u;
      trial.axpy(s, d);
      trial = N(trial);
      const double Et = energy(sys, trial).total;
      const double want = params.armijo * s * c * r * r;
      const double resolution = params.resolution * std::max(1.0, std::abs(E));
      if (std::isfinite(Et) && Et <= E - want) {
        accepted = std::move(trial);
        E_new = Et;
        break;
      }
      // first-order decrease itself below energy resolution: accept if flat
      if (std::isfinite(Et) && s * c * r * r < resolution && std::abs(Et - E) <= resolution) {
        accepted = std::move(trial);
        E_new = Et;
        limited = true;
        break;
      }
      s *= params.backtrack;
    }
    if (!accepted) {
      res.classification = FlowStatus::Stalled;
      break;
    }
    double linf = 0.0;
    for (double v : accepted->values()) linf = std::max(linf, std::abs(v));
    if (E_new < params.energy_floor || !(linf < params.norm_cap)) {
      u = std::move(*accepted);
      E = E_new;
      res.classification = FlowStatus::Diverged;
      break;
    }
    u = std::move(*accepted);
    E = E_new;
    last_step = s;
    last_limited = limited;
  }
  res.energy = E;
  res.u_final = std::move(u);
  return res;
}

inline std::string history_csv(const FlowResult& r) {
  std::string out = "iteration,energy,residual,dplus,dminus,penalty_mass,step\n";
  char buf[320];
  for (const auto& h : r.history) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", h.iteration, h.energy, h.residual,
                  h.dplus, h.dminus, h.mass, h.step);
    out += buf;
  }
  return out;
}

}  // namespace nodalflow
