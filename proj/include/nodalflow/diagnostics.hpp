#pragma once
// Certificates for converged fields: penalty verdict, tail decay fit, peak
// locations, local Pohozaev balance on a ball, exterior sup bound.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nodalflow/energy.hpp"
#include "nodalflow/errors.hpp"
#include "nodalflow/flow.hpp"
#include "nodalflow/grid.hpp"
#include "nodalflow/model.hpp"

namespace nodalflow {

struct UnpenalizedVerdict {
  double mass = 0.0;
  bool verdict = false;  // mass <= 1, so Q and kappa vanish
};

inline UnpenalizedVerdict verify_unpenalized(const System& sys, const Field& u) {
  const double m = penalty_mass(sys, u);
  return {m, m <= 1.0};
}

struct DecayFit {
  bool available = false;
  double C = 0.0;
  double c = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
};

// Least squares log M = log C - c * d for the tail sup
// M(d) = max{|u(x)| : dist(x, B) >= d}, B the rescaled concentration ball.
// Samples enter only where M steps up (record points scanning inward), so
// nodal surfaces running through the tail cannot drag the fit down. Uses points
// with dist >= fit_start, |u| >= floor, inside the inscribed ball of the box.
inline DecayFit decay_fit(const System& sys, const Field& u, double delta, double fit_start = 2.0,
                          double floor = 1e-12) {
  const double rad = concentration_radius(sys.config(), delta) / sys.epsilon();
  const Grid& g = u.grid();
  std::vector<std::pair<double, double>> tail;  // (dist, |u|)
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double r = norm(g.point(i));
    const double d = std::max(0.0, r - rad);
    const double a = std::abs(u[i]);
    if (d >= fit_start && a >= floor && r <= g.L - g.h()) tail.push_back({d, a});
  }
  std::sort(tail.begin(), tail.end());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  std::size_t cnt = 0;
  double record = 0.0;
  for (auto it = tail.rbegin(); it != tail.rend(); ++it) {
    if (!(it->second > record)) continue;
    record = it->second;
    const double X = -it->first, Y = std::log(record);
    sx += X;
    sy += Y;
    sxx += X * X;
    syy += Y * Y;
    sxy += X * Y;
    ++cnt;
  }
  DecayFit f;
  f.points = cnt;
  if (cnt < 8) return f;
  const double nn = static_cast<double>(cnt);
  const double vx = sxx - sx * sx / nn, vy = syy - sy * sy / nn, cxy = sxy - sx * sy / nn;
  if (!(vx > 0.0)) return f;
  f.available = true;
  f.c = cxy / vx;
  f.C = std::exp((sy - f.c * sx) / nn);
  f.r2 = vy > 0.0 ? cxy * cxy / (vx * vy) : 1.0;
  return f;
}

struct Peak {
  Point y{};              // rescaled frame, sub-grid refined
  double value = 0.0;     // u at the grid maximum
  Point eps_y{};          // original frame
  double dist_critical = 0.0;       // dist(eps y, {0})
  double dist_concentration = 0.0;  // dist(eps y, concentration ball)
  double window_mass = 0.0;         // integral of u^2 over |x - y| <= window
};

inline std::vector<Peak> locate_peaks(const System& sys, const Field& u, double frac, double delta,
                                      std::optional<double> min_sep = std::nullopt, double window = 2.0) {
  if (!(frac > 0.0 && frac < 1.0)) throw std::invalid_argument("locate_peaks: frac must be in (0, 1)");
  const Grid& g = u.grid();
  const double h = g.h();
  const double sep = min_sep.value_or(4.0 * h);
  double mx = 0.0;
  for (double v : u.values()) mx = std::max(mx, std::abs(v));
  std::vector<Peak> out;
  if (mx == 0.0) return out;

  std::vector<std::size_t> cand;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double a = std::abs(u[i]);
    if (a < frac * mx) continue;
    const auto m = g.multi_index(i);
    bool is_max = true;
    const int span = g.dim == 1 ? 1 : (g.dim == 2 ? 3 : 9);
    for (int o = 0; o < span * 3 && is_max; ++o) {
      std::array<int, 3> d{0, 0, 0};
      int rest = o;
      for (int a2 = g.dim - 1; a2 >= 0; --a2) {
        d[a2] = rest % 3 - 1;
        rest /= 3;
      }
      if (d == std::array<int, 3>{0, 0, 0}) continue;
      std::array<int, 3> mm = m;
      bool inside = true;
      for (int a2 = 0; a2 < g.dim; ++a2) {
        mm[a2] += d[a2];
        inside = inside && mm[a2] >= 0 && mm[a2] < g.n;
      }
      if (inside && std::abs(u[g.flat(mm)]) > a) is_max = false;
    }
    if (is_max) cand.push_back(i);
  }
  std::stable_sort(cand.begin(), cand.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(u[a]) > std::abs(u[b]); });

  const auto& cfg = sys.config();
  const double crad = concentration_radius(cfg, delta);
  std::vector<std::size_t> kept;
  for (std::size_t i : cand) {
    const Point x = g.point(i);
    bool near = false;
    for (std::size_t j : kept) {
      const Point y = g.point(j);
      const Point d{x[0] - y[0], x[1] - y[1], x[2] - y[2]};
      near = near || norm(d) < sep;
    }
    if (near) continue;
    kept.push_back(i);
    Peak pk;
    pk.value = u[i];
    pk.y = x;
    const auto m = g.multi_index(i);
    for (int a = 0; a < g.dim; ++a) {
      if (m[a] == 0 || m[a] == g.n - 1) continue;
      auto lo = m, hi = m;
      --lo[a];
      ++hi[a];
      const double fl = std::abs(u[g.flat(lo)]), fc = std::abs(u[i]), fh = std::abs(u[g.flat(hi)]);
      const double den = fl - 2.0 * fc + fh;
      if (den < 0.0) pk.y[a] += 0.5 * (fl - fh) / den * h;
    }
    pk.eps_y = {cfg.epsilon * pk.y[0], cfg.epsilon * pk.y[1], cfg.epsilon * pk.y[2]};
    pk.dist_critical = norm(pk.eps_y);
    pk.dist_concentration = std::max(0.0, norm(pk.eps_y) - crad);
    double wm = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
      const Point z = g.point(j);
      const Point d{z[0] - pk.y[0], z[1] - pk.y[1], z[2] - pk.y[2]};
      if (norm(d) <= window) wm += u[j] * u[j];
    }
    pk.window_mass = wm * g.cell_volume();
    out.push_back(pk);
  }
  return out;
}

struct PohozaevTerms {
  Point direction{};
  // volume terms
  double vol_V = 0.0;    // eps/2 int u^2 (grad V . t)
  double vol_chi = 0.0;  // 1/2 int xi u^2 (grad chi . t)
  double vol_F = 0.0;    // eps int F(u) (grad K . t)
  double vol_phi = 0.0;  // -1/2 int u^2 (grad phi . t)
  // surface terms, all carrying (t . nu) or (grad u . nu)
  double surf_phi = 0.0;     // 1/2 phi u^2 (t.nu)
  double surf_F = 0.0;       // -K F(u) (t.nu)
  double surf_grad = 0.0;    // 1/2 |grad u|^2 (t.nu)
  double surf_cross = 0.0;   // -(grad u . t)(grad u . nu)
  double surf_V = 0.0;       // 1/2 V u^2 (t.nu)
  double surf_chi = 0.0;     // 1/2 xi chi u^2 (t.nu)
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
};

namespace detail {

// Gauss-Legendre nodes and weights on [-1, 1].
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

// Multilinear interpolation of grid samples at a point inside the box.
inline double interpolate(const Field& f, const Point& x) {
  const Grid& g = f.grid();
  const double h = g.h();
  std::array<int, 3> base{0, 0, 0};
  std::array<double, 3> frac{0.0, 0.0, 0.0};
  for (int a = 0; a < g.dim; ++a) {
    const double s = (x[a] + g.L) / h;
    int i = static_cast<int>(std::floor(s));
    i = std::clamp(i, 0, g.n - 2);
    base[a] = i;
    frac[a] = s - i;
  }
  double v = 0.0;
  const int corners = 1 << g.dim;
  for (int c = 0; c < corners; ++c) {
    double wgt = 1.0;
    std::array<int, 3> m = base;
    for (int a = 0; a < g.dim; ++a) {
      const int bit = (c >> a) & 1;
      m[a] += bit;
      wgt *= bit ? frac[a] : 1.0 - frac[a];
    }
    v += wgt * f[g.flat(m)];
  }
  return v;
}

}  // namespace detail

struct PohozaevOptions {
  double floor = 1e-10;
  int polar = 24;      // Gauss-Legendre nodes in cos(theta), 3D
  int azimuth = 48;    // uniform azimuth nodes, 2D circle and 3D
};

inline PohozaevTerms pohozaev_residual(const System& sys, const Field& u, const Point& center, double radius,
                                       const PohozaevOptions& opt = {}) {
  const Grid& g = u.grid();
  const double h = g.h();
  for (int a = 0; a < g.dim; ++a)
    if (center[a] - radius < -g.L + 2.0 * h || center[a] + radius > g.L - 3.0 * h)
      throw GeometryError("Pohozaev ball leaves the grid");
  if (!(radius > 0.0)) throw GeometryError("Pohozaev radius must be positive");

  const auto& cfg = sys.config();
  const double eps = cfg.epsilon;
  const auto& nl = sys.nonlinearity();
  PohozaevTerms T;
  const Point ec{eps * center[0], eps * center[1], eps * center[2]};
  T.direction = cfg.driving_potential().gradient(ec);
  const Point& t = T.direction;
  const double xi = penalty(sys, u).lambda;

  std::array<Field, 3> du;
  for (int a = 0; a < g.dim; ++a) du[a] = derivative(u, a);
  std::optional<Field> phi;
  std::array<Field, 3> dphi;
  if (sys.coupled()) {
    const Field rho = squared(u);
    phi = sys.poisson()->potential(rho);
    dphi = sys.poisson()->potential_gradient(rho);
  }

  auto scaled = [&](const Point& x) { return Point{eps * x[0], eps * x[1], eps * x[2]}; };
  // volume integrand, in order V, chi, F, phi
  auto volume_at = [&](const Point& x, double uu, const Point& gphi) -> std::array<double, 4> {
    const Point ex = scaled(x);
    return {0.5 * eps * uu * uu * dot(cfg.V.gradient(ex), t),
            0.5 * xi * uu * uu * dot(chi_eps_gradient(x, eps, cfg.domain), t),
            eps * nl.F(uu) * dot(cfg.K.gradient(ex), t), -0.5 * uu * uu * dot(gphi, t)};
  };
  std::array<double, 4> vol{0, 0, 0, 0};
  if (g.dim == 1) {
    // trapezoid with interpolated end cells
    const double a = center[0] - radius, b = center[0] + radius;
    std::vector<std::pair<double, std::array<double, 4>>> pts;
    auto endpoint = [&](double x) { return volume_at({x, 0, 0}, detail::interpolate(u, {x, 0, 0}), {0, 0, 0}); };
    pts.push_back({a, endpoint(a)});
    for (int i = 0; i < g.n; ++i) {
      const double x = g.coord(i);
      if (x > a && x < b) pts.push_back({x, volume_at({x, 0, 0}, u[i], {0, 0, 0})});
    }
    pts.push_back({b, endpoint(b)});
    for (std::size_t i = 1; i < pts.size(); ++i)
      for (int k = 0; k < 4; ++k)
        vol[k] += 0.5 * (pts[i].first - pts[i - 1].first) * (pts[i].second[k] + pts[i - 1].second[k]);
  } else {
    const double dv = g.cell_volume();
    for (std::size_t i = 0; i < u.size(); ++i) {
      const Point x = g.point(i);
      const Point d{x[0] - center[0], x[1] - center[1], x[2] - center[2]};
      if (norm(d) > radius) continue;
      const Point gp = phi ? Point{dphi[0][i], dphi[1][i], dphi[2][i]} : Point{0, 0, 0};
      const auto v = volume_at(x, u[i], gp);
      for (int k = 0; k < 4; ++k) vol[k] += v[k] * dv;
    }
  }
  T.vol_V = vol[0];
  T.vol_chi = vol[1];
  T.vol_F = vol[2];
  T.vol_phi = vol[3];

  // surface nodes (point, outward normal, weight)
  struct Node {
    Point x, nu;
    double w;
  };
  std::vector<Node> nodes;
  if (g.dim == 1) {
    nodes.push_back({{center[0] + radius, 0, 0}, {1, 0, 0}, 1.0});
    nodes.push_back({{center[0] - radius, 0, 0}, {-1, 0, 0}, 1.0});
  } else if (g.dim == 2) {
    for (int k = 0; k < opt.azimuth; ++k) {
      const double a = 2.0 * M_PI * k / opt.azimuth;
      const Point nu{std::cos(a), std::sin(a), 0};
      nodes.push_back({{center[0] + radius * nu[0], center[1] + radius * nu[1], 0}, nu,
                       2.0 * M_PI * radius / opt.azimuth});
    }
  } else {
    std::vector<double> gx, gw;
    detail::gauss_legendre(opt.polar, gx, gw);
    for (int i = 0; i < opt.polar; ++i) {
      const double ct = gx[i], st = std::sqrt(1.0 - ct * ct);
      for (int k = 0; k < opt.azimuth; ++k) {
        const double a = 2.0 * M_PI * (k + 0.5) / opt.azimuth;
        const Point nu{st * std::cos(a), st * std::sin(a), ct};
        nodes.push_back({{center[0] + radius * nu[0], center[1] + radius * nu[1], center[2] + radius * nu[2]}, nu,
                         gw[i] * (2.0 * M_PI / opt.azimuth) * radius * radius});
      }
    }
  }
  for (const auto& nd : nodes) {
    const double uu = detail::interpolate(u, nd.x);
    Point gu{0, 0, 0};
    for (int a = 0; a < g.dim; ++a) gu[a] = detail::interpolate(du[a], nd.x);
    const double ph = phi ? detail::interpolate(*phi, nd.x) : 0.0;
    const Point ex = scaled(nd.x);
    const double tn = dot(t, nd.nu);
    T.surf_phi += nd.w * 0.5 * ph * uu * uu * tn;
    T.surf_F += nd.w * (-cfg.K.value(ex) * nl.F(uu) * tn);
    T.surf_grad += nd.w * 0.5 * dot(gu, gu) * tn;
    T.surf_cross += nd.w * (-dot(gu, t) * dot(gu, nd.nu));
    T.surf_V += nd.w * 0.5 * cfg.V.value(ex) * uu * uu * tn;
    T.surf_chi += nd.w * 0.5 * xi * chi_eps(nd.x, eps, cfg.domain) * uu * uu * tn;
  }
  T.lhs = T.vol_V + T.vol_chi;
  T.rhs = T.vol_F + T.vol_phi + T.surf_phi + T.surf_F + T.surf_grad + T.surf_cross + T.surf_V + T.surf_chi;
  T.residual = std::abs(T.lhs - T.rhs) / (std::abs(T.lhs) + std::abs(T.rhs) + opt.floor);
  return T;
}

// Largest ball around peaks[i] inside its Voronoi cell and the grid.
inline double inscribed_radius(const Grid& g, const std::vector<Peak>& peaks, std::size_t i) {
  const double h = g.h();
  double r = INFINITY;
  for (int a = 0; a < g.dim; ++a) {
    r = std::min(r, peaks[i].y[a] - (-g.L + 2.0 * h));
    r = std::min(r, (g.L - 3.0 * h) - peaks[i].y[a]);
  }
  for (std::size_t j = 0; j < peaks.size(); ++j) {
    if (j == i) continue;
    const Point d{peaks[i].y[0] - peaks[j].y[0], peaks[i].y[1] - peaks[j].y[1], peaks[i].y[2] - peaks[j].y[2]};
    r = std::min(r, 0.5 * norm(d));
  }
  return r;
}

struct ExteriorBound {
  double sup = 0.0;
  double ratio_eps3 = 0.0;
  double ratio_eps6 = 0.0;
};

// sup |u| over |x| >= radius/eps + delta (rescaled frame).
inline ExteriorBound exterior_bound(const System& sys, const Field& u, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("exterior_bound: delta must be positive");
  const double eps = sys.epsilon();
  const double rin = sys.config().domain.radius / eps + delta;
  ExteriorBound b;
  for (std::size_t i = 0; i < u.size(); ++i)
    if (norm(u.grid().point(i)) >= rin) b.sup = std::max(b.sup, std::abs(u[i]));
  b.ratio_eps3 = b.sup / std::pow(eps, 3.0);
  b.ratio_eps6 = b.sup / std::pow(eps, 6.0);
  return b;
}

struct DiagnosticParams {
  double delta = 0.5;
  double fit_start = 2.0;
  double fit_floor = 1e-12;
  double peak_frac = 0.1;
  double window = 2.0;
  double exterior_delta = 1.0;
};

struct SolutionReport {
  double epsilon = 0.0;
  double energy = 0.0;
  EnergyBreakdown breakdown;
  double penalty_mass = 0.0;
  double q_value = 0.0;
  bool unpenalized = false;
  double weak_residual = 0.0;         // dual residual with penalty
  double unpenalized_residual = 0.0;  // dual residual with lambda = 0
  double flow_residual = 0.0;         // ||u - A u||_h1
  double norm_plus = 0.0;
  double norm_minus = 0.0;
  double linf = 0.0;
  ExteriorBound exterior;
  DecayFit decay;
  std::vector<Peak> peaks;
  std::optional<PohozaevTerms> pohozaev;
  std::optional<double> pohozaev_radius;
  std::string field_path;

  double max_peak_dist_critical() const {
    double m = 0.0;
    for (const auto& p : peaks) m = std::max(m, p.dist_critical);
    return m;
  }
  double max_peak_dist_concentration() const {
    double m = 0.0;
    for (const auto& p : peaks) m = std::max(m, p.dist_concentration);
    return m;
  }
};

inline SolutionReport build_report(const System& sys, const Field& u, const DiagnosticParams& dp,
                                   const FlowParams& fp = {}) {
  SolutionReport r;
  r.epsilon = sys.epsilon();
  r.breakdown = energy(sys, u);
  r.energy = r.breakdown.total;
  const auto pen = penalty(sys, u);
  r.penalty_mass = pen.mass;
  r.q_value = pen.q;
  r.unpenalized = verify_unpenalized(sys, u).verdict;
  r.weak_residual = dual_residual(sys, u, true);
  r.unpenalized_residual = dual_residual(sys, u, false);
  r.flow_residual = h1_norm(u - apply_A(sys, u, fp.lin_tol, fp.lin_max_iters));
  const auto cone = cone_distances(u, sys.config().sigma);
  r.norm_plus = cone.dminus;
  r.norm_minus = cone.dplus;
  r.linf = norms(u).linf;
  r.exterior = exterior_bound(sys, u, dp.exterior_delta);
  r.decay = decay_fit(sys, u, dp.delta, dp.fit_start, dp.fit_floor);
  r.peaks = locate_peaks(sys, u, dp.peak_frac, dp.delta, std::nullopt, dp.window);
  if (!r.peaks.empty()) {
    const double rad = inscribed_radius(u.grid(), r.peaks, 0);
    if (rad > 0.0) {
      try {
        r.pohozaev = pohozaev_residual(sys, u, r.peaks[0].y, rad);
        r.pohozaev_radius = rad;
      } catch (const GeometryError&) {
      }
    }
  }
  return r;
}

inline nlohmann::json to_json(const Point& p, int dim) {
  nlohmann::json a = nlohmann::json::array();
  for (int i = 0; i < dim; ++i) a.push_back(p[i]);
  return a;
}

inline nlohmann::json to_json(const SolutionReport& r, int dim) {
  using nlohmann::json;
  json j;
  j["epsilon"] = r.epsilon;
  j["energy"] = r.energy;
  j["energy_breakdown"] = {{"kinetic", r.breakdown.kinetic}, {"linear", r.breakdown.linear},
                           {"nonlocal", r.breakdown.nonlocal}, {"penalty", r.breakdown.penalty},
                           {"nonlinear", r.breakdown.nonlinear}, {"total", r.breakdown.total}};
  j["penalty_mass"] = r.penalty_mass;
  j["q_value"] = r.q_value;
  j["solves_unpenalized_system"] = r.unpenalized;
  j["weak_residual"] = r.weak_residual;
  j["unpenalized_residual"] = r.unpenalized_residual;
  j["flow_residual"] = r.flow_residual;
  j["sign_norms"] = {{"plus", r.norm_plus}, {"minus", r.norm_minus}};
  j["linf"] = r.linf;
  j["exterior"] = {{"sup", r.exterior.sup}, {"ratio_eps3", r.exterior.ratio_eps3},
                   {"ratio_eps6", r.exterior.ratio_eps6}};
  j["decay"] = {{"available", r.decay.available}, {"C", r.decay.C}, {"c", r.decay.c}, {"r2", r.decay.r2},
                {"points", r.decay.points}};
  json peaks = json::array();
  for (const auto& p : r.peaks)
    peaks.push_back({{"y", to_json(p.y, dim)}, {"eps_y", to_json(p.eps_y, dim)}, {"value", p.value},
                     {"dist_critical", p.dist_critical}, {"dist_concentration", p.dist_concentration},
                     {"window_mass", p.window_mass}});
  j["peaks"] = peaks;
  if (r.pohozaev) {
    const auto& T = *r.pohozaev;
    j["pohozaev"] = {{"radius", *r.pohozaev_radius},
                     {"direction", to_json(T.direction, dim)},
                     {"lhs", T.lhs},
                     {"rhs", T.rhs},
                     {"residual", T.residual},
                     {"volume", {{"V", T.vol_V}, {"chi", T.vol_chi}, {"F", T.vol_F}, {"phi", T.vol_phi}}},
                     {"surface",
                      {{"phi", T.surf_phi},
                       {"F", T.surf_F},
                       {"grad", T.surf_grad},
                       {"cross", T.surf_cross},
                       {"V", T.surf_V},
                       {"chi", T.surf_chi}}}};
  } else {
    j["pohozaev"] = nullptr;
  }
  j["field"] = r.field_path;
  return j;
}

}  // namespace nodalflow
