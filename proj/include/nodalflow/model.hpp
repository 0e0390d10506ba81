#pragma once
// Power nonlinearity, builtin potential families, the domain ball, the cutoff
// chi_eps and the hypothesis validator. Coordinates passed to potentials are
// physical (original frame); callers evaluate V(eps*x) for rescaled x.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nodalflow/errors.hpp"
#include "nodalflow/grid.hpp"

namespace nodalflow {

struct Nonlinearity {
  double p = 4.5;

  double mu() const { return p; }
  double f(double t) const { return std::pow(std::abs(t), p - 2.0) * t; }
  double F(double t) const { return std::pow(std::abs(t), p) / p; }
  double fprime(double t) const { return (p - 1.0) * std::pow(std::abs(t), p - 2.0); }
};

enum class PotentialFamily { Constant, GaussianWell, GaussianBump };

inline PotentialFamily parse_family(const std::string& tag) {
  if (tag == "constant") return PotentialFamily::Constant;
  if (tag == "gaussian-well") return PotentialFamily::GaussianWell;
  if (tag == "gaussian-bump") return PotentialFamily::GaussianBump;
  throw ConfigError("unknown potential family '" + tag + "'");
}

inline std::string family_name(PotentialFamily f) {
  switch (f) {
    case PotentialFamily::Constant: return "constant";
    case PotentialFamily::GaussianWell: return "gaussian-well";
    case PotentialFamily::GaussianBump: return "gaussian-bump";
  }
  return "?";
}

// gaussian-well:  upper - (upper-lower) exp(-|x|^2/w^2)   (minimum at 0)
// gaussian-bump:  lower + (upper-lower) exp(-|x|^2/w^2)   (maximum at 0)
// constant:       lower (== upper)
struct PotentialSpec {
  PotentialFamily family = PotentialFamily::Constant;
  double lower = 1.0;
  double upper = 1.0;
  double width = 1.0;

  static PotentialSpec constant(double v) { return {PotentialFamily::Constant, v, v, 1.0}; }
  static PotentialSpec gaussian_well(double lo, double hi, double w) {
    return {PotentialFamily::GaussianWell, lo, hi, w};
  }
  static PotentialSpec gaussian_bump(double lo, double hi, double w) {
    return {PotentialFamily::GaussianBump, lo, hi, w};
  }

  bool varying() const { return family != PotentialFamily::Constant; }

  double value(const Point& x) const {
    if (family == PotentialFamily::Constant) return lower;
    const double e = std::exp(-dot(x, x) / (width * width));
    if (family == PotentialFamily::GaussianWell) return upper - (upper - lower) * e;
    return lower + (upper - lower) * e;
  }

  Point gradient(const Point& x) const {
    if (family == PotentialFamily::Constant) return {0.0, 0.0, 0.0};
    const double e = std::exp(-dot(x, x) / (width * width));
    double c = 2.0 * (upper - lower) * e / (width * width);
    if (family == PotentialFamily::GaussianBump) c = -c;
    return {c * x[0], c * x[1], c * x[2]};
  }
};

// Lambda = B_radius(0) in the original frame.
struct DomainSpec {
  double radius = 1.0;

  // dist(x, Lambda_eps) for rescaled x.
  double dist_rescaled(const Point& x, double eps) const { return std::max(0.0, norm(x) - radius / eps); }
};

// 0 on t <= 0, 1 on t >= 1, logistic in 1/t - 1/(1-t) between; symmetric about 1/2.
inline double smooth_step(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  const double z = 1.0 / t - 1.0 / (1.0 - t);
  return z > 0.0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
}

inline double smooth_step_derivative(double t) {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  const double s = smooth_step(t);
  return s * (1.0 - s) * (1.0 / (t * t) + 1.0 / ((1.0 - t) * (1.0 - t)));
}

inline double chi_eps(const Point& x, double eps, const DomainSpec& dom) {
  return std::pow(eps, -6.0) * smooth_step(dom.dist_rescaled(x, eps));
}

inline Point chi_eps_gradient(const Point& x, double eps, const DomainSpec& dom) {
  const double r = norm(x);
  const double d = dom.dist_rescaled(x, eps);
  if (d <= 0.0 || d >= 1.0 || r == 0.0) return {0.0, 0.0, 0.0};
  const double c = std::pow(eps, -6.0) * smooth_step_derivative(d) / r;
  return {c * x[0], c * x[1], c * x[2]};
}

enum class Assumption { VK1, VK2 };

struct GridSpec {
  int dim = 1;
  int n = 256;
  std::optional<double> half_width;  // default radius/eps + margin
  double margin = 8.0;
};

struct ModelConfig {
  double epsilon = 0.25;
  Nonlinearity nonlinearity;
  PotentialSpec V = PotentialSpec::gaussian_well(0.3, 1.0, 1.0);
  PotentialSpec K = PotentialSpec::constant(1.0);
  DomainSpec domain{3.0};
  double beta = 2.125;
  double sigma = 1e-2;
  bool coupling = false;
  GridSpec grid;
  Assumption assumption = Assumption::VK1;
  std::uint64_t validation_seed = 7;
  int boundary_samples = 256;

  double default_beta() const { return (2.0 + nonlinearity.mu() / 2.0) / 2.0; }
  double box_half_width() const { return grid.half_width.value_or(domain.radius / epsilon + grid.margin); }
  Grid make_grid() const { return Grid::make(grid.dim, grid.n, box_half_width()); }
  double a1() const { return V.lower; }
  double a2() const { return V.upper; }
  // The potential whose gradient drives concentration.
  const PotentialSpec& driving_potential() const { return V.varying() ? V : K; }
  bool both_varying() const { return V.varying() && K.varying(); }
};

// Physical radius of the ball around which tails are measured: U(delta) when
// both potentials vary, otherwise the delta-neighbourhood of the critical set {0}.
inline double concentration_radius(const ModelConfig& cfg, double delta) {
  return cfg.both_varying() ? cfg.domain.radius - delta : delta;
}

struct ValidationCheck {
  std::string name;
  bool passed = true;
  std::string detail;
  std::optional<Point> witness;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  std::optional<double> delta0;
  std::string regime;

  bool ok() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }
  std::string to_string() const {
    std::ostringstream os;
    os << "regime: " << regime << "\n";
    for (const auto& c : checks) {
      os << (c.passed ? "  ok    " : "  FAIL  ") << c.name;
      if (!c.detail.empty()) os << ": " << c.detail;
      if (c.witness) os << " [witness x=(" << (*c.witness)[0] << ", " << (*c.witness)[1] << ", " << (*c.witness)[2] << ")]";
      os << "\n";
    }
    if (delta0)
      os << "delta0: " << *delta0 << "\n";
    else
      os << "delta0: n/a\n";
    os << (ok() ? "PASS" : "FAIL") << "\n";
    return os.str();
  }
};

namespace detail {

// Unit directions covering S^{dim-1}: structured set plus seeded random draws.
inline std::vector<Point> sample_directions(int dim, int count, std::uint64_t seed) {
  std::vector<Point> dirs;
  if (dim == 1) return {{1.0, 0.0, 0.0}, {-1.0, 0.0, 0.0}};
  if (dim == 2) {
    for (int i = 0; i < count; ++i) {
      const double a = 2.0 * M_PI * i / count;
      dirs.push_back({std::cos(a), std::sin(a), 0.0});
    }
  } else {
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < count; ++i) {
      const double z = 1.0 - 2.0 * (i + 0.5) / count;
      const double r = std::sqrt(1.0 - z * z);
      dirs.push_back({r * std::cos(golden * i), r * std::sin(golden * i), z});
    }
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  for (int i = 0; i < count / 4; ++i) {
    Point p{g(rng), g(rng), dim == 3 ? g(rng) : 0.0};
    const double nr = norm(p);
    if (nr == 0.0) continue;
    dirs.push_back({p[0] / nr, p[1] / nr, p[2] / nr});
  }
  return dirs;
}

inline Point scaled(const Point& d, double r) { return {r * d[0], r * d[1], r * d[2]}; }

// max of grad K . grad V over the shell radius-delta <= |x| <= radius+delta.
inline double shell_sup(const ModelConfig& cfg, const std::vector<Point>& dirs, double delta) {
  const double r0 = cfg.domain.radius;
  const int nr = 65;
  double sup = -INFINITY;
  for (int j = 0; j < nr; ++j) {
    const double r = std::max(0.0, r0 - delta) + (2.0 * delta) * j / (nr - 1);
    for (const auto& d : dirs) {
      const Point x = scaled(d, r);
      sup = std::max(sup, dot(cfg.K.gradient(x), cfg.V.gradient(x)));
    }
  }
  return sup;
}

inline void check_potential(ValidationReport& rep, const std::string& label, const PotentialSpec& P,
                            const ModelConfig& cfg) {
  ValidationCheck c{label + " bounds", true, "", std::nullopt};
  std::ostringstream os;
  if (!(P.lower > 0.0)) {
    c.passed = false;
    os << "lower bound must be positive (got " << P.lower << ")";
  } else if (P.varying() && !(P.lower < P.upper)) {
    c.passed = false;
    os << "need lower < upper (got " << P.lower << ", " << P.upper << ")";
  } else if (P.varying() && !(P.width > 0.0)) {
    c.passed = false;
    os << "width must be positive";
  } else {
    try {
      const Grid g = cfg.make_grid();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const Point x = scaled(g.point(i), cfg.epsilon);
        const double v = P.value(x);
        if (v < P.lower || v > P.upper) {
          c.passed = false;
          c.witness = x;
          os << "value " << v << " outside [" << P.lower << ", " << P.upper << "]";
          break;
        }
      }
    } catch (const ConfigError&) {
      // reported by the grid check
    }
    if (c.passed) os << "[" << P.lower << ", " << P.upper << "] on grid";
  }
  c.detail = os.str();
  rep.checks.push_back(c);
}

template <class Pred>
ValidationCheck boundary_check(const std::string& name, const ModelConfig& cfg, const std::vector<Point>& dirs,
                               Pred&& pred) {
  ValidationCheck c{name, true, "", std::nullopt};
  double worst = INFINITY;
  for (const auto& d : dirs) {
    const Point x = scaled(d, cfg.domain.radius);
    const double v = pred(x, d);
    worst = std::min(worst, v);
    if (!(v > 0.0) && c.passed) {
      c.passed = false;
      c.witness = x;
    }
  }
  std::ostringstream os;
  os << "min margin " << worst << " over " << dirs.size() << " boundary samples";
  c.detail = os.str();
  return c;
}

}  // namespace detail

inline ValidationReport validate_assumptions(const ModelConfig& cfg) {
  ValidationReport rep;
  auto add = [&](const std::string& name, bool ok, const std::string& detail) {
    rep.checks.push_back({name, ok, detail, std::nullopt});
  };
  const double p = cfg.nonlinearity.p;
  const double mu = cfg.nonlinearity.mu();
  {
    std::ostringstream os;
    os << "p = " << p << ", need 4 < p < 6";
    add("p range", p > 4.0 && p < 6.0, os.str());
  }
  {
    std::ostringstream os;
    os << "mu = " << mu << ", need mu > 4";
    add("mu range", mu > 4.0, os.str());
  }
  {
    std::ostringstream os;
    os << "beta = " << cfg.beta << ", need 2 < beta < mu/2 = " << mu / 2.0;
    add("β range", cfg.beta > 2.0 && cfg.beta < mu / 2.0, os.str());
  }
  add("σ positive", cfg.sigma > 0.0, "sigma = " + std::to_string(cfg.sigma));
  add("ε positive", cfg.epsilon > 0.0, "eps = " + std::to_string(cfg.epsilon));
  add("Λ radius", cfg.domain.radius > 0.0, "r = " + std::to_string(cfg.domain.radius));

  bool grid_ok = true;
  try {
    (void)cfg.make_grid();
    add("grid", true, "dim=" + std::to_string(cfg.grid.dim) + " n=" + std::to_string(cfg.grid.n));
  } catch (const ConfigError& e) {
    grid_ok = false;
    add("grid", false, e.what());
  }
  add("coupling", !cfg.coupling || cfg.grid.dim == 3,
      cfg.coupling ? "Poisson coupling requires dim = 3" : "off");
  if (cfg.epsilon > 0.0) {
    const double need = cfg.domain.radius / cfg.epsilon + cfg.grid.margin;
    std::ostringstream os;
    os << "L = " << cfg.box_half_width() << ", need >= r/eps + margin = " << need;
    add("box size", cfg.box_half_width() >= need * (1.0 - 1e-12), os.str());
  }
  if (grid_ok && cfg.epsilon > 0.0) {
    detail::check_potential(rep, "V", cfg.V, cfg);
    detail::check_potential(rep, "K", cfg.K, cfg);
  }

  const auto dirs = detail::sample_directions(cfg.grid.dim, cfg.boundary_samples, cfg.validation_seed);
  auto kv = [&](const Point& x, const Point&) { return -dot(cfg.K.gradient(x), cfg.V.gradient(x)); };
  if (cfg.assumption == Assumption::VK1) {
    rep.regime = cfg.K.varying() ? "VK1: V and K vary" : "VK1 with constant K: concentration at critical points of V";
    rep.checks.push_back(detail::boundary_check("n·∇V > 0 on ∂Λ", cfg, dirs, [&](const Point& x, const Point& d) {
      return dot(d, cfg.V.gradient(x));
    }));
    if (cfg.K.varying()) rep.checks.push_back(detail::boundary_check("∇K·∇V < 0 on ∂Λ", cfg, dirs, kv));
  } else {
    rep.regime = cfg.V.varying() ? "VK2: V and K vary" : "VK2 with constant V: concentration at critical points of K";
    rep.checks.push_back(detail::boundary_check("n·∇K < 0 on ∂Λ", cfg, dirs, [&](const Point& x, const Point& d) {
      return -dot(d, cfg.K.gradient(x));
    }));
    if (cfg.V.varying()) rep.checks.push_back(detail::boundary_check("∇K·∇V < 0 on ∂Λ", cfg, dirs, kv));
  }

  if (cfg.both_varying() && cfg.domain.radius > 0.0) {
    // Largest delta with sup over the shell of grad K . grad V < 0.
    double lo = 0.0, hi = cfg.domain.radius;
    if (detail::shell_sup(cfg, dirs, 1e-9 * hi) < 0.0) {
      for (int it = 0; it < 50; ++it) {
        const double mid = 0.5 * (lo + hi);
        (detail::shell_sup(cfg, dirs, mid) < 0.0 ? lo : hi) = mid;
      }
      rep.delta0 = lo;
      add("shell sup ∇K·∇V < 0", lo > 0.0, "delta0 = " + std::to_string(lo));
    } else {
      add("shell sup ∇K·∇V < 0", false, "no admissible delta0");
    }
  }
  return rep;
}

}  // namespace nodalflow
