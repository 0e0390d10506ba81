#pragma once
// Penalized functional in the rescaled frame:
//   Phi(u) = 1/2 |grad u|^2 + 1/2 V(eps x) u^2 + 1/4 phi_u u^2 + Q(u) - K(eps x) F(u)
//   Q(u)   = (int chi u^2 - 1)_+^beta
// and its L2 gradient
//   g = -Lap u + V u + phi_u u + 2 beta kappa chi u - K f(u),  kappa = (mass - 1)_+^(beta-1).

#include <cmath>
#include <cstdio>
#include <memory>
#include <optional>
#include <string>

#include "nodalflow/grid.hpp"
#include "nodalflow/model.hpp"
#include "nodalflow/poisson.hpp"

namespace nodalflow {

// A config bound to its grid, with V(eps x), K(eps x), chi_eps(x) sampled once.
class System {
 public:
  explicit System(ModelConfig cfg) : cfg_(std::move(cfg)), grid_(cfg_.make_grid()) {
    if (cfg_.coupling && grid_.dim != 3) throw ConfigError("Poisson coupling requires dim = 3");
    if (!(cfg_.epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    V_ = Field(grid_);
    K_ = Field(grid_);
    chi_ = Field(grid_);
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      const Point x = grid_.point(i);
      const Point ex{cfg_.epsilon * x[0], cfg_.epsilon * x[1], cfg_.epsilon * x[2]};
      V_[i] = cfg_.V.value(ex);
      K_[i] = cfg_.K.value(ex);
      chi_[i] = chi_eps(x, cfg_.epsilon, cfg_.domain);
    }
    if (cfg_.coupling) poisson_ = FreeSpacePoisson::of(grid_);
  }

  const ModelConfig& config() const { return cfg_; }
  const Grid& grid() const { return grid_; }
  double epsilon() const { return cfg_.epsilon; }
  double a1() const { return cfg_.a1(); }
  bool coupled() const { return cfg_.coupling; }
  const Field& V() const { return V_; }
  const Field& K() const { return K_; }
  const Field& chi() const { return chi_; }
  const Nonlinearity& nonlinearity() const { return cfg_.nonlinearity; }

  // phi_u, or nullopt in reduced mode.
  std::optional<Field> phi(const Field& u) const {
    if (!poisson_) return std::nullopt;
    return poisson_->potential(squared(u));
  }
  const FreeSpacePoisson* poisson() const { return poisson_.get(); }

 private:
  ModelConfig cfg_;
  Grid grid_;
  Field V_, K_, chi_;
  std::shared_ptr<const FreeSpacePoisson> poisson_;
};

struct PenaltyState {
  double mass = 0.0;
  double q = 0.0;
  double kappa = 0.0;
  double lambda = 0.0;
};

inline PenaltyState penalty_from_mass(double mass, double beta) {
  PenaltyState s;
  s.mass = mass;
  const double excess = std::max(0.0, mass - 1.0);
  if (excess > 0.0) {
    s.q = std::pow(excess, beta);
    s.kappa = std::pow(excess, beta - 1.0);
  }
  s.lambda = 2.0 * beta * s.kappa;
  return s;
}

inline double penalty_mass(const System& sys, const Field& u) {
  const Field& chi = sys.chi();
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += chi[i] * u[i] * u[i];
  return s * u.grid().cell_volume();
}

inline PenaltyState penalty(const System& sys, const Field& u) {
  return penalty_from_mass(penalty_mass(sys, u), sys.config().beta);
}

struct EnergyBreakdown {
  double kinetic = 0.0;
  double linear = 0.0;
  double nonlocal = 0.0;
  double penalty = 0.0;
  double nonlinear = 0.0;
  double total = 0.0;

  static std::string csv_header() { return "kinetic,linear,nonlocal,penalty,nonlinear,total"; }
  std::string csv_row() const {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", kinetic, linear, nonlocal, penalty,
                  nonlinear, total);
    return buf;
  }
};

inline EnergyBreakdown energy(const System& sys, const Field& u) {
  if (!(u.grid() == sys.grid())) throw std::invalid_argument("grid mismatch");
  EnergyBreakdown e;
  const double dv = u.grid().cell_volume();
  const auto& nl = sys.nonlinearity();
  double lin = 0.0, nonlin = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    lin += sys.V()[i] * u[i] * u[i];
    nonlin += sys.K()[i] * nl.F(u[i]);
  }
  e.kinetic = 0.5 * grad_sq(u);
  e.linear = 0.5 * lin * dv;
  e.nonlinear = nonlin * dv;
  if (auto phi = sys.phi(u)) e.nonlocal = nonlocal_energy(u, *phi);
  e.penalty = penalty(sys, u).q;
  e.total = e.kinetic + e.linear + e.nonlocal + e.penalty - e.nonlinear;
  return e;
}

// Strong-form residual; with_penalty = false drops the lambda chi u term.
inline Field gradient(const System& sys, const Field& u, bool with_penalty = true) {
  Field g = laplacian(u);
  g *= -1.0;
  const auto phi = sys.phi(u);
  const double lambda = with_penalty ? penalty(sys, u).lambda : 0.0;
  const auto& nl = sys.nonlinearity();
  for (std::size_t i = 0; i < u.size(); ++i) {
    double pot = sys.V()[i] + lambda * sys.chi()[i];
    if (phi) pot += (*phi)[i];
    g[i] += pot * u[i] - sys.K()[i] * nl.f(u[i]);
  }
  return g;
}

// ||w||_h1 with (-Lap + 1) w = g, i.e. the H^-1 norm of g.
inline double dual_norm(const Field& g) {
  auto sp = Spectral::of(g.grid());
  auto gh = sp->forward(g);
  const auto& k2 = sp->k2();
  return std::sqrt(detail::spectral_pairing(*sp, gh, gh, [&](std::size_t s) { return 1.0 / (1.0 + k2[s]); }));
}

inline double dual_residual(const System& sys, const Field& u, bool with_penalty = true) {
  return dual_norm(gradient(sys, u, with_penalty));
}

}  // namespace nodalflow
