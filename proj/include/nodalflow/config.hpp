#pragma once
// JSON run configuration. Required keys: epsilon, nonlinearity.p,
// potentials.V, potentials.K, domain.radius, grid.dim, grid.n. Everything else
// has a default; see README for the full schema.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "nodalflow/diagnostics.hpp"
#include "nodalflow/flow.hpp"
#include "nodalflow/minimax.hpp"
#include "nodalflow/model.hpp"

namespace nodalflow {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  ModelConfig model;
  FlowParams flow;
  MinimaxParams minimax;
  DiagnosticParams diagnostics;
};

namespace detail {

using nlohmann::json;

inline const json& require(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw ParseError("missing field '" + path + key + "'");
  return j.at(key);
}

template <class T>
T get_as(const json& v, const std::string& where) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ParseError("field '" + where + "' has the wrong type");
  }
}

template <class T>
T req(const json& j, const std::string& key, const std::string& path) {
  return get_as<T>(require(j, key, path), path + key);
}

template <class T>
void opt(const json& j, const std::string& key, const std::string& path, T& out) {
  if (j.is_object() && j.contains(key)) out = get_as<T>(j.at(key), path + key);
}

inline PotentialSpec parse_potential(const json& j, const std::string& path) {
  if (!j.is_object()) throw ParseError("field '" + path + "' must be an object");
  PotentialSpec p;
  try {
    p.family = parse_family(req<std::string>(j, "family", path + "."));
  } catch (const ConfigError& e) {
    throw ParseError(std::string(e.what()) + " in '" + path + "'");
  }
  if (p.family == PotentialFamily::Constant) {
    p.lower = p.upper = req<double>(j, "value", path + ".");
  } else {
    p.lower = req<double>(j, "lower", path + ".");
    p.upper = req<double>(j, "upper", path + ".");
    p.width = req<double>(j, "width", path + ".");
  }
  return p;
}

inline json potential_json(const PotentialSpec& p) {
  if (p.family == PotentialFamily::Constant) return {{"family", "constant"}, {"value", p.lower}};
  return {{"family", family_name(p.family)}, {"lower", p.lower}, {"upper", p.upper}, {"width", p.width}};
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& j) {
  using detail::opt;
  using detail::req;
  using detail::require;
  if (!j.is_object()) throw ParseError("config root must be an object");
  RunConfig rc;
  ModelConfig& m = rc.model;
  m.epsilon = req<double>(j, "epsilon", "");
  m.nonlinearity.p = req<double>(require(j, "nonlinearity", ""), "p", "nonlinearity.");
  const auto& pots = require(j, "potentials", "");
  m.V = detail::parse_potential(require(pots, "V", "potentials."), "potentials.V");
  m.K = detail::parse_potential(require(pots, "K", "potentials."), "potentials.K");
  m.domain.radius = req<double>(require(j, "domain", ""), "radius", "domain.");
  const auto& grid = require(j, "grid", "");
  m.grid.dim = req<int>(grid, "dim", "grid.");
  m.grid.n = req<int>(grid, "n", "grid.");
  opt(grid, "margin", "grid.", m.grid.margin);
  if (grid.contains("half_width")) m.grid.half_width = detail::get_as<double>(grid.at("half_width"), "grid.half_width");

  m.beta = m.default_beta();
  if (j.contains("penalty")) opt(j.at("penalty"), "beta", "penalty.", m.beta);
  opt(j, "sigma", "", m.sigma);
  m.coupling = m.grid.dim == 3;
  opt(j, "coupling", "", m.coupling);
  std::string assumption = "VK1";
  opt(j, "assumption", "", assumption);
  if (assumption == "VK1")
    m.assumption = Assumption::VK1;
  else if (assumption == "VK2")
    m.assumption = Assumption::VK2;
  else
    throw ParseError("field 'assumption' must be \"VK1\" or \"VK2\"");
  if (j.contains("validation")) {
    const auto& v = j.at("validation");
    opt(v, "seed", "validation.", m.validation_seed);
    opt(v, "boundary_samples", "validation.", m.boundary_samples);
  }

  if (j.contains("flow")) {
    const auto& f = j.at("flow");
    FlowParams& p = rc.flow;
    opt(f, "max_iters", "flow.", p.max_iters);
    if (f.contains("tol")) p.tol = detail::get_as<double>(f.at("tol"), "flow.tol");
    opt(f, "step0", "flow.", p.step0);
    opt(f, "backtrack", "flow.", p.backtrack);
    opt(f, "armijo", "flow.", p.armijo);
    opt(f, "lin_tol", "flow.", p.lin_tol);
    opt(f, "lin_max_iters", "flow.", p.lin_max_iters);
    opt(f, "min_step", "flow.", p.min_step);
    opt(f, "energy_floor", "flow.", p.energy_floor);
    opt(f, "norm_cap", "flow.", p.norm_cap);
    opt(f, "rho_rel", "flow.", p.rho_rel);
    opt(f, "component_rel", "flow.", p.component_rel);
    opt(f, "resolution", "flow.", p.resolution);
    opt(f, "normalize", "flow.", p.normalize);
  }
  if (j.contains("minimax")) {
    const auto& x = j.at("minimax");
    MinimaxParams& p = rc.minimax;
    opt(x, "starts_per_n", "minimax.", p.starts_per_n);
    opt(x, "extra_sizes", "minimax.", p.extra_sizes);
    if (x.contains("R")) p.R = detail::get_as<double>(x.at("R"), "minimax.R");
    opt(x, "bump_radius", "minimax.", p.layout.radius);
    opt(x, "bump_spacing", "minimax.", p.layout.spacing);
    opt(x, "dedup_l2", "minimax.", p.dedup_l2);
    opt(x, "dedup_energy", "minimax.", p.dedup_energy);
  }
  if (j.contains("diagnostics")) {
    const auto& d = j.at("diagnostics");
    DiagnosticParams& p = rc.diagnostics;
    opt(d, "delta", "diagnostics.", p.delta);
    opt(d, "fit_start", "diagnostics.", p.fit_start);
    opt(d, "fit_floor", "diagnostics.", p.fit_floor);
    opt(d, "peak_frac", "diagnostics.", p.peak_frac);
    opt(d, "window", "diagnostics.", p.window);
    opt(d, "exterior_delta", "diagnostics.", p.exterior_delta);
  }
  rc.minimax.flow = rc.flow;
  return rc;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot read config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("config '") + path + "': " + e.what());
  }
  return parse_config(j);
}

// Normalized form with every default filled in.
inline nlohmann::json to_json(const RunConfig& rc) {
  using nlohmann::json;
  const ModelConfig& m = rc.model;
  json j;
  j["epsilon"] = m.epsilon;
  j["nonlinearity"] = {{"p", m.nonlinearity.p}};
  j["potentials"] = {{"V", detail::potential_json(m.V)}, {"K", detail::potential_json(m.K)}};
  j["domain"] = {{"radius", m.domain.radius}};
  j["grid"] = {{"dim", m.grid.dim}, {"n", m.grid.n}, {"margin", m.grid.margin}};
  if (m.grid.half_width) j["grid"]["half_width"] = *m.grid.half_width;
  j["penalty"] = {{"beta", m.beta}};
  j["sigma"] = m.sigma;
  j["coupling"] = m.coupling;
  j["assumption"] = m.assumption == Assumption::VK1 ? "VK1" : "VK2";
  j["validation"] = {{"seed", m.validation_seed}, {"boundary_samples", m.boundary_samples}};
  const FlowParams& f = rc.flow;
  j["flow"] = {{"max_iters", f.max_iters}, {"step0", f.step0}, {"backtrack", f.backtrack},
               {"armijo", f.armijo}, {"lin_tol", f.lin_tol}, {"lin_max_iters", f.lin_max_iters},
               {"min_step", f.min_step}, {"energy_floor", f.energy_floor}, {"norm_cap", f.norm_cap},
               {"rho_rel", f.rho_rel}, {"component_rel", f.component_rel}, {"resolution", f.resolution},
               {"normalize", f.normalize}};
  if (f.tol) j["flow"]["tol"] = *f.tol;
  const MinimaxParams& x = rc.minimax;
  j["minimax"] = {{"starts_per_n", x.starts_per_n}, {"extra_sizes", x.extra_sizes},
                  {"bump_radius", x.layout.radius}, {"bump_spacing", x.layout.spacing},
                  {"dedup_l2", x.dedup_l2}, {"dedup_energy", x.dedup_energy}};
  if (x.R) j["minimax"]["R"] = *x.R;
  const DiagnosticParams& d = rc.diagnostics;
  j["diagnostics"] = {{"delta", d.delta}, {"fit_start", d.fit_start}, {"fit_floor", d.fit_floor},
                      {"peak_frac", d.peak_frac}, {"window", d.window}, {"exterior_delta", d.exterior_delta}};
  return j;
}

// FNV-1a 64 over the normalized JSON (keys sorted), as 16 hex digits.
inline std::string config_hash(const RunConfig& rc) {
  const std::string s = to_json(rc).dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace nodalflow
