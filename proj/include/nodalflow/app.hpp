#pragma once
// validate / solve / sweep commands behind the nodalflow executable.
//
// Exit codes: 0 ok, 1 hypothesis validation failed, 2 parse or usage error,
// 3 no certified solution.
//
// solve writes into OUT:
//   manifest.json                 run metadata, relative paths of every artifact
//   summary.csv                   one row per solution
//   solutions/<j>/field.bin       field dump (see field_io.hpp)
//   solutions/<j>/report.json     SolutionReport
//   solutions/<j>/history.csv     flow history
// sweep writes OUT/eps_<i>/ per epsilon (same layout), OUT/sweep.csv and
// OUT/manifest.json.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nodalflow/config.hpp"
#include "nodalflow/diagnostics.hpp"
#include "nodalflow/energy.hpp"
#include "nodalflow/field_io.hpp"
#include "nodalflow/minimax.hpp"

namespace nodalflow::app {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kInvalid = 1, kUsage = 2, kNoSolution = 3 };

inline int cmd_validate(const std::string& config_path, std::ostream& out, std::ostream& err) {
  RunConfig rc;
  try {
    rc = load_config(config_path);
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kUsage;
  }
  const auto rep = validate_assumptions(rc.model);
  out << rep.to_string();
  return rep.ok() ? kOk : kInvalid;
}

struct SolveOutcome {
  int certified = 0;
  int found = 0;
  bool partial = false;
  std::vector<SolutionReport> reports;
  std::vector<bool> certified_flags;
  std::string error;
};

inline void write_text(const fs::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << s;
}

inline std::string summary_header() {
  return "index,epsilon,energy,penalty_mass,norm_plus,norm_minus,flow_residual,weak_residual,decay_c,decay_r2,"
         "max_peak_dist_critical,max_peak_dist_concentration,pohozaev_residual,certified,field\n";
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Runs the search and writes artifacts into outdir. Throws on internal errors.
inline SolveOutcome run_solve(const RunConfig& rc, int k, std::uint64_t seed, const fs::path& outdir,
                              const std::string& command, const std::string& config_path) {
  const auto t0 = std::chrono::steady_clock::now();
  SolveOutcome oc;
  fs::create_directories(outdir);
  nlohmann::json man;
  man["command"] = command;
  man["config_path"] = config_path;
  man["config_hash"] = config_hash(rc);
  man["seed"] = seed;
  man["k"] = k;
  man["epsilon"] = rc.model.epsilon;
  man["output_dir"] = outdir.string();
  man["solutions"] = nlohmann::json::array();

  std::string summary = summary_header();
  if (k > 0) {
    const System sys(rc.model);
    const auto set = find_solutions(sys, k, rc.minimax, seed);
    oc.partial = set.partial;
    oc.found = static_cast<int>(set.solutions.size());
    man["attempts"] = set.attempts;
    man["log"] = set.log;
    for (std::size_t j = 0; j < set.solutions.size(); ++j) {
      const auto& sol = set.solutions[j];
      const fs::path rel = fs::path("solutions") / std::to_string(j);
      fs::create_directories(outdir / rel);
      write_field((outdir / rel / "field.bin").string(), sol.u, rc.model.epsilon);
      write_text(outdir / rel / "history.csv", history_csv(sol.flow));
      SolutionReport rep = build_report(sys, sol.u, rc.diagnostics, rc.flow);
      rep.field_path = (rel / "field.bin").string();
      write_text(outdir / rel / "report.json", to_json(rep, sys.grid().dim).dump(2) + "\n");
      const double rho_min = rc.flow.rho_rel * h1_norm(sol.u);
      const bool cert = rep.flow_residual < sol.tol && rep.norm_plus >= rho_min && rep.norm_minus >= rho_min &&
                        rep.q_value == 0.0;
      oc.certified += cert ? 1 : 0;
      oc.certified_flags.push_back(cert);
      man["solutions"].push_back({{"index", j},
                                  {"energy", sol.energy},
                                  {"penalty_mass", rep.penalty_mass},
                                  {"norm_plus", rep.norm_plus},
                                  {"norm_minus", rep.norm_minus},
                                  {"residual", rep.flow_residual},
                                  {"weak_residual", rep.weak_residual},
                                  {"tol", sol.tol},
                                  {"basis_size", sol.basis_size},
                                  {"start_index", sol.start_index},
                                  {"iterations", sol.flow.iterations},
                                  {"certified", cert},
                                  {"field", (rel / "field.bin").string()},
                                  {"report", (rel / "report.json").string()},
                                  {"history", (rel / "history.csv").string()}});
      summary += std::to_string(j) + "," + fmt(rc.model.epsilon) + "," + fmt(sol.energy) + "," +
                 fmt(rep.penalty_mass) + "," + fmt(rep.norm_plus) + "," + fmt(rep.norm_minus) + "," +
                 fmt(rep.flow_residual) + "," + fmt(rep.weak_residual) + "," + fmt(rep.decay.c) + "," +
                 fmt(rep.decay.r2) + "," + fmt(rep.max_peak_dist_critical()) + "," +
                 fmt(rep.max_peak_dist_concentration()) + "," +
                 fmt(rep.pohozaev ? rep.pohozaev->residual : NAN) + "," + (cert ? "1" : "0") + "," +
                 (rel / "field.bin").string() + "\n";
      oc.reports.push_back(std::move(rep));
    }
  }
  man["partial"] = oc.partial;
  man["certified"] = oc.certified;
  man["summary"] = "summary.csv";
  man["timing_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_text(outdir / "summary.csv", summary);
  write_text(outdir / "manifest.json", man.dump(2) + "\n");
  return oc;
}

inline int cmd_solve(const std::string& config_path, int k, std::uint64_t seed, const std::string& outdir,
                     std::ostream& out, std::ostream& err) {
  if (k < 0) {
    err << "usage error: --k must be >= 0\n";
    return kUsage;
  }
  RunConfig rc;
  try {
    rc = load_config(config_path);
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kUsage;
  }
  const auto rep = validate_assumptions(rc.model);
  if (!rep.ok()) {
    err << rep.to_string();
    return kInvalid;
  }
  const auto oc = run_solve(rc, k, seed, outdir, "solve", config_path);
  out << "found " << oc.found << " solution(s), " << oc.certified << " certified" << (oc.partial ? " (partial)" : "")
      << "\n";
  for (std::size_t j = 0; j < oc.reports.size(); ++j)
    out << "  [" << j << "] E=" << fmt(oc.reports[j].energy) << " mass=" << oc.reports[j].penalty_mass
        << " residual=" << oc.reports[j].flow_residual << (oc.certified_flags[j] ? " certified" : "") << "\n";
  if (k == 0) return kOk;
  return oc.certified >= 1 ? kOk : kNoSolution;
}

inline std::vector<double> parse_eps_list(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    const double x = std::stod(item, &used);
    if (used != item.size()) throw std::invalid_argument(item);
    v.push_back(x);
  }
  return v;
}

inline int cmd_sweep(const std::string& config_path, const std::vector<double>& eps_list, int k,
                     std::uint64_t seed, const std::string& outdir, std::ostream& out, std::ostream& err) {
  if (eps_list.empty()) {
    err << "usage error: --eps needs at least one value\n";
    return kUsage;
  }
  for (std::size_t i = 1; i < eps_list.size(); ++i)
    if (!(eps_list[i] < eps_list[i - 1])) {
      err << "usage error: --eps must be strictly decreasing\n";
      return kUsage;
    }
  if (k < 0) {
    err << "usage error: --k must be >= 0\n";
    return kUsage;
  }
  RunConfig base;
  try {
    base = load_config(config_path);
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kUsage;
  }
  fs::create_directories(outdir);
  nlohmann::json man;
  man["command"] = "sweep";
  man["config_path"] = config_path;
  man["config_hash"] = config_hash(base);
  man["seed"] = seed;
  man["k"] = k;
  man["runs"] = nlohmann::json::array();
  std::string csv =
      "epsilon,j,energy,penalty_mass,decay_c,decay_r2,max_peak_dist_critical,max_peak_dist_concentration,"
      "exterior_ratio_eps3,certified\n";
  bool all_ok = true;
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    RunConfig rc = base;
    rc.model.epsilon = eps_list[i];
    const std::string sub = "eps_" + std::to_string(i);
    nlohmann::json run{{"epsilon", eps_list[i]}, {"dir", sub}};
    const auto rep = validate_assumptions(rc.model);
    if (!rep.ok()) {
      run["error"] = "validation failed";
      err << "eps=" << eps_list[i] << ": validation failed\n" << rep.to_string();
      all_ok = false;
      man["runs"].push_back(run);
      continue;
    }
    try {
      const auto oc = run_solve(rc, k, seed, fs::path(outdir) / sub, "sweep", config_path);
      run["certified"] = oc.certified;
      run["partial"] = oc.partial;
      run["manifest"] = sub + "/manifest.json";
      for (std::size_t j = 0; j < oc.reports.size(); ++j) {
        const auto& r = oc.reports[j];
        csv += fmt(eps_list[i]) + "," + std::to_string(j) + "," + fmt(r.energy) + "," + fmt(r.penalty_mass) + "," +
               fmt(r.decay.c) + "," + fmt(r.decay.r2) + "," + fmt(r.max_peak_dist_critical()) + "," +
               fmt(r.max_peak_dist_concentration()) + "," + fmt(r.exterior.ratio_eps3) + "," +
               (oc.certified_flags[j] ? "1" : "0") + "\n";
      }
      out << "eps=" << eps_list[i] << ": " << oc.found << " found, " << oc.certified << " certified\n";
      if (k > 0 && oc.certified < 1) all_ok = false;
    } catch (const std::exception& e) {
      run["error"] = e.what();
      err << "eps=" << eps_list[i] << ": " << e.what() << "\n";
      all_ok = false;
    }
    man["runs"].push_back(run);
  }
  man["sweep"] = "sweep.csv";
  write_text(fs::path(outdir) / "sweep.csv", csv);
  write_text(fs::path(outdir) / "manifest.json", man.dump(2) + "\n");
  return all_ok ? kOk : kNoSolution;
}

}  // namespace nodalflow::app
