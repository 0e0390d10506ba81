#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "nodalflow/app.hpp"

int main(int argc, char** argv) {
  namespace app = nodalflow::app;
  CLI::App cli{"Sign-changing solutions of a penalized Schrodinger-Poisson system"};
  cli.require_subcommand(1);

  std::string config;
  int k = 1;
  std::uint64_t seed = 1;
  std::string out = "out";
  std::string eps;

  auto* validate = cli.add_subcommand("validate", "check model hypotheses for a config");
  validate->add_option("--config", config, "config file (JSON)")->required();

  auto* solve = cli.add_subcommand("solve", "find k sign-changing solutions and write reports");
  solve->add_option("--config", config, "config file (JSON)")->required();
  solve->add_option("--k", k, "number of distinct solutions");
  solve->add_option("--seed", seed, "seed for start directions");
  solve->add_option("--out", out, "output directory");

  auto* sweep = cli.add_subcommand("sweep", "solve across a decreasing list of eps");
  sweep->add_option("--config", config, "config file (JSON)")->required();
  sweep->add_option("--eps", eps, "comma-separated eps values, decreasing")->required();
  sweep->add_option("--k", k, "number of distinct solutions per eps");
  sweep->add_option("--seed", seed, "seed for start directions");
  sweep->add_option("--out", out, "output directory");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return cli.exit(e);
  } catch (const CLI::ParseError& e) {
    cli.exit(e);
    return app::kUsage;
  }

  try {
    if (*validate) return app::cmd_validate(config, std::cout, std::cerr);
    if (*solve) return app::cmd_solve(config, k, seed, out, std::cout, std::cerr);
    std::vector<double> list;
    try {
      list = app::parse_eps_list(eps);
    } catch (const std::exception&) {
      std::cerr << "usage error: cannot parse --eps '" << eps << "'\n";
      return app::kUsage;
    }
    return app::cmd_sweep(config, list, k, seed, out, std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return app::kNoSolution;
  }
}
