#include "thinmarket/cli/commands.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <optional>
#include <string>

int main(int argc, char** argv) {
  namespace cli = thinmarket::cli;

  CLI::App app{"Competitive and Nash equilibria of thin CARA-Gaussian risk-sharing markets"};
  app.require_subcommand(1);

  std::string scenario, out, param, grid;
  std::uint64_t samples = 1'000'000, seed = 42;
  std::optional<double> tol_override;

  auto* analyze = app.add_subcommand("analyze", "Write a JSON equilibrium report for a scenario");
  analyze->add_option("--scenario", scenario, "Scenario JSON file")->required();
  analyze->add_option("--out", out, "Report JSON output path")->required();

  auto* sweep = app.add_subcommand("sweep", "Sweep one scenario parameter and write CSV");
  sweep->add_option("--scenario", scenario, "Scenario JSON file")->required();
  sweep->add_option("--param", param, "'<trader>:delta' or '<trader>:cov_es:<k>'")->required();
  sweep->add_option("--grid", grid, "'v1,v2,...', 'lin:a:b:n' or 'log:a:b:n'")->required();
  sweep->add_option("--out", out, "CSV output path")->required();

  auto* validate = app.add_subcommand("validate", "Check the solution against independent oracles");
  validate->add_option("--scenario", scenario, "Scenario JSON file")->required();
  validate->add_option("--samples", samples, "Monte-Carlo sample count")->check(CLI::PositiveNumber);
  validate->add_option("--seed", seed, "Monte-Carlo seed");
  validate->add_option("--tol-override", tol_override, "Solver root tolerance (test hook)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : cli::kInputError;
  }

  if (*analyze) return cli::cmd_analyze(scenario, out);
  if (*sweep) return cli::cmd_sweep(scenario, param, grid, out);
  return cli::cmd_validate(scenario, samples, seed, tol_override);
}
