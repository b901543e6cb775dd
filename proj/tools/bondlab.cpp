#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "bondlab/commands.hpp"
#include "bondlab/error.hpp"
#include "bondlab/scenario.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"bondlab: term-structure simulation, hedging and portfolio optimisation"};
  app.require_subcommand(1);

  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> paths, steps;
  std::optional<std::string> out;
  bool fixed_order = false;

  for (const char* verb : {"simulate", "hedge", "optimize", "hjb", "report"}) {
    CLI::App* sub = app.add_subcommand(verb);
    sub->add_option("--scenario", scenario, "scenario JSON file")->required();
    sub->add_option("--seed", seed, "override simulation.seed");
    sub->add_option("--out", out, "override output.dir");
    sub->add_option("--paths", paths, "override simulation.n_paths");
    sub->add_option("--steps", steps, "override simulation.n_steps");
    sub->add_flag("--fixed-order", fixed_order, "single worker, bitwise-reproducible reductions");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  const std::string verb = app.get_subcommands().front()->get_name();

  bondlab::Overrides ov;
  ov.seed = seed;
  ov.paths = paths;
  ov.steps = steps;
  if (out) ov.out = fs::path(*out);
  ov.fixed_order = fixed_order;

  fs::path error_dir = out ? fs::path(*out) : fs::path();
  try {
    const bondlab::Scenario sc = bondlab::load_scenario(scenario, ov);
    error_dir = sc.output_dir;
    const bondlab::CommandResult r = bondlab::run_command(verb, sc);
    std::cout << r.summary.dump(2) << '\n';
    return 0;
  } catch (const std::exception& e) {
    const auto payload = bondlab::error_payload(e);
    std::cerr << payload.dump(2) << '\n';
    if (!error_dir.empty()) {
      std::error_code ec;
      fs::create_directories(error_dir, ec);
      std::ofstream f(error_dir / "error.json");
      if (f) f << payload.dump(2) << '\n';
    }
    return bondlab::exit_code_for(e);
  }
}
