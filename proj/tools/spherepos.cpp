#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "commands.hpp"

using namespace spherepos::cli;

int main(int argc, char** argv) {
  CLI::App app{"Positioning on or near a known sphere from satellite arrival times"};
  app.require_subcommand(1);
  app.fallthrough();

  bool json = false;
  std::optional<std::uint64_t> seed;
  app.add_flag("--json", json, "Machine-readable JSON output");
  app.add_option("--seed", seed, "Random seed (generator and experiment)");

  std::string scenario_file;
  bool strict_sign = false;
  auto* solve3 = app.add_subcommand("solve3", "Exact solutions from 3 satellites and a sphere");
  solve3->add_option("scenario", scenario_file, "Scenario JSON file")->required();
  solve3->add_flag("--strict-sign", strict_sign, "Drop solutions with arrival time before the offset");

  std::string method = "sos";
  int iterations = 20;
  auto* solve = app.add_subcommand("solve", "Solve with 4 or more satellites");
  solve->add_option("scenario", scenario_file, "Scenario JSON file")->required();
  solve->add_option("--method", method, "sos, ils or rsos")
      ->check(CLI::IsMember({"sos", "ils", "rsos"}))
      ->capture_default_str();
  solve->add_option("--iterations", iterations, "Gauss-Newton iterations")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  BadConfigFlags bad;
  std::string bad_out;
  auto* gen = app.add_subcommand("gen-bad-config", "Generate a configuration with two solutions on the sphere");
  gen->add_option("--sphere-radius", bad.sphere_radius, "User sphere radius (km)")->capture_default_str();
  gen->add_option("--orbit-radius", bad.orbit_radius, "Satellite orbit radius (km)")->capture_default_str();
  gen->add_option("--num-sats", bad.num_sats, "Number of satellites")->capture_default_str();
  gen->add_option("--out", bad_out, "Output scenario file (default: stdout)");

  std::string spec_file, csv_file;
  std::optional<int> threads;
  auto* experiment = app.add_subcommand("experiment", "Run the path experiment and write a CSV");
  experiment->add_option("spec", spec_file, "Experiment spec JSON")->required();
  experiment->add_option("csv", csv_file, "Output CSV")->required();
  experiment->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  const Output io{std::cout, std::cerr, json};
  if (*solve3) return cmd_solve3(scenario_file, strict_sign, io);
  if (*solve) return cmd_solve(scenario_file, method, iterations, io);
  if (*gen) {
    if (seed) bad.seed = *seed;
    if (!bad_out.empty()) bad.out_file = bad_out;
    return cmd_gen_bad_config(bad, io);
  }
  return cmd_experiment(spec_file, csv_file, seed, threads, io);
}
