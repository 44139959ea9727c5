#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "commands.hpp"
#include "test_support.hpp"

using namespace spherepos;
using namespace spherepos::cli;
namespace fs = std::filesystem;

namespace {

const fs::path kData = SPHEREPOS_DATA_DIR;

struct Run {
  int code;
  std::string out;
  std::string err;
};

template <typename Fn>
Run capture(bool json, Fn&& fn) {
  std::ostringstream out, err;
  const int code = fn(Output{out, err, json});
  return {code, out.str(), err.str()};
}

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("spherepos_cli_" + std::to_string(std::random_device{}()))) {
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path write_scenario(const TempDir& dir, const std::string& name, const Scenario& s) {
  const auto p = dir / name;
  write_text(p, scenario_to_json(s).dump());
  return p;
}

Scenario generic_scenario(std::uint64_t seed, int m) {
  std::mt19937_64 rng(seed);
  const auto scene = spherepos::testing::gps_scene(rng, m);
  Scenario s;
  s.sphere = scene.sphere;
  s.observations = scene.observations;
  s.truth = ScenarioTruth{{scene.user, scene.offset}, {}};
  return s;
}

}  // namespace

TEST(ScenarioIo, RoundTrip) {
  auto s = generic_scenario(1, 5);
  s.truth->alternates.push_back({Vec3(1, 2, 3), -4.0});
  const auto back = scenario_from_json(scenario_to_json(s));
  ASSERT_EQ(back.observations.size(), 5u);
  EXPECT_EQ(back.observations[2].sat_position, s.observations[2].sat_position);
  EXPECT_EQ(back.observations[2].arrival_time, s.observations[2].arrival_time);
  ASSERT_TRUE(back.truth.has_value());
  EXPECT_EQ(back.truth->primary.position, s.truth->primary.position);
  ASSERT_EQ(back.truth->alternates.size(), 1u);
  EXPECT_EQ(back.truth->alternates[0].offset, -4.0);
}

TEST(ScenarioIo, SchemaViolationsAreInputErrors) {
  for (const char* text : {R"([])", R"({"observations": []})",
                           R"({"sphere": {"center": [0, 0], "radius": 1}, "observations": []})",
                           R"({"sphere": {"center": [0, 0, 0], "radius": -1}, "observations": []})",
                           R"({"sphere": {"center": [0, 0, 0], "radius": 1}, "observations": [{"position": [1, 2, 3]}]})"}) {
    try {
      scenario_from_json(nlohmann::json::parse(text));
      FAIL() << text;
    } catch (const SolverError& e) {
      EXPECT_EQ(e.code(), ErrorCode::InvalidInput) << text;
    }
  }
}

TEST(CmdSolve3, ExampleRoots) {
  const auto run = capture(true, [](const Output& io) { return cmd_solve3(kData / "example_three_sat.json", false, io); });
  ASSERT_EQ(run.code, kExitOk) << run.err;
  const auto j = nlohmann::json::parse(run.out);
  const auto roots = j.at("roots").get<std::vector<double>>();
  const std::vector<double> expected{-11.8922, -11.7298, -10.4779, -10.4216};
  ASSERT_EQ(roots.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(roots[i], expected[i], 1e-3);
  EXPECT_EQ(j.at("solutions").size(), 4u);

  const auto text = capture(false, [](const Output& io) { return cmd_solve3(kData / "example_three_sat.json", false, io); });
  EXPECT_NE(text.out.find("-11.8922"), std::string::npos);
}

TEST(CmdSolve3, WrongArityIsUsageError) {
  TempDir dir;
  const auto file = write_scenario(dir, "four.json", generic_scenario(2, 4));
  const auto run = capture(false, [&](const Output& io) { return cmd_solve3(file, false, io); });
  EXPECT_EQ(run.code, kExitInput);
}

TEST(CmdSolve3, CollinearSatellitesAreDomainError) {
  TempDir dir;
  Scenario s;
  s.sphere = {Vec3::Zero(), 1.0};
  for (int i = 0; i < 3; ++i) s.observations.push_back({Vec3(2.0 + i, 2.0 + i, 2.0 + i), 5.0 + i});
  const auto file = write_scenario(dir, "collinear.json", s);
  const auto run = capture(false, [&](const Output& io) { return cmd_solve3(file, false, io); });
  EXPECT_EQ(run.code, kExitDomain);
  EXPECT_NE(run.err.find("CollinearSatellites"), std::string::npos);
}

TEST(CmdSolve, MissingFileAndBadMethod) {
  EXPECT_EQ(capture(false, [](const Output& io) { return cmd_solve("/nonexistent.json", "sos", 20, io); }).code,
            kExitInput);
  EXPECT_EQ(capture(false, [](const Output& io) { return cmd_solve(kData / "example_three_sat.json", "xyz", 20, io); })
                .code,
            kExitInput);
}

TEST(CmdSolve, GenericScenarioRsosAndIls) {
  TempDir dir;
  const auto s = generic_scenario(3, 6);
  const auto file = write_scenario(dir, "generic.json", s);
  const auto rsos = capture(true, [&](const Output& io) { return cmd_solve(file, "rsos", 20, io); });
  ASSERT_EQ(rsos.code, kExitOk) << rsos.err;
  const auto jr = nlohmann::json::parse(rsos.out);
  ASSERT_EQ(jr.at("solutions").size(), 1u);
  EXPECT_EQ(jr.at("ambiguity"), "Unique");

  const auto ils = capture(true, [&](const Output& io) { return cmd_solve(file, "ils", 20, io); });
  ASSERT_EQ(ils.code, kExitOk) << ils.err;
  const auto ji = nlohmann::json::parse(ils.out);
  ASSERT_EQ(ji.at("solutions").size(), 1u);
  EXPECT_LT(ji.at("solutions")[0].at("max_residual").get<double>(), 1e-9);
}

TEST(CmdSolve, CoplanarSatellitesAreDomainError) {
  TempDir dir;
  Scenario s;
  s.sphere = {Vec3::Zero(), 6400.0};
  for (const Vec3& p : {Vec3(20000, 0, 0), Vec3(0, 20000, 0), Vec3(-20000, 0, 0), Vec3(0, -20000, 0)}) {
    s.observations.push_back({p, (p - Vec3(0, 0, 6400)).norm()});
  }
  const auto file = write_scenario(dir, "coplanar.json", s);
  const auto run = capture(false, [&](const Output& io) { return cmd_solve(file, "sos", 20, io); });
  EXPECT_EQ(run.code, kExitDomain);
  EXPECT_NE(run.err.find("RankDeficient"), std::string::npos);
}

TEST(CmdSolve, JsonReportResidualsRoundTrip) {
  TempDir dir;
  const auto s = generic_scenario(4, 5);
  const auto file = write_scenario(dir, "rt.json", s);
  for (const char* method : {"sos", "ils", "rsos"}) {
    const auto run = capture(true, [&](const Output& io) { return cmd_solve(file, method, 20, io); });
    ASSERT_EQ(run.code, kExitOk);
    for (const auto& sol : nlohmann::json::parse(run.out).at("solutions")) {
      const auto p = sol.at("position").get<std::vector<double>>();
      const auto rep = residuals<3>(Vec3(p[0], p[1], p[2]), sol.at("offset").get<double>(), s.observations);
      EXPECT_EQ(rep.max_residual, sol.at("max_residual").get<double>()) << method;
    }
  }
}

TEST(CmdGenBadConfig, RoundTripThroughSos) {
  TempDir dir;
  BadConfigFlags flags;
  flags.seed = 11;
  flags.out_file = dir / "bad.json";
  ASSERT_EQ(capture(false, [&](const Output& io) { return cmd_gen_bad_config(flags, io); }).code, kExitOk);
  const auto scenario = load_scenario(*flags.out_file);
  ASSERT_TRUE(scenario.truth.has_value());
  EXPECT_EQ(scenario.truth->alternates.size(), 1u);

  const auto run = capture(true, [&](const Output& io) { return cmd_solve(*flags.out_file, "sos", 20, io); });
  ASSERT_EQ(run.code, kExitOk) << run.err;
  const auto j = nlohmann::json::parse(run.out);
  EXPECT_EQ(j.at("solutions").size(), 2u);
  EXPECT_EQ(j.at("ambiguity"), "PossiblyTwo");

  const auto text = capture(false, [&](const Output& io) { return cmd_solve(*flags.out_file, "sos", 20, io); });
  EXPECT_NE(text.out.find("PossiblyTwo"), std::string::npos);
  EXPECT_NE(text.out.find("solutions: 2"), std::string::npos);
}

TEST(CmdGenBadConfig, DeterministicAndValidated) {
  TempDir dir;
  BadConfigFlags flags;
  flags.seed = 5;
  flags.out_file = dir / "a.json";
  capture(false, [&](const Output& io) { return cmd_gen_bad_config(flags, io); });
  flags.out_file = dir / "b.json";
  capture(false, [&](const Output& io) { return cmd_gen_bad_config(flags, io); });
  EXPECT_EQ(read_text(dir / "a.json"), read_text(dir / "b.json"));

  flags.num_sats = 3;
  EXPECT_EQ(capture(false, [&](const Output& io) { return cmd_gen_bad_config(flags, io); }).code, kExitInput);
  flags.num_sats = 5;
  flags.orbit_radius = 1000.0;
  EXPECT_EQ(capture(false, [&](const Output& io) { return cmd_gen_bad_config(flags, io); }).code, kExitDomain);
}

TEST(CmdExperiment, SmallSpecWritesCsv) {
  TempDir dir;
  write_text(dir / "spec.json", R"({"path_steps": 6, "trials_per_step": 4, "rng_seed": 3})");
  const auto run = capture(false, [&](const Output& io) {
    return cmd_experiment(dir / "spec.json", dir / "out.csv", std::nullopt, std::nullopt, io);
  });
  ASSERT_EQ(run.code, kExitOk) << run.err;
  std::istringstream csv(read_text(dir / "out.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, kCsvHeader);
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 18);
  EXPECT_NE(run.out.find("RSoS"), std::string::npos);
}

TEST(CmdExperiment, SeedOverrideChangesOutput) {
  TempDir dir;
  write_text(dir / "spec.json", R"({"path_steps": 3, "trials_per_step": 3, "rng_seed": 3})");
  auto go = [&](std::optional<std::uint64_t> seed, const std::string& out) {
    return capture(false, [&](const Output& io) {
      return cmd_experiment(dir / "spec.json", dir / out, seed, std::nullopt, io);
    });
  };
  go(std::nullopt, "a.csv");
  go(3, "b.csv");
  go(4, "c.csv");
  EXPECT_EQ(read_text(dir / "a.csv"), read_text(dir / "b.csv"));
  EXPECT_NE(read_text(dir / "a.csv"), read_text(dir / "c.csv"));
}

TEST(CmdExperiment, MalformedAndInfeasibleSpecs) {
  TempDir dir;
  write_text(dir / "broken.json", "{\"path_steps\": ");
  const auto broken = capture(false, [&](const Output& io) {
    return cmd_experiment(dir / "broken.json", dir / "out.csv", std::nullopt, std::nullopt, io);
  });
  EXPECT_EQ(broken.code, kExitInput);
  EXPECT_NE(broken.err.find("byte"), std::string::npos);

  write_text(dir / "infeasible.json", R"({"orbit_radius": 5000})");
  const auto infeasible = capture(false, [&](const Output& io) {
    return cmd_experiment(dir / "infeasible.json", dir / "out.csv", std::nullopt, std::nullopt, io);
  });
  EXPECT_EQ(infeasible.code, kExitDomain);
  EXPECT_FALSE(fs::exists(dir / "out.csv"));
}

TEST(CmdExperiment, BundledAboveSphereSpec) {
  TempDir dir;
  ASSERT_EQ(capture(false, [&](const Output& io) {
              return cmd_experiment(kData / "experiment2.json", dir / "e2.csv", std::nullopt, 2, io);
            }).code,
            kExitOk);
  std::istringstream csv(read_text(dir / "e2.csv"));
  std::string line;
  std::getline(csv, line);
  std::map<int, std::map<std::string, double>> err;
  int rows = 0;
  while (std::getline(csv, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    err[std::stoi(cells[0])][cells[1]] = std::stod(cells[2]);
    ++rows;
  }
  EXPECT_EQ(rows, 150);
  for (const auto& [step, m] : err) EXPECT_LT(m.at("RSoS"), m.at("SoS")) << step;
}
