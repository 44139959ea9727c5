#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "spherepos/experiment.hpp"

using namespace spherepos;

namespace {

ExperimentSpec small_spec(double factor = 1.0, int trials = 40) {
  ExperimentSpec spec;
  spec.user_altitude_factor = factor;
  spec.path_steps = 20;
  spec.trials_per_step = trials;
  spec.rng_seed = 2024;
  return spec;
}

std::string csv_of(const ExperimentSpec& spec) {
  std::ostringstream out;
  write_records(run_experiment(spec), spec.noise_sigma, spec.rng_seed, out);
  return out.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

const ExperimentRecord& record(const std::vector<ExperimentRecord>& recs, int step, Method m) {
  for (const auto& r : recs) {
    if (r.step_index == step && r.method == m) return r;
  }
  throw std::logic_error("missing record");
}

}  // namespace

TEST(ExperimentSpecJson, RoundTripAndDefaults) {
  ExperimentSpec spec;
  spec.sphere = {Vec3(1, 2, 3), 7000.0};
  spec.num_satellites = 6;
  spec.user_altitude_factor = 1.001;
  spec.rng_seed = 99;
  const nlohmann::json j = spec;
  const auto back = j.get<ExperimentSpec>();
  EXPECT_EQ(back.sphere.center, spec.sphere.center);
  EXPECT_EQ(back.sphere.radius, 7000.0);
  EXPECT_EQ(back.num_satellites, 6);
  EXPECT_EQ(back.user_altitude_factor, 1.001);
  EXPECT_EQ(back.rng_seed, 99u);

  const auto partial = nlohmann::json::parse(R"({"rng_seed": 5})").get<ExperimentSpec>();
  EXPECT_EQ(partial.trials_per_step, 200);
  EXPECT_EQ(partial.noise_sigma, 1e-8);
  EXPECT_EQ(partial.path_steps, 50);
}

TEST(ExperimentSpecJson, InvalidSpecsAreRejected) {
  for (auto mutate : std::vector<void (*)(ExperimentSpec&)>{
           [](ExperimentSpec& s) { s.trials_per_step = 0; }, [](ExperimentSpec& s) { s.path_steps = 1; },
           [](ExperimentSpec& s) { s.noise_sigma = -1.0; }, [](ExperimentSpec& s) { s.num_satellites = 3; }}) {
    ExperimentSpec spec;
    mutate(spec);
    try {
      spec.validate();
      FAIL();
    } catch (const SolverError& e) {
      EXPECT_EQ(e.code(), ErrorCode::InvalidInput);
    }
  }
  ExperimentSpec low_orbit;
  low_orbit.orbit_radius = 6000.0;
  EXPECT_THROW(build_path(low_orbit), SolverError);
}

TEST(BuildPath, EndpointsAndOrbit) {
  for (double factor : {1.0, 1.001}) {
    const auto spec = small_spec(factor);
    const auto path = build_path(spec);
    ASSERT_EQ(path.satellites.size(), 20u);
    const auto& last = path.satellites.back();
    for (std::size_t i = 0; i < last.size(); ++i) {
      EXPECT_LT((last[i] - path.bad.observations[i].sat_position).norm(), 1e-9);
    }
    const Vec3 up = path.true_position.normalized();
    for (const auto& sat : path.satellites.front()) EXPECT_GE(sat.dot(up), 0.0);
    for (const auto& step : path.satellites) {
      ASSERT_EQ(step.size(), 5u);
      for (const auto& sat : step) EXPECT_NEAR(sat.norm(), spec.orbit_radius, 1e-9 * spec.orbit_radius);
    }
    EXPECT_NEAR(path.true_position.norm(), 6400.0 * factor, 1e-9 * 6400.0);
    for (std::size_t k = 0; k < path.satellites.size(); ++k) {
      const auto obs = path.observations(k);
      for (const auto& o : obs) {
        EXPECT_NEAR(o.arrival_time, (o.sat_position - path.true_position).norm() + path.true_offset, 1e-9);
      }
    }
  }
}

TEST(BuildPath, LastStepHasTwoSphereSolutions) {
  const auto spec = small_spec();
  const auto path = build_path(spec);
  EXPECT_EQ(solve_on_sphere(path.observations(path.satellites.size() - 1), spec.sphere).size(), 2u);
  EXPECT_EQ(path.parameter(0), 0.0);
  EXPECT_EQ(path.parameter(path.satellites.size() - 1), 1.0);
}

TEST(RunExperiment, NoiselessGenericStepIsExact) {
  auto spec = small_spec(1.0, 5);
  spec.noise_sigma = 0.0;
  const auto recs = run_experiment(spec);
  EXPECT_LT(record(recs, 0, Method::SoS).mean_error_km, 1e-6);
  EXPECT_LT(record(recs, 0, Method::RSoS).mean_error_km, 1e-6);
  EXPECT_LT(record(recs, 0, Method::ILS).mean_error_km, 1e-6);
}

TEST(RunExperiment, RecordInvariants) {
  const auto spec = small_spec(1.0, 10);
  const auto recs = run_experiment(spec);
  ASSERT_EQ(recs.size(), 60u);
  for (const auto& r : recs) {
    EXPECT_GE(r.mean_error_km, 0.0);
    EXPECT_GE(r.failed_trials, 0);
    EXPECT_LE(r.num_two_solution_trials, spec.trials_per_step);
    if (r.method == Method::ILS) {
      EXPECT_FALSE(r.mean_pair_distance_km.has_value());
      EXPECT_EQ(r.num_two_solution_trials, 0);
    }
    if (r.mean_pair_distance_km) EXPECT_GE(*r.mean_pair_distance_km, 0.0);
  }
}

TEST(RunExperiment, DeterministicAcrossRunsAndThreadCounts) {
  auto spec = small_spec(1.0, 16);
  const auto first = csv_of(spec);
  EXPECT_EQ(first, csv_of(spec));
  spec.threads = 4;
  EXPECT_EQ(first, csv_of(spec));
  spec.rng_seed += 1;
  EXPECT_NE(first, csv_of(spec));
}

TEST(RunExperiment, OnSphereShape) {
  const auto spec = small_spec(1.0);
  const auto recs = run_experiment(spec);
  const int last = spec.path_steps - 1;
  for (int k = 0; k < spec.path_steps; ++k) {
    EXPECT_LT(record(recs, k, Method::SoS).mean_error_km, 1e-3) << k;
    EXPECT_LT(record(recs, k, Method::RSoS).mean_error_km, 1e-3) << k;
  }
  EXPECT_GT(record(recs, last, Method::ILS).mean_error_km, 1.0);
  EXPECT_LT(record(recs, last, Method::RSoS).mean_error_km, record(recs, last, Method::ILS).mean_error_km);
  EXPECT_EQ(record(recs, last, Method::SoS).num_two_solution_trials, spec.trials_per_step);
}

TEST(RunExperiment, AboveSphereShape) {
  const auto spec = small_spec(1.001);
  const auto recs = run_experiment(spec);
  const double dedup = default_dedup_threshold<3>(spec.sphere);
  for (int k = 0; k < spec.path_steps; ++k) {
    EXPECT_LT(record(recs, k, Method::RSoS).mean_error_km, record(recs, k, Method::SoS).mean_error_km) << k;
  }
  const auto& first = record(recs, 0, Method::RSoS);
  ASSERT_TRUE(first.mean_pair_distance_km.has_value());
  EXPECT_LT(*first.mean_pair_distance_km, dedup);
  const auto& last = record(recs, spec.path_steps - 1, Method::RSoS);
  ASSERT_TRUE(last.mean_pair_distance_km.has_value());
  EXPECT_GT(*last.mean_pair_distance_km, dedup);
}

TEST(WriteRecords, HeaderOnlyForEmptyList) {
  std::ostringstream out;
  write_records({}, 1e-8, 3, out);
  EXPECT_EQ(out.str(), std::string(kCsvHeader) + "\n");
}

TEST(WriteRecords, IlsRowHasEmptyPairDistance) {
  ExperimentRecord ils{3, Method::ILS, 1.25e-7, std::nullopt, 0, 2};
  ExperimentRecord rsos{3, Method::RSoS, 2.5e-7, 0.5, 7, 0};
  std::ostringstream out;
  write_records({ils, rsos}, 1e-8, 42, out);
  const auto lines = lines_of(out.str());
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[1], "3,ILS,1.25e-07,,0,2,1e-08,42");
  EXPECT_EQ(lines[2], "3,RSoS,2.5e-07,0.5,7,0,1e-08,42");
}

TEST(WriteRecords, FullRunRowCountAndFile) {
  const auto spec = small_spec(1.0, 3);
  const auto recs = run_experiment(spec);
  const auto file = std::filesystem::temp_directory_path() / "spherepos_records_test.csv";
  write_records(recs, spec.noise_sigma, spec.rng_seed, file);
  std::ifstream in(file);
  std::stringstream buf;
  buf << in.rdbuf();
  EXPECT_EQ(lines_of(buf.str()).size(), static_cast<std::size_t>(spec.path_steps * 3 + 1));
  std::filesystem::remove(file);
}

TEST(WriteRecords, UnwritableDestinationNamesPath) {
  try {
    write_records({}, 1e-8, 1, std::filesystem::path("/nonexistent-dir/out.csv"));
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent-dir/out.csv"), std::string::npos);
  }
}
