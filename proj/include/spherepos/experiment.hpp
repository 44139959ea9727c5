#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "spherepos/core.hpp"
#include "spherepos/error.hpp"
#include "spherepos/quadric.hpp"
#include "spherepos/refine.hpp"
#include "spherepos/types.hpp"

// Monte-Carlo comparison of ILS, SoS and RSoS along a path of satellite
// configurations that ends in a two-solution ("bad") configuration.

namespace spherepos {

struct ExperimentSpec {
  SphereConstraint3 sphere{Vec3::Zero(), 6400.0};
  double orbit_radius = 26400.0;
  int num_satellites = 5;
  int path_steps = 50;
  int trials_per_step = 200;
  double noise_sigma = 1e-8;
  // User sphere radius relative to `sphere`; SoS always assumes `sphere`.
  double user_altitude_factor = 1.0;
  std::uint64_t rng_seed = 1;
  int iterations = 20;
  int threads = 1;

  void validate() const {
    spherepos::validate(sphere);
    auto fail = [](const std::string& what) { throw SolverError(ErrorCode::InvalidInput, what); };
    if (trials_per_step < 1) fail("trials_per_step must be >= 1");
    if (path_steps < 2) fail("path_steps must be >= 2");
    if (!(noise_sigma >= 0.0)) fail("noise_sigma must be >= 0");
    if (num_satellites < 4) fail("num_satellites must be >= 4");
    if (iterations < 1) fail("iterations must be >= 1");
    if (threads < 1) fail("threads must be >= 1");
    if (!(user_altitude_factor > 0.0)) fail("user_altitude_factor must be > 0");
    if (!(orbit_radius > sphere.radius * user_altitude_factor)) {
      throw SolverError(ErrorCode::InfeasibleGeometry, "orbit must lie outside the user sphere");
    }
  }
};

inline void to_json(nlohmann::json& j, const ExperimentSpec& s) {
  j = nlohmann::json{{"sphere", {{"center", {s.sphere.center.x(), s.sphere.center.y(), s.sphere.center.z()}},
                                 {"radius", s.sphere.radius}}},
                     {"orbit_radius", s.orbit_radius},
                     {"num_satellites", s.num_satellites},
                     {"path_steps", s.path_steps},
                     {"trials_per_step", s.trials_per_step},
                     {"noise_sigma", s.noise_sigma},
                     {"user_altitude_factor", s.user_altitude_factor},
                     {"rng_seed", s.rng_seed},
                     {"iterations", s.iterations},
                     {"threads", s.threads}};
}

// Missing fields keep their defaults.
inline void from_json(const nlohmann::json& j, ExperimentSpec& s) {
  if (j.contains("sphere")) {
    const auto& sp = j.at("sphere");
    if (sp.contains("center")) {
      const auto c = sp.at("center").get<std::vector<double>>();
      if (c.size() != 3) throw SolverError(ErrorCode::InvalidInput, "sphere.center needs 3 components");
      s.sphere.center = Vec3(c[0], c[1], c[2]);
    }
    if (sp.contains("radius")) s.sphere.radius = sp.at("radius").get<double>();
  }
  auto read = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  read("orbit_radius", s.orbit_radius);
  read("num_satellites", s.num_satellites);
  read("path_steps", s.path_steps);
  read("trials_per_step", s.trials_per_step);
  read("noise_sigma", s.noise_sigma);
  read("user_altitude_factor", s.user_altitude_factor);
  read("rng_seed", s.rng_seed);
  read("iterations", s.iterations);
  read("threads", s.threads);
}

/// Random source for one (seed, stream, step, trial) tuple. Every trial gets
/// its own generator, so results do not depend on execution order.
inline std::mt19937_64 derive_rng(std::uint64_t seed, std::uint32_t stream, std::uint32_t step = 0,
                                  std::uint32_t trial = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream, step,
                    trial};
  return std::mt19937_64(seq);
}

namespace stream {
inline constexpr std::uint32_t kBadConfiguration = 1;
inline constexpr std::uint32_t kRandomConfiguration = 2;
inline constexpr std::uint32_t kNoise = 3;
}  // namespace stream

struct ExperimentPath {
  Vec3 true_position = Vec3::Zero();
  double true_offset = 0.0;
  BadConfiguration<3> bad;
  // satellites[step][i]
  std::vector<std::vector<Vec3>> satellites;

  double parameter(std::size_t step) const {
    return satellites.size() < 2 ? 0.0 : static_cast<double>(step) / static_cast<double>(satellites.size() - 1);
  }

  Observations<3> observations(std::size_t step) const {
    Observations<3> obs;
    for (const auto& s : satellites.at(step)) obs.push_back({s, (s - true_position).norm() + true_offset});
    return obs;
  }
};

namespace detail {

// Order of `from` minimising the summed distance to `to` (exhaustive up to 8
// satellites, greedy beyond).
inline std::vector<std::size_t> match_satellites(const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
  std::vector<std::size_t> perm(from.size());
  std::iota(perm.begin(), perm.end(), 0);
  auto cost = [&](const std::vector<std::size_t>& p) {
    double c = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) c += (from[p[i]] - to[i]).norm();
    return c;
  };
  if (from.size() <= 8) {
    auto best = perm;
    double best_cost = cost(perm);
    while (std::next_permutation(perm.begin(), perm.end())) {
      const double c = cost(perm);
      if (c < best_cost) {
        best_cost = c;
        best = perm;
      }
    }
    return best;
  }
  std::vector<bool> used(from.size(), false);
  for (std::size_t i = 0; i < to.size(); ++i) {
    std::size_t pick = 0;
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < from.size(); ++k) {
      if (!used[k] && (from[k] - to[i]).norm() < d) {
        d = (from[k] - to[i]).norm();
        pick = k;
      }
    }
    used[pick] = true;
    perm[i] = pick;
  }
  return perm;
}

}  // namespace detail

/// Path from a random configuration (hemisphere of the orbit facing the user)
/// to a bad configuration whose foci lie on the user sphere. Intermediate
/// satellites are linear interpolations re-projected radially onto the orbit.
inline ExperimentPath build_path(const ExperimentSpec& spec) {
  spec.validate();
  const SphereConstraint3 user_sphere{spec.sphere.center, spec.sphere.radius * spec.user_altitude_factor};
  BadConfigOptions opts;
  opts.facing_focus_a = true;
  auto bad_rng = derive_rng(spec.rng_seed, stream::kBadConfiguration);
  ExperimentPath path;
  path.bad = generate_bad_configuration<3>(user_sphere, spec.orbit_radius, spec.num_satellites, bad_rng(), opts);
  path.true_position = path.bad.solution_a.position;
  path.true_offset = path.bad.solution_a.offset;

  const Vec3 up = (path.true_position - spec.sphere.center).normalized();
  auto rng = derive_rng(spec.rng_seed, stream::kRandomConfiguration);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Vec3> random_sats;
  while (static_cast<int>(random_sats.size()) < spec.num_satellites) {
    Vec3 d(gauss(rng), gauss(rng), gauss(rng));
    if (d.norm() < 1e-9) continue;
    d.normalize();
    if (d.dot(up) < 0.0) d = -d;
    random_sats.push_back(spec.sphere.center + spec.orbit_radius * d);
  }

  std::vector<Vec3> bad_sats;
  for (const auto& o : path.bad.observations) bad_sats.push_back(o.sat_position);
  const auto perm = detail::match_satellites(random_sats, bad_sats);

  const auto steps = static_cast<std::size_t>(spec.path_steps);
  path.satellites.resize(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const double lambda = static_cast<double>(k) / static_cast<double>(steps - 1);
    for (std::size_t i = 0; i < bad_sats.size(); ++i) {
      const Vec3& from = random_sats[perm[i]];
      const Vec3& to = bad_sats[i];
      Vec3 p;
      if (k == 0) {
        p = from;
      } else if (k + 1 == steps) {
        p = to;
      } else {
        const Vec3 mix = (1.0 - lambda) * from + lambda * to - spec.sphere.center;
        if (mix.norm() < 1e-9 * spec.orbit_radius) {
          throw SolverError(ErrorCode::InfeasibleGeometry, "interpolated satellite passes through the centre");
        }
        p = spec.sphere.center + spec.orbit_radius * mix.normalized();
      }
      path.satellites[k].push_back(p);
    }
  }
  return path;
}

struct ExperimentRecord {
  int step_index = 0;
  Method method = Method::ILS;
  double mean_error_km = 0.0;
  std::optional<double> mean_pair_distance_km;
  int num_two_solution_trials = 0;
  int failed_trials = 0;
};

namespace detail {

struct MethodOutcome {
  double error = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> pair_distance;
  bool two_solutions = false;
};

struct TrialOutcome {
  std::array<MethodOutcome, 3> methods;
};

inline double nearest(const std::vector<Solution3>& sols, const Vec3& truth) {
  double best = std::numeric_limits<double>::quiet_NaN();
  for (const auto& s : sols) {
    const double d = (s.position - truth).norm();
    if (std::isfinite(d) && !(d >= best)) best = d;
  }
  return best;
}

inline TrialOutcome run_trial(const ExperimentSpec& spec, const ExperimentPath& path,
                              const Observations<3>& exact, std::size_t step, std::size_t trial) {
  auto rng = derive_rng(spec.rng_seed, stream::kNoise, static_cast<std::uint32_t>(step),
                        static_cast<std::uint32_t>(trial));
  std::normal_distribution<double> noise(0.0, 1.0);
  Observations<3> obs = exact;
  for (auto& o : obs) o.arrival_time += spec.noise_sigma * noise(rng);

  RefinementConfig cfg;
  cfg.iterations = spec.iterations;
  cfg.dedup_threshold = default_dedup_threshold<3>(spec.sphere);

  TrialOutcome out;
  try {
    out.methods[0].error = nearest(solve_ils(obs, cfg).solutions, path.true_position);
  } catch (const SolverError&) {
  }
  try {
    const auto sos = solve_sos(obs, spec.sphere, cfg, /*keep_all_roots=*/true);
    out.methods[1].error = nearest(sos.solutions, path.true_position);
    out.methods[1].pair_distance = sos.pair_distance;
    out.methods[1].two_solutions = sos.solutions.size() == 2;
  } catch (const SolverError&) {
  }
  try {
    const auto rsos = solve_rsos(obs, spec.sphere, cfg);
    out.methods[2].error = nearest(rsos.solutions, path.true_position);
    out.methods[2].pair_distance = rsos.pair_distance;
    out.methods[2].two_solutions = rsos.solutions.size() == 2;
  } catch (const SolverError&) {
  }
  return out;
}

}  // namespace detail

/// Runs every trial of every path step and aggregates per-method means. A
/// failed solve counts as a missing sample. Output is identical for any
/// `threads` value.
inline std::vector<ExperimentRecord> run_experiment(const ExperimentSpec& spec) {
  const ExperimentPath path = build_path(spec);
  const auto trials = static_cast<std::size_t>(spec.trials_per_step);
  constexpr std::array<Method, 3> kMethods{Method::ILS, Method::SoS, Method::RSoS};

  std::vector<ExperimentRecord> records;
  std::vector<detail::TrialOutcome> outcomes(trials);
  for (std::size_t step = 0; step < path.satellites.size(); ++step) {
    const auto exact = path.observations(step);
    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(spec.threads), trials);
    if (workers <= 1) {
      for (std::size_t k = 0; k < trials; ++k) outcomes[k] = detail::run_trial(spec, path, exact, step, k);
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          for (std::size_t k = w; k < trials; k += workers) {
            outcomes[k] = detail::run_trial(spec, path, exact, step, k);
          }
        });
      }
    }

    for (std::size_t mi = 0; mi < kMethods.size(); ++mi) {
      ExperimentRecord rec;
      rec.step_index = static_cast<int>(step);
      rec.method = kMethods[mi];
      double err_sum = 0.0, pair_sum = 0.0;
      int err_n = 0, pair_n = 0;
      for (const auto& o : outcomes) {
        const auto& m = o.methods[mi];
        if (std::isfinite(m.error)) {
          err_sum += m.error;
          ++err_n;
        } else {
          ++rec.failed_trials;
        }
        if (m.pair_distance && std::isfinite(*m.pair_distance)) {
          pair_sum += *m.pair_distance;
          ++pair_n;
        }
        if (m.two_solutions) ++rec.num_two_solution_trials;
      }
      rec.mean_error_km = err_n > 0 ? err_sum / err_n : std::numeric_limits<double>::quiet_NaN();
      if (kMethods[mi] != Method::ILS && pair_n > 0) rec.mean_pair_distance_km = pair_sum / pair_n;
      records.push_back(rec);
    }
  }
  return records;
}

inline constexpr const char* kCsvHeader =
    "step,method,mean_error_km,mean_pair_distance_km,two_solution_trials,failed_trials,sigma,seed";

inline void write_records(const std::vector<ExperimentRecord>& records, double sigma, std::uint64_t seed,
                          std::ostream& out) {
  auto num = [](double v) {
    std::ostringstream s;
    s << std::setprecision(12) << v;
    return s.str();
  };
  out << kCsvHeader << '\n';
  for (const auto& r : records) {
    out << r.step_index << ',' << to_string(r.method) << ',' << num(r.mean_error_km) << ','
        << (r.mean_pair_distance_km ? num(*r.mean_pair_distance_km) : std::string()) << ','
        << r.num_two_solution_trials << ',' << r.failed_trials << ',' << num(sigma) << ',' << seed << '\n';
  }
}

/// Writes the CSV to `destination`; a partially written file is removed on failure.
inline void write_records(const std::vector<ExperimentRecord>& records, double sigma, std::uint64_t seed,
                          const std::filesystem::path& destination) {
  std::ofstream file(destination, std::ios::binary | std::ios::trunc);
  if (!file) throw std::runtime_error("cannot open '" + destination.string() + "' for writing");
  write_records(records, sigma, seed, file);
  file.flush();
  if (!file) {
    file.close();
    std::error_code ec;
    std::filesystem::remove(destination, ec);
    throw std::runtime_error("write to '" + destination.string() + "' failed");
  }
}

}  // namespace spherepos
