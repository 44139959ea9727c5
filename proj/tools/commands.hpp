#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "spherepos/core.hpp"
#include "spherepos/experiment.hpp"
#include "spherepos/quadric.hpp"
#include "spherepos/quartic.hpp"
#include "spherepos/refine.hpp"
#include "spherepos/scenario.hpp"
#include "spherepos/three_sat.hpp"

namespace spherepos::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 2;
inline constexpr int kExitInput = 3;

struct Output {
  std::ostream& out;
  std::ostream& err;
  bool json = false;
};

inline std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(12) << v;
  return s.str();
}

inline std::string fmt(const Vec3& v) { return "(" + fmt(v.x()) + ", " + fmt(v.y()) + ", " + fmt(v.z()) + ")"; }

/// Maps exceptions to exit codes: malformed input is 3, solver failures are 2.
template <typename Fn>
int guarded(const Output& io, Fn&& fn) {
  try {
    return fn();
  } catch (const SolverError& e) {
    io.err << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::InvalidInput ? kExitInput : kExitDomain;
  } catch (const nlohmann::json::exception& e) {
    io.err << "error: malformed input: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    io.err << "error: " << e.what() << '\n';
    return kExitDomain;
  }
}

inline nlohmann::json solution_json(const Solution3& s) {
  return {{"position", {s.position.x(), s.position.y(), s.position.z()}},
          {"offset", s.offset},
          {"max_residual", s.max_residual},
          {"satisfies_sign_constraint", s.satisfies_sign_constraint}};
}

inline void print_solutions(std::ostream& out, const std::vector<Solution3>& sols) {
  out << "solutions: " << sols.size() << '\n';
  for (std::size_t i = 0; i < sols.size(); ++i) {
    const auto& s = sols[i];
    out << "  [" << i + 1 << "] position " << fmt(s.position) << " offset " << fmt(s.offset) << " max_residual "
        << fmt(s.max_residual) << " sign_ok " << (s.satisfies_sign_constraint ? "yes" : "no") << '\n';
  }
}

inline int cmd_solve3(const std::filesystem::path& scenario_file, bool strict_sign, const Output& io) {
  return guarded(io, [&] {
    const auto scenario = load_scenario(scenario_file);
    if (scenario.observations.size() != 3) {
      throw SolverError(ErrorCode::InvalidInput,
                        "solve3 needs exactly 3 observations, got " + std::to_string(scenario.observations.size()));
    }
    const auto inputs = make_cayley_menger_inputs<3>(scenario.sphere, scenario.observations);
    const auto poly = extract_quartic(inputs);
    const auto roots = real_roots(poly);
    const auto sols = solve_three_sat(inputs, strict_sign);
    if (io.json) {
      nlohmann::json j{{"command", "solve3"}, {"quartic", poly.coefficients}, {"roots", roots}};
      j["solutions"] = nlohmann::json::array();
      for (const auto& s : sols) j["solutions"].push_back(solution_json(s));
      io.out << j.dump(2) << '\n';
    } else {
      io.out << "quartic coefficients (t^0 .. t^4):";
      for (double c : poly.coefficients) io.out << ' ' << fmt(c);
      io.out << "\nreal roots:";
      for (double r : roots) io.out << ' ' << fmt(r);
      io.out << '\n';
      print_solutions(io.out, sols);
    }
    return kExitOk;
  });
}

inline std::optional<Method> parse_method(const std::string& name) {
  if (name == "sos") return Method::SoS;
  if (name == "ils") return Method::ILS;
  if (name == "rsos") return Method::RSoS;
  return std::nullopt;
}

inline int cmd_solve(const std::filesystem::path& scenario_file, const std::string& method_name, int iterations,
                     const Output& io) {
  return guarded(io, [&] {
    const auto method = parse_method(method_name);
    if (!method) throw SolverError(ErrorCode::InvalidInput, "unknown method '" + method_name + "'");
    const auto scenario = load_scenario(scenario_file);
    validate(scenario.observations, 4);
    RefinementConfig cfg;
    cfg.iterations = iterations;
    cfg.dedup_threshold = default_dedup_threshold<3>(scenario.sphere);

    const auto reduced = reduce(scenario.observations);
    const auto ambiguity = ambiguity_indicator(reduced);
    MethodResult<3> result;
    switch (*method) {
      case Method::SoS: result = solve_sos(scenario.observations, scenario.sphere, cfg); break;
      case Method::ILS: result = solve_ils(scenario.observations, cfg); break;
      case Method::RSoS: result = solve_rsos(scenario.observations, scenario.sphere, cfg); break;
    }

    if (io.json) {
      nlohmann::json j{{"command", "solve"},
                       {"method", to_string(*method)},
                       {"u_norm", reduced.u.norm()},
                       {"ambiguity", to_string(ambiguity)},
                       {"fallback", result.fallback}};
      j["solutions"] = nlohmann::json::array();
      for (const auto& s : result.solutions) j["solutions"].push_back(solution_json(s));
      if (result.pair_distance) j["pair_distance"] = *result.pair_distance;
      io.out << j.dump(2) << '\n';
    } else {
      io.out << "method: " << to_string(*method) << (result.fallback ? " (fallback)" : "") << '\n';
      io.out << "ambiguity: |u| = " << fmt(reduced.u.norm()) << " (" << to_string(ambiguity) << ")\n";
      print_solutions(io.out, result.solutions);
      if (result.pair_distance) io.out << "pair distance: " << fmt(*result.pair_distance) << '\n';
    }
    return kExitOk;
  });
}

struct BadConfigFlags {
  double sphere_radius = 6400.0;
  double orbit_radius = 26400.0;
  int num_sats = 5;
  std::uint64_t seed = 1;
  std::optional<std::filesystem::path> out_file;
};

inline int cmd_gen_bad_config(const BadConfigFlags& flags, const Output& io) {
  return guarded(io, [&] {
    const SphereConstraint3 sphere{Vec3::Zero(), flags.sphere_radius};
    validate(sphere);
    const auto bad = generate_bad_configuration<3>(sphere, flags.orbit_radius, flags.num_sats, flags.seed);
    Scenario scenario;
    scenario.sphere = sphere;
    scenario.observations = bad.observations;
    scenario.truth = ScenarioTruth{{bad.solution_a.position, bad.solution_a.offset},
                                   {{bad.solution_b.position, bad.solution_b.offset}}};
    const std::string text = scenario_to_json(scenario).dump(2) + "\n";
    if (flags.out_file) {
      std::ofstream file(*flags.out_file, std::ios::binary | std::ios::trunc);
      if (!file || !(file << text)) {
        throw std::runtime_error("cannot write '" + flags.out_file->string() + "'");
      }
      io.err << "wrote " << flags.out_file->string() << '\n';
    } else {
      io.out << text;
    }
    return kExitOk;
  });
}

inline int cmd_experiment(const std::filesystem::path& spec_file, const std::filesystem::path& out_csv,
                          std::optional<std::uint64_t> seed, std::optional<int> threads, const Output& io) {
  return guarded(io, [&] {
    auto spec = read_json_file(spec_file).get<ExperimentSpec>();
    if (seed) spec.rng_seed = *seed;
    if (threads) spec.threads = *threads;
    const auto records = run_experiment(spec);
    write_records(records, spec.noise_sigma, spec.rng_seed, out_csv);

    nlohmann::json summary = nlohmann::json::array();
    for (Method m : {Method::ILS, Method::SoS, Method::RSoS}) {
      double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
      int failed = 0, two = 0;
      for (const auto& r : records) {
        if (r.method != m) continue;
        if (std::isfinite(r.mean_error_km)) {
          lo = std::min(lo, r.mean_error_km);
          hi = std::max(hi, r.mean_error_km);
        }
        failed += r.failed_trials;
        two += r.num_two_solution_trials;
      }
      if (io.json) {
        summary.push_back({{"method", to_string(m)},
                           {"min_mean_error_km", lo},
                           {"max_mean_error_km", hi},
                           {"two_solution_trials", two},
                           {"failed_trials", failed}});
      } else {
        io.out << to_string(m) << ": mean error " << fmt(lo) << " .. " << fmt(hi) << " km, two-solution trials "
               << two << ", failed trials " << failed << '\n';
      }
    }
    if (io.json) {
      io.out << nlohmann::json{{"command", "experiment"}, {"csv", out_csv.string()}, {"methods", summary}}.dump(2)
             << '\n';
    }
    return kExitOk;
  });
}

}  // namespace spherepos::cli
