#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "spherepos/error.hpp"
#include "spherepos/types.hpp"

// Scenario files: a sphere constraint, observations and optional ground truth,
// all in kilometres and km-equivalent times.
//
//   {"sphere": {"center": [x, y, z], "radius": r},
//    "observations": [{"position": [x, y, z], "arrival_time": t}, ...],
//    "truth": {"position": [x, y, z], "offset": t,
//              "alternates": [{"position": [...], "offset": t}]}}

namespace spherepos {

struct TruthPoint {
  Vec3 position = Vec3::Zero();
  double offset = 0.0;
};

struct ScenarioTruth {
  TruthPoint primary;
  // Other exact solutions, e.g. the second focus of a bad configuration.
  std::vector<TruthPoint> alternates;
};

struct Scenario {
  SphereConstraint3 sphere{Vec3::Zero(), 1.0};
  Observations<3> observations;
  std::optional<ScenarioTruth> truth;
};

namespace detail {

inline Vec3 vec3_from_json(const nlohmann::json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 3) {
    throw SolverError(ErrorCode::InvalidInput, field + " must be an array of 3 numbers");
  }
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[static_cast<std::size_t>(i)].is_number()) {
      throw SolverError(ErrorCode::InvalidInput, field + " must be an array of 3 numbers");
    }
    v(i) = j[static_cast<std::size_t>(i)].get<double>();
  }
  return v;
}

inline nlohmann::json vec3_to_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

inline double number_field(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key) || !j.at(key).is_number()) {
    throw SolverError(ErrorCode::InvalidInput, where + "." + key + " must be a number");
  }
  return j.at(key).get<double>();
}

inline TruthPoint truth_point_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("position")) {
    throw SolverError(ErrorCode::InvalidInput, where + ".position is required");
  }
  return {vec3_from_json(j.at("position"), where + ".position"), number_field(j, "offset", where)};
}

inline nlohmann::json truth_point_to_json(const TruthPoint& p) {
  return {{"position", vec3_to_json(p.position)}, {"offset", p.offset}};
}

}  // namespace detail

/// Throws SolverError(InvalidInput) on any schema violation.
inline Scenario scenario_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SolverError(ErrorCode::InvalidInput, "scenario must be a JSON object");
  if (!j.contains("sphere")) throw SolverError(ErrorCode::InvalidInput, "scenario.sphere is required");
  if (!j.contains("observations") || !j.at("observations").is_array()) {
    throw SolverError(ErrorCode::InvalidInput, "scenario.observations must be an array");
  }
  Scenario s;
  const auto& sp = j.at("sphere");
  if (!sp.is_object() || !sp.contains("center")) {
    throw SolverError(ErrorCode::InvalidInput, "sphere.center is required");
  }
  s.sphere.center = detail::vec3_from_json(sp.at("center"), "sphere.center");
  s.sphere.radius = detail::number_field(sp, "radius", "sphere");
  validate(s.sphere);

  const auto& obs = j.at("observations");
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const std::string where = "observations[" + std::to_string(i) + "]";
    if (!obs[i].is_object() || !obs[i].contains("position")) {
      throw SolverError(ErrorCode::InvalidInput, where + ".position is required");
    }
    Observation3 o{detail::vec3_from_json(obs[i].at("position"), where + ".position"),
                   detail::number_field(obs[i], "arrival_time", where)};
    validate(o);
    s.observations.push_back(o);
  }

  if (j.contains("truth") && !j.at("truth").is_null()) {
    const auto& t = j.at("truth");
    ScenarioTruth truth;
    truth.primary = detail::truth_point_from_json(t, "truth");
    if (t.contains("alternates")) {
      for (const auto& alt : t.at("alternates")) {
        truth.alternates.push_back(detail::truth_point_from_json(alt, "truth.alternates"));
      }
    }
    s.truth = truth;
  }
  return s;
}

inline nlohmann::json scenario_to_json(const Scenario& s) {
  nlohmann::json j;
  j["sphere"] = {{"center", detail::vec3_to_json(s.sphere.center)}, {"radius", s.sphere.radius}};
  j["observations"] = nlohmann::json::array();
  for (const auto& o : s.observations) {
    j["observations"].push_back({{"position", detail::vec3_to_json(o.sat_position)}, {"arrival_time", o.arrival_time}});
  }
  if (s.truth) {
    auto t = detail::truth_point_to_json(s.truth->primary);
    t["alternates"] = nlohmann::json::array();
    for (const auto& alt : s.truth->alternates) t["alternates"].push_back(detail::truth_point_to_json(alt));
    j["truth"] = t;
  }
  return j;
}

/// Reads and parses a JSON document; parse errors carry the byte position.
inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SolverError(ErrorCode::InvalidInput, "cannot open '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw SolverError(ErrorCode::InvalidInput,
                      path.string() + ": parse error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
}

inline Scenario load_scenario(const std::filesystem::path& path) { return scenario_from_json(read_json_file(path)); }

}  // namespace spherepos
