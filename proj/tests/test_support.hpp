#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "spherepos/types.hpp"

namespace spherepos::testing {

template <int N>
Vec<N> random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec<N> v;
  do {
    for (int i = 0; i < N; ++i) v(i) = gauss(rng);
  } while (v.norm() < 1e-6);
  return v.normalized();
}

template <int N>
Vec<N> random_in_box(std::mt19937_64& rng, double half_width) {
  std::uniform_real_distribution<double> uni(-half_width, half_width);
  Vec<N> v;
  for (int i = 0; i < N; ++i) v(i) = uni(rng);
  return v;
}

// Arrival times consistent with the user at `x` and clock offset `t`.
template <int N>
Observations<N> observe(const std::vector<Vec<N>>& sats, const Vec<N>& x, double t) {
  Observations<N> obs;
  for (const auto& s : sats) obs.push_back({s, (s - x).norm() + t});
  return obs;
}

// GPS-like scene: user on a 6400 km sphere, satellites on the 26400 km orbit
// sphere in the hemisphere facing the user.
struct GpsScene {
  SphereConstraint3 sphere;
  Vec3 user;
  double offset;
  std::vector<Vec3> sats;
  Observations<3> observations;
};

inline GpsScene gps_scene(std::mt19937_64& rng, int m, double user_radius = 6400.0) {
  GpsScene scene;
  scene.sphere = {Vec3::Zero(), 6400.0};
  const Vec3 up = random_unit<3>(rng);
  scene.user = user_radius * up;
  scene.offset = std::uniform_real_distribution<double>(-1e4, 0.0)(rng);
  while (static_cast<int>(scene.sats.size()) < m) {
    Vec3 d = random_unit<3>(rng);
    if (d.dot(up) < 0.2) continue;
    scene.sats.push_back(26400.0 * d);
  }
  scene.observations = observe<3>(scene.sats, scene.user, scene.offset);
  return scene;
}

}  // namespace spherepos::testing
