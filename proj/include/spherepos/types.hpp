#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spherepos/error.hpp"

namespace spherepos {

// Units throughout: kilometres, with the signal speed normalised to 1 so that
// times and offsets are expressed in km-equivalents.

template <int N>
using Vec = Eigen::Matrix<double, N, 1>;

using Vec2 = Vec<2>;
using Vec3 = Vec<3>;

/// One satellite signal: emitter position and measured arrival-time difference.
template <int N>
struct Observation {
  Vec<N> sat_position = Vec<N>::Zero();
  double arrival_time = 0.0;
};

/// The sphere the user is known to lie on (or near).
template <int N>
struct SphereConstraint {
  Vec<N> center = Vec<N>::Zero();
  double radius = 0.0;
};

/// A candidate fix. `max_residual` and `satisfies_sign_constraint` always refer
/// to the observations the solution was evaluated against.
template <int N>
struct Solution {
  Vec<N> position = Vec<N>::Zero();
  double offset = 0.0;
  double max_residual = 0.0;
  bool satisfies_sign_constraint = true;
};

using Observation3 = Observation<3>;
using SphereConstraint3 = SphereConstraint<3>;
using Solution3 = Solution<3>;

template <int N>
using Observations = std::vector<Observation<N>>;

template <int N>
void validate(const Observation<N>& obs) {
  if (!obs.sat_position.allFinite() || !std::isfinite(obs.arrival_time)) {
    throw SolverError(ErrorCode::InvalidInput, "observation contains non-finite values");
  }
}

template <int N>
void validate(const SphereConstraint<N>& sphere) {
  if (!sphere.center.allFinite() || !std::isfinite(sphere.radius) || sphere.radius < 0.0) {
    throw SolverError(ErrorCode::InvalidInput, "sphere needs a finite center and radius >= 0");
  }
}

template <int N>
void validate(const Observations<N>& observations, std::size_t min_count) {
  if (observations.size() < min_count) {
    throw SolverError(ErrorCode::InvalidInput, "need at least " + std::to_string(min_count) +
                                                   " observations, got " +
                                                   std::to_string(observations.size()));
  }
  for (const auto& obs : observations) validate(obs);
}

}  // namespace spherepos
