#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "spherepos/error.hpp"
#include "spherepos/types.hpp"

namespace spherepos {

// Smallest-to-largest singular value ratio of B below which it is treated as
// rank deficient.
inline constexpr double kRankRatioThreshold = 1e-10;

/// Linearised system  A (t, x, |x|^2 - t^2)^T = b  with rows (-2 t_i, 2 s_i^T, -1)
/// and right-hand side |s_i|^2 - t_i^2.
struct LinearSystem {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd rhs;
};

template <int N>
LinearSystem build_linear_system(const Observations<N>& observations) {
  validate(observations, 1);
  const auto m = static_cast<Eigen::Index>(observations.size());
  LinearSystem sys{Eigen::MatrixXd(m, N + 2), Eigen::VectorXd(m)};
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& obs = observations[static_cast<std::size_t>(i)];
    sys.matrix(i, 0) = -2.0 * obs.arrival_time;
    sys.matrix.row(i).segment<N>(1) = 2.0 * obs.sat_position.transpose();
    sys.matrix(i, N + 1) = -1.0;
    sys.rhs(i) = obs.sat_position.squaredNorm() - obs.arrival_time * obs.arrival_time;
  }
  return sys;
}

/// The unknowns of the linear system expressed in the offset t:
///   x = u t + v,   |x|^2 - t^2 = 2 alpha t + beta.
template <int N>
struct ReducedSystem {
  Vec<N> u = Vec<N>::Zero();
  double alpha = 0.0;
  Vec<N> v = Vec<N>::Zero();
  double beta = 0.0;

  Vec<N> position_at(double t) const { return u * t + v; }
};

/// Pseudo-inverse reduction of the linear system. B (rows (2 s_i^T, -1)) is
/// factorised by SVD rather than through the normal equations.
template <int N>
ReducedSystem<N> reduce(const Observations<N>& observations) {
  validate(observations, N + 1);
  const auto m = static_cast<Eigen::Index>(observations.size());
  Eigen::MatrixXd design(m, N + 1);
  Eigen::MatrixXd rhs(m, 2);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& obs = observations[static_cast<std::size_t>(i)];
    design.row(i).head<N>() = 2.0 * obs.sat_position.transpose();
    design(i, N) = -1.0;
    rhs(i, 0) = 2.0 * obs.arrival_time;
    rhs(i, 1) = obs.sat_position.squaredNorm() - obs.arrival_time * obs.arrival_time;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv(0) <= 0.0 || sv(sv.size() - 1) < kRankRatioThreshold * sv(0)) {
    throw SolverError(ErrorCode::RankDeficient,
                      "satellite design matrix is rank deficient (need " + std::to_string(N + 1) +
                          " affinely independent satellites)");
  }
  const Eigen::MatrixXd sol = svd.solve(rhs);

  ReducedSystem<N> reduced;
  reduced.u = sol.col(0).head<N>();
  reduced.alpha = 0.5 * sol(N, 0);
  reduced.v = sol.col(1).head<N>();
  reduced.beta = sol(N, 1);
  return reduced;
}

enum class Ambiguity { Unique, PossiblyTwo };

constexpr std::string_view to_string(Ambiguity a) {
  return a == Ambiguity::Unique ? "Unique" : "PossiblyTwo";
}

/// |u| <= 1 certifies a unique unconstrained solution; beyond that a second
/// solution may exist.
template <int N>
Ambiguity ambiguity_indicator(const ReducedSystem<N>& reduced) {
  return reduced.u.norm() <= 1.0 ? Ambiguity::Unique : Ambiguity::PossiblyTwo;
}

struct ResidualReport {
  double max_residual = 0.0;
  bool sign_ok = true;
};

/// max_i | |s_i - x| - (t_i - t) |  and whether every t_i - t >= 0.
template <int N>
ResidualReport residuals(const Vec<N>& position, double offset, const Observations<N>& observations) {
  ResidualReport report;
  for (const auto& obs : observations) {
    const double range = obs.arrival_time - offset;
    report.max_residual =
        std::max(report.max_residual, std::abs((obs.sat_position - position).norm() - range));
    if (range < 0.0) report.sign_ok = false;
  }
  return report;
}

template <int N>
ResidualReport residuals(const Solution<N>& candidate, const Observations<N>& observations) {
  return residuals<N>(candidate.position, candidate.offset, observations);
}

/// Same as `residuals` but against |t_i - t|, i.e. the squared range equations.
template <int N>
double loosened_residual(const Vec<N>& position, double offset, const Observations<N>& observations) {
  double worst = 0.0;
  for (const auto& obs : observations) {
    worst = std::max(worst, std::abs((obs.sat_position - position).norm() -
                                     std::abs(obs.arrival_time - offset)));
  }
  return worst;
}

template <int N>
Solution<N> make_solution(const Vec<N>& position, double offset, const Observations<N>& observations) {
  const auto report = residuals<N>(position, offset, observations);
  return Solution<N>{position, offset, report.max_residual, report.sign_ok};
}

inline double default_residual_tolerance(double radius) { return 1e-6 * std::max(1.0, radius); }

struct SphereSolveOptions {
  // Drop roots that do not satisfy the (loosened) range equations. Turning this
  // off returns both intersections of the line x = u t + v with the sphere,
  // which is what near-sphere methods want as starting points.
  bool filter_residuals = true;
  // Additionally require t_i - t >= 0 for every satellite.
  bool strict_sign = false;
  // Loosened residual tolerance in km; default 1e-6 * max(1, r).
  std::optional<double> residual_tolerance;
};

/// Roots of a t^2 + b t + c = 0 in ascending order. A discriminant within
/// 1e-12 of the coefficient scale is collapsed to the vertex.
inline std::vector<double> quadratic_roots(double a, double b, double c) {
  const double disc = b * b - 4.0 * a * c;
  const double scale = b * b + 4.0 * std::abs(a * c);
  if (std::abs(disc) <= 1e-12 * scale) return {-b / (2.0 * a)};
  if (disc < 0.0) return {};
  const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
  double r1 = q / a;
  double r2 = (q != 0.0) ? c / q : -r1;
  if (r1 > r2) std::swap(r1, r2);
  return {r1, r2};
}

/// Closed-form solutions on the sphere |x - c| = r for m >= N+1 satellites.
///
/// Substituting x = u t + v into the sphere equation gives
///   |u|^2 t^2 + 2 u.(v - c) t + |v - c|^2 - r^2 = 0,
/// whose real roots map back to positions on the sphere.
template <int N>
std::vector<Solution<N>> solve_on_sphere(const Observations<N>& observations,
                                         const SphereConstraint<N>& sphere,
                                         const SphereSolveOptions& options = {}) {
  validate(sphere);
  const ReducedSystem<N> red = reduce(observations);
  const double tol = options.residual_tolerance.value_or(default_residual_tolerance(sphere.radius));

  const Vec<N> vc = red.v - sphere.center;
  const double qa = red.u.squaredNorm();
  const double qb = 2.0 * red.u.dot(vc);
  const double qc = vc.squaredNorm() - sphere.radius * sphere.radius;

  std::vector<double> offsets;
  if (red.u.norm() < 1e-12) {
    if (std::abs(qb) >= 1e-12 * std::max({1.0, vc.norm(), sphere.radius})) {
      offsets.push_back(-qc / qb);
    } else if (std::abs(vc.norm() - sphere.radius) <= tol) {
      // x = v for every t; the offset comes from |x|^2 - t^2 = 2 alpha t + beta.
      const auto candidates = quadratic_roots(1.0, 2.0 * red.alpha, red.beta - red.v.squaredNorm());
      if (candidates.empty()) {
        offsets.push_back(-red.alpha);
      } else {
        offsets.push_back(*std::min_element(
            candidates.begin(), candidates.end(), [&](double lhs, double rhs) {
              return residuals<N>(red.v, lhs, observations).max_residual <
                     residuals<N>(red.v, rhs, observations).max_residual;
            }));
      }
    } else {
      throw SolverError(ErrorCode::DegenerateQuadratic,
                        "position is independent of the offset and v is off the sphere");
    }
  } else {
    offsets = quadratic_roots(qa, qb, qc);
  }

  std::vector<Solution<N>> out;
  for (double t : offsets) {
    const Vec<N> x = red.position_at(t);
    if (options.filter_residuals && loosened_residual<N>(x, t, observations) > tol) continue;
    auto sol = make_solution<N>(x, t, observations);
    if (options.strict_sign && !sol.satisfies_sign_constraint) continue;
    out.push_back(sol);
  }
  return out;
}

}  // namespace spherepos
