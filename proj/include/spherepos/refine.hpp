#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "spherepos/core.hpp"
#include "spherepos/error.hpp"
#include "spherepos/types.hpp"

namespace spherepos {

struct RefinementConfig {
  int iterations = 20;
  double dedup_threshold = 1.0;  // km
  bool strict_sign = false;
};

/// 1e-3 of the sphere radius when a sphere is known, otherwise 1 km.
template <int N>
double default_dedup_threshold(const std::optional<SphereConstraint<N>>& sphere) {
  return sphere ? 1e-3 * sphere->radius : 1.0;
}

enum class Method { ILS, SoS, RSoS };

constexpr std::string_view to_string(Method m) {
  switch (m) {
    case Method::ILS: return "ILS";
    case Method::SoS: return "SoS";
    case Method::RSoS: return "RSoS";
  }
  return "?";
}

template <int N>
struct MethodResult {
  Method method = Method::ILS;
  std::vector<Solution<N>> solutions;
  std::vector<bool> converged;  // parallel to solutions
  // ILS initialised by ordinary least squares, or RSoS fell back to ILS.
  bool fallback = false;
  // Distance between the two candidates before deduplication (SoS, RSoS).
  std::optional<double> pair_distance;
};

template <int N>
struct TlsEstimate {
  Solution<N> solution;
  bool ordinary_least_squares = false;
};

namespace detail {

template <int N>
void require_spatial_rank(const Observations<N>& observations) {
  const auto m = static_cast<Eigen::Index>(observations.size());
  Eigen::MatrixXd design(m, N + 1);
  for (Eigen::Index i = 0; i < m; ++i) {
    design.row(i).head<N>() = 2.0 * observations[static_cast<std::size_t>(i)].sat_position.transpose();
    design(i, N) = -1.0;
  }
  const Eigen::VectorXd sv = design.jacobiSvd().singularValues();
  if (sv(0) <= 0.0 || sv(sv.size() - 1) < kRankRatioThreshold * sv(0)) {
    throw SolverError(ErrorCode::RankDeficient, "satellites are affinely dependent");
  }
}

}  // namespace detail

/// Total-least-squares solution of the linearised system, treating
/// (t, x, |x|^2 - t^2) as independent unknowns. The smallest right singular
/// vector of the column-equilibrated [A | b] is scaled so its last coordinate is
/// -1. If that coordinate vanishes (below 1e-12 after renormalisation) the
/// ordinary least-squares solution is used instead.
template <int N>
TlsEstimate<N> tls_initialize(const Observations<N>& observations) {
  validate(observations, N + 1);
  detail::require_spatial_rank(observations);
  const auto sys = build_linear_system(observations);

  Eigen::MatrixXd augmented(sys.matrix.rows(), N + 3);
  augmented << sys.matrix, sys.rhs;
  // Columns range from O(1) to O(|s|^2); equilibrate so the null direction is
  // resolved to working precision, then map back.
  Eigen::VectorXd col_scale = augmented.colwise().norm().transpose();
  for (Eigen::Index j = 0; j < col_scale.size(); ++j) {
    if (col_scale(j) == 0.0) col_scale(j) = 1.0;
  }
  const Eigen::MatrixXd scaled = augmented * col_scale.cwiseInverse().asDiagonal();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(scaled, Eigen::ComputeFullV);
  Eigen::VectorXd smallest = svd.matrixV().col(N + 2).cwiseQuotient(col_scale);
  smallest.normalize();

  TlsEstimate<N> est;
  Eigen::VectorXd z;
  if (std::abs(smallest(N + 2)) < 1e-12) {
    est.ordinary_least_squares = true;
    z = sys.matrix.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(sys.rhs);
  } else {
    z = -smallest.head(N + 2) / smallest(N + 2);
  }
  const Vec<N> x = z.segment<N>(1);
  est.solution = make_solution<N>(x, z(0), observations);
  return est;
}

template <int N>
struct Refined {
  Solution<N> solution;
  bool converged = false;
  bool singular_step = false;
};

/// Undamped Gauss-Newton on r_i(x, t) = |s_i - x| - (t_i - t), run for exactly
/// `config.iterations` steps. No sphere constraint is applied.
template <int N>
Refined<N> gauss_newton_refine(const Solution<N>& initial, const Observations<N>& observations,
                               const RefinementConfig& config) {
  validate(observations, N + 1);
  if (config.iterations < 1) throw SolverError(ErrorCode::InvalidInput, "iterations must be >= 1");

  const auto m = static_cast<Eigen::Index>(observations.size());
  Vec<N> x = initial.position;
  double t = initial.offset;
  Eigen::VectorXd last_step = Eigen::VectorXd::Zero(N + 1);
  Eigen::MatrixXd jac(m, N + 1);
  Eigen::VectorXd res(m);

  Refined<N> out;
  for (int iter = 0; iter < config.iterations; ++iter) {
    for (const auto& obs : observations) {
      if ((x - obs.sat_position).norm() < 1e-9) {
        // Jacobian row undefined at a satellite; nudge along the last step.
        Vec<N> dir = last_step.head<N>();
        if (dir.norm() == 0.0) dir = Vec<N>::UnitX();
        x += 1e-6 * dir.normalized();
      }
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& obs = observations[static_cast<std::size_t>(i)];
      const Vec<N> diff = x - obs.sat_position;
      const double range = diff.norm();
      res(i) = range - (obs.arrival_time - t);
      jac.row(i).head<N>() = (diff / range).transpose();
      jac(i, N) = 1.0;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(jac);
    qr.setThreshold(1e-12);
    if (qr.rank() < N + 1) {
      out.singular_step = true;
      break;
    }
    last_step = qr.solve(-res);
    x += last_step.head<N>();
    t += last_step(N);
    if (!x.allFinite() || !std::isfinite(t)) break;
  }

  out.solution = make_solution<N>(x, t, observations);
  out.converged = !out.singular_step && x.allFinite() && std::isfinite(t) &&
                  last_step.norm() <= 1e-8 * (1.0 + x.norm() + std::abs(t));
  return out;
}

/// Iterative least squares: TLS initial guess refined by Gauss-Newton. Always
/// a single solution.
template <int N>
MethodResult<N> solve_ils(const Observations<N>& observations, const RefinementConfig& config = {}) {
  const auto init = tls_initialize(observations);
  const auto refined = gauss_newton_refine(init.solution, observations, config);
  MethodResult<N> result;
  result.method = Method::ILS;
  result.fallback = init.ordinary_least_squares;
  result.solutions.push_back(refined.solution);
  result.converged.push_back(refined.converged);
  return result;
}

/// Closed-form solutions on the sphere, packaged as a method result. With
/// `keep_all_roots` both sphere intersections are returned unfiltered.
template <int N>
MethodResult<N> solve_sos(const Observations<N>& observations, const SphereConstraint<N>& sphere,
                          const RefinementConfig& config = {}, bool keep_all_roots = false) {
  SphereSolveOptions opts;
  opts.filter_residuals = !keep_all_roots;
  opts.strict_sign = config.strict_sign;
  MethodResult<N> result;
  result.method = Method::SoS;
  result.solutions = solve_on_sphere(observations, sphere, opts);
  result.converged.assign(result.solutions.size(), true);
  if (result.solutions.size() == 2) {
    result.pair_distance = (result.solutions[0].position - result.solutions[1].position).norm();
  }
  return result;
}

/// Refined solution on sphere: both roots of the sphere quadratic seed a
/// Gauss-Newton refinement; results closer than the dedup threshold merge.
template <int N>
MethodResult<N> solve_rsos(const Observations<N>& observations, const SphereConstraint<N>& sphere,
                           const RefinementConfig& config = {}) {
  std::vector<Solution<N>> seeds;
  try {
    SphereSolveOptions opts;
    opts.filter_residuals = false;
    seeds = solve_on_sphere(observations, sphere, opts);
  } catch (const SolverError& e) {
    if (e.code() != ErrorCode::DegenerateQuadratic) throw;
  }

  if (seeds.empty()) {
    auto result = solve_ils(observations, config);
    result.method = Method::RSoS;
    result.fallback = true;
    return result;
  }

  MethodResult<N> result;
  result.method = Method::RSoS;
  std::vector<Refined<N>> refined;
  for (const auto& seed : seeds) refined.push_back(gauss_newton_refine(seed, observations, config));
  if (refined.size() == 2) {
    result.pair_distance = (refined[0].solution.position - refined[1].solution.position).norm();
  }

  if (config.strict_sign) {
    std::vector<Refined<N>> kept;
    for (const auto& r : refined) {
      if (r.solution.satisfies_sign_constraint) kept.push_back(r);
    }
    if (!kept.empty()) refined = kept;
  }

  for (const auto& r : refined) {
    auto same = std::find_if(result.solutions.begin(), result.solutions.end(), [&](const Solution<N>& s) {
      return (s.position - r.solution.position).norm() <= config.dedup_threshold;
    });
    if (same == result.solutions.end()) {
      result.solutions.push_back(r.solution);
      result.converged.push_back(r.converged);
    } else if (r.solution.max_residual < same->max_residual) {
      const auto idx = static_cast<std::size_t>(same - result.solutions.begin());
      *same = r.solution;
      result.converged[idx] = r.converged;
    }
  }
  return result;
}

}  // namespace spherepos
