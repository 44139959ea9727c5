#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "spherepos/core.hpp"
#include "spherepos/error.hpp"
#include "spherepos/quartic.hpp"
#include "spherepos/types.hpp"

// Positioning on a sphere with exactly N satellites in dimension N (three in
// space, two in the plane). The points x, c, s_1..s_N live in R^N, so their
// bordered Cayley-Menger matrix is singular. With |x - c| = r and
// |x - s_i| = |t_i - t| substituted, its determinant is a polynomial f(t) of
// degree four whose real roots are the only admissible offsets.

namespace spherepos {

template <int N>
struct CayleyMengerInputs {
  SphereConstraint<N> sphere;
  std::array<Observation<N>, N> observations;
  std::array<double, N> center_dist_sq{};                   // d_i^2 = |s_i - c|^2
  std::array<std::array<double, N>, N> sat_dist_sq{};       // d_ij^2 = |s_i - s_j|^2

  double arrival_time(int i) const { return observations[static_cast<std::size_t>(i)].arrival_time; }
  const Vec<N>& sat(int i) const { return observations[static_cast<std::size_t>(i)].sat_position; }

  Observations<N> observation_list() const { return {observations.begin(), observations.end()}; }
};

template <int N>
CayleyMengerInputs<N> make_cayley_menger_inputs(const SphereConstraint<N>& sphere,
                                                const Observations<N>& observations) {
  validate(sphere);
  if (observations.size() != static_cast<std::size_t>(N)) {
    throw SolverError(ErrorCode::InvalidInput, "exactly " + std::to_string(N) +
                                                   " observations required, got " +
                                                   std::to_string(observations.size()));
  }
  validate(observations, N);
  CayleyMengerInputs<N> in;
  in.sphere = sphere;
  std::copy(observations.begin(), observations.end(), in.observations.begin());
  for (int i = 0; i < N; ++i) {
    in.center_dist_sq[static_cast<std::size_t>(i)] = (in.sat(i) - sphere.center).squaredNorm();
    for (int j = 0; j < N; ++j) {
      in.sat_dist_sq[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          (in.sat(i) - in.sat(j)).squaredNorm();
    }
  }
  return in;
}

/// Bordered squared-distance matrix of (x, c, s_1..s_N) with the unknown
/// distances |x - s_i|^2 replaced by (t_i - t)^2 and |x - c|^2 by r^2.
template <int N>
Eigen::Matrix<double, N + 3, N + 3> cayley_menger_matrix(const CayleyMengerInputs<N>& in, double t) {
  Eigen::Matrix<double, N + 3, N + 3> cm = Eigen::Matrix<double, N + 3, N + 3>::Zero();
  for (int k = 1; k < N + 3; ++k) cm(0, k) = cm(k, 0) = 1.0;
  const double r2 = in.sphere.radius * in.sphere.radius;
  cm(1, 2) = cm(2, 1) = r2;
  for (int i = 0; i < N; ++i) {
    const double range = in.arrival_time(i) - t;
    cm(1, 3 + i) = cm(3 + i, 1) = range * range;
    cm(2, 3 + i) = cm(3 + i, 2) = in.center_dist_sq[static_cast<std::size_t>(i)];
    for (int j = 0; j < N; ++j) {
      cm(3 + i, 3 + j) = in.sat_dist_sq[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  return cm;
}

template <int N>
double cayley_menger_determinant(const CayleyMengerInputs<N>& in, double t) {
  return cayley_menger_matrix(in, t).fullPivLu().determinant();
}

/// |det C(t)| divided by the Hadamard bound (product of row norms), in [0, 1].
template <int N>
double relative_cayley_menger_determinant(const CayleyMengerInputs<N>& in, double t) {
  const auto cm = cayley_menger_matrix(in, t);
  double bound = 1.0;
  for (int k = 0; k < N + 3; ++k) bound *= cm.row(k).norm();
  return std::abs(cm.fullPivLu().determinant()) / bound;
}

namespace detail {

// Interval [center - half, center + half] containing every admissible offset:
// |t_i - t| = |x - s_i| <= d_i + r.
template <int N>
std::pair<double, double> offset_window(const CayleyMengerInputs<N>& in) {
  double lo = in.arrival_time(0);
  double hi = lo;
  double reach = 0.0;
  for (int i = 0; i < N; ++i) {
    lo = std::min(lo, in.arrival_time(i));
    hi = std::max(hi, in.arrival_time(i));
    reach = std::max(reach, std::sqrt(in.center_dist_sq[static_cast<std::size_t>(i)]));
  }
  reach += in.sphere.radius;
  return {0.5 * (lo + hi), std::max(0.5 * (hi - lo) + reach, 1e-9)};
}

inline double binomial(int n, int k) {
  double b = 1.0;
  for (int i = 1; i <= k; ++i) b = b * (n - k + i) / i;
  return b;
}

}  // namespace detail

/// f(t) = det C(t), obtained by sampling the determinant at five Chebyshev
/// nodes spanning the admissible offset window and interpolating.
template <int N>
QuarticPolynomial extract_quartic(const CayleyMengerInputs<N>& in) {
  // The t^4 coefficient is -CM(s_1..s_N), zero exactly when the satellites span
  // less than N - 1 dimensions.
  Eigen::Matrix<double, N, N - 1> spread;
  for (int i = 1; i < N; ++i) spread.col(i - 1) = in.sat(i) - in.sat(0);
  const auto sv = spread.jacobiSvd().singularValues();
  if (sv(0) == 0.0 || sv(N - 2) < 1e-12 * sv(0)) {
    throw SolverError(ErrorCode::CollinearSatellites, "satellites are collinear (affine rank below N - 1)");
  }

  const auto [center, half] = detail::offset_window(in);

  Eigen::Matrix<double, 5, 5> vandermonde;
  Eigen::Matrix<double, 5, 1> values;
  for (int k = 0; k < 5; ++k) {
    const double s = std::cos((2 * k + 1) * std::numbers::pi / 10.0);
    double p = 1.0;
    for (int j = 0; j < 5; ++j, p *= s) vandermonde(k, j) = p;
    values(k) = cayley_menger_determinant(in, center + half * s);
  }
  const Eigen::Matrix<double, 5, 1> normalized = vandermonde.fullPivLu().solve(values);

  const double largest = normalized.cwiseAbs().maxCoeff();
  if (largest == 0.0 || std::abs(normalized(4)) < 1e-12 * largest) {
    throw SolverError(ErrorCode::CollinearSatellites,
                      "leading coefficient of det C(t) vanishes: satellites are collinear");
  }

  // f(t) = sum_k a_k ((t - center) / half)^k, expanded in powers of t.
  QuarticPolynomial poly;
  for (int k = 0; k < 5; ++k) {
    const double ak = normalized(k) / std::pow(half, k);
    for (int j = 0; j <= k; ++j) {
      poly.coefficients[static_cast<std::size_t>(j)] +=
          ak * detail::binomial(k, j) * std::pow(-center, k - j);
    }
  }
  return poly;
}

/// Every x on the sphere with |x - s_i| = |t_i - t|, i = 1..N.
///
/// Subtracting the sphere equation from the range equations leaves the linear
/// system 2 (s_i - c).y = |s_i - c|^2 + r^2 - (t_i - t)^2 in y = x - c. When
/// c, s_1..s_N are affinely independent it has one solution; when they are
/// coplanar the solution set is a line, intersected with the sphere.
template <int N>
std::vector<Vec<N>> positions_for_offset(const CayleyMengerInputs<N>& in, double t,
                                         std::optional<double> tolerance = std::nullopt) {
  const double r = in.sphere.radius;
  const double tol = tolerance.value_or(default_residual_tolerance(r));

  Eigen::Matrix<double, N, N> design;
  Vec<N> rhs;
  for (int i = 0; i < N; ++i) {
    const double range = in.arrival_time(i) - t;
    design.row(i) = (in.sat(i) - in.sphere.center).transpose();
    rhs(i) = 0.5 * (in.center_dist_sq[static_cast<std::size_t>(i)] + r * r - range * range);
  }

  Eigen::JacobiSVD<Eigen::Matrix<double, N, N>> svd(design, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv(0) == 0.0) return {};

  std::vector<Vec<N>> out;
  if (sv(N - 1) >= kRankRatioThreshold * sv(0)) {
    const Vec<N> y = svd.solve(rhs);
    if (std::abs(y.norm() - r) <= tol) out.push_back(in.sphere.center + y);
    return out;
  }
  if (N >= 2 && sv(N - 2) < kRankRatioThreshold * sv(0)) return out;

  // Coplanar: y = y0 + lambda n with y0 the minimum-norm solution.
  svd.setThreshold(kRankRatioThreshold);
  const Vec<N> y0 = svd.solve(rhs);
  if ((design * y0 - rhs).norm() > tol * std::max(1.0, sv(0))) return out;
  const Vec<N> normal = svd.matrixV().col(N - 1);
  if (y0.norm() > r + tol) return out;
  const double lambda = std::sqrt(std::max(r * r - y0.squaredNorm(), 0.0));
  if (lambda <= tol) {
    out.push_back(in.sphere.center + y0);
    return out;
  }
  out.push_back(in.sphere.center + y0 + lambda * normal);
  out.push_back(in.sphere.center + y0 - lambda * normal);
  return out;
}

/// All (x, t) with x on the sphere and |x - s_i| = |t_i - t|. With
/// `strict_sign` only solutions of the unsquared equations (t_i - t >= 0) are
/// kept. At most four solutions exist.
template <int N>
std::vector<Solution<N>> solve_three_sat(const CayleyMengerInputs<N>& in, bool strict_sign = false) {
  const QuarticPolynomial f = extract_quartic(in);
  const auto observations = in.observation_list();
  const double tol = default_residual_tolerance(in.sphere.radius);

  std::vector<Solution<N>> out;
  for (double t : real_roots(f)) {
    for (const Vec<N>& x : positions_for_offset(in, t)) {
      if (loosened_residual<N>(x, t, observations) > tol) continue;
      auto sol = make_solution<N>(x, t, observations);
      if (strict_sign && !sol.satisfies_sign_constraint) continue;
      const bool duplicate = std::any_of(out.begin(), out.end(), [&](const Solution<N>& other) {
        return (other.position - x).norm() <= tol && std::abs(other.offset - t) <= tol;
      });
      if (!duplicate) out.push_back(sol);
    }
  }
  return out;
}

}  // namespace spherepos
