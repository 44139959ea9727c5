#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/toms748_solve.hpp>

#include "spherepos/core.hpp"
#include "spherepos/error.hpp"
#include "spherepos/types.hpp"

// Hyperboloids of revolution with prescribed foci and the satellite
// configurations they induce. Every point p on one sheet has
// |p - x| - |p - x'| = const, so a receiver at x and one at x' with clock
// offsets differing by that constant see identical arrival times.
//
// The surface is built from the metric definition: foci x, x', focal
// half-distance h = |x - x'| / 2, axial semi-axis 0 < a < h and transverse
// semi-axis b with a^2 + b^2 = h^2. In quadratic-form terms
//   (p - m)^T ((1/a^2 + 1/b^2) u u^T - (1/b^2) I) (p - m) = 1.
// Writing the transverse term with the full focal distance |x - x'| instead
// of h places the foci at m +- |x - x'| u, i.e. twice as far out.

namespace spherepos {

template <int N>
struct HyperboloidOfRevolution {
  Vec<N> center = Vec<N>::Zero();  // midpoint of the foci
  Vec<N> axis = Vec<N>::UnitX();   // unit vector from focus_b to focus_a
  Vec<N> focus_a = Vec<N>::Zero();
  Vec<N> focus_b = Vec<N>::Zero();
  double axial_semi_axis = 0.0;
  double transverse_semi_axis = 0.0;

  double focal_half_distance() const { return 0.5 * (focus_a - focus_b).norm(); }

  Eigen::Matrix<double, N, N> shape_matrix() const {
    const double a2 = axial_semi_axis * axial_semi_axis;
    const double b2 = transverse_semi_axis * transverse_semi_axis;
    return (1.0 / a2 + 1.0 / b2) * axis * axis.transpose() -
           (1.0 / b2) * Eigen::Matrix<double, N, N>::Identity();
  }
};

enum class Sheet { NearFocusA, NearFocusB };

inline double sheet_sign(Sheet sheet) { return sheet == Sheet::NearFocusA ? 1.0 : -1.0; }

template <int N>
HyperboloidOfRevolution<N> hyperboloid_from_foci(const Vec<N>& x, const Vec<N>& x_prime, double a) {
  const double dist = (x - x_prime).norm();
  if (!(dist > 0.0) || !x.allFinite() || !x_prime.allFinite()) {
    throw SolverError(ErrorCode::DegenerateFoci, "foci must be distinct finite points");
  }
  const double half = 0.5 * dist;
  if (!(a > 0.0 && a < half)) {
    throw SolverError(ErrorCode::InvalidSemiAxis,
                      "axial semi-axis must lie in (0, |x - x'|/2) = (0, " + std::to_string(half) + ")");
  }
  HyperboloidOfRevolution<N> h;
  h.focus_a = x;
  h.focus_b = x_prime;
  h.center = 0.5 * (x + x_prime);
  h.axis = (x - x_prime) / dist;
  h.axial_semi_axis = a;
  h.transverse_semi_axis = std::sqrt((half - a) * (half + a));
  return h;
}

/// (p - m)^T M (p - m) - 1; zero exactly on the surface.
template <int N>
double evaluate_quadric(const HyperboloidOfRevolution<N>& h, const Vec<N>& p) {
  const Vec<N> d = p - h.center;
  return d.dot(h.shape_matrix() * d) - 1.0;
}

/// |p - x| - |p - x'|; equals -2a on the sheet near x and +2a near x'.
template <int N>
double focal_distance_difference(const HyperboloidOfRevolution<N>& h, const Vec<N>& p) {
  return (p - h.focus_a).norm() - (p - h.focus_b).norm();
}

namespace detail {

template <int N>
Eigen::Matrix<double, N, N - 1> transverse_basis(const Vec<N>& axis) {
  Eigen::Matrix<double, N, N> q = Eigen::Matrix<double, N, N>::Identity();
  q.col(0) = axis;
  Eigen::HouseholderQR<Eigen::Matrix<double, N, N>> qr(q);
  const Eigen::Matrix<double, N, N> full = qr.householderQ();
  return full.template rightCols<N - 1>();
}

template <int N>
Vec<N> transverse_direction(const Eigen::Matrix<double, N, N - 1>& basis, double azimuth) {
  if constexpr (N == 2) {
    return (std::cos(azimuth) >= 0.0 ? 1.0 : -1.0) * basis.col(0);
  } else {
    return std::cos(azimuth) * basis.col(0) + std::sin(azimuth) * basis.col(1);
  }
}

}  // namespace detail

/// Point of the given sheet at hyperbolic parameter eta >= 0 and azimuth phi.
template <int N>
Vec<N> sheet_point(const HyperboloidOfRevolution<N>& h, Sheet sheet, double eta, double azimuth) {
  const auto basis = detail::transverse_basis<N>(h.axis);
  return h.center + sheet_sign(sheet) * h.axial_semi_axis * std::cosh(eta) * h.axis +
         h.transverse_semi_axis * std::sinh(eta) * detail::transverse_direction<N>(basis, azimuth);
}

template <int N>
struct OrbitSphere {
  Vec<N> center = Vec<N>::Zero();
  double radius = 0.0;
};

struct SheetSampleOptions {
  // Upper bound on eta when no orbit is given.
  double max_eta = 3.0;
  // Attempts at drawing an azimuth whose meridian crosses the orbit sphere.
  int max_attempts = 20000;
};

namespace detail {

// All eta in [0, eta_hi] where the meridian at `azimuth` crosses the orbit.
template <int N>
std::vector<double> orbit_crossings(const HyperboloidOfRevolution<N>& h, Sheet sheet, double azimuth,
                                    const OrbitSphere<N>& orbit) {
  const auto basis = transverse_basis<N>(h.axis);
  const Vec<N> q = h.center - orbit.center;
  const Vec<N> along = sheet_sign(sheet) * h.axial_semi_axis * h.axis;
  const Vec<N> across = h.transverse_semi_axis * transverse_direction<N>(basis, azimuth);
  const double r2 = orbit.radius * orbit.radius;
  auto g = [&](double eta) {
    return (q + std::cosh(eta) * along + std::sinh(eta) * across).squaredNorm() - r2;
  };
  // Beyond eta_hi the transverse component alone exceeds the orbit radius.
  const double eta_hi = std::asinh((orbit.radius + q.norm()) / h.transverse_semi_axis) + 1e-3;
  constexpr int kIntervals = 256;
  std::vector<double> roots;
  double lo = 0.0;
  double g_lo = g(lo);
  for (int k = 1; k <= kIntervals; ++k) {
    const double hi = eta_hi * k / kIntervals;
    const double g_hi = g(hi);
    if (g_lo == 0.0) {
      roots.push_back(lo);
    } else if ((g_lo < 0.0) != (g_hi < 0.0)) {
      std::uintmax_t iters = 200;
      const auto [a, b] = boost::math::tools::toms748_solve(
          g, lo, hi, g_lo, g_hi, boost::math::tools::eps_tolerance<double>(), iters);
      roots.push_back(0.5 * (a + b));
    }
    lo = hi;
    g_lo = g_hi;
  }
  return roots;
}

}  // namespace detail

/// `count` points on one sheet. With an orbit, the points lie on the curve where
/// the sheet meets the orbit sphere; `facing` further restricts them to the
/// half-space (p - orbit.center).facing >= 0.
template <int N>
std::vector<Vec<N>> sample_sheet(const HyperboloidOfRevolution<N>& h, Sheet sheet, int count,
                                 const std::optional<OrbitSphere<N>>& orbit, std::uint64_t seed,
                                 const std::optional<Vec<N>>& facing = std::nullopt,
                                 const SheetSampleOptions& options = {}) {
  if (count < 1) throw SolverError(ErrorCode::InvalidInput, "sample count must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> azimuth_dist(0.0, 2.0 * std::numbers::pi);
  std::vector<Vec<N>> points;

  if (!orbit) {
    std::uniform_real_distribution<double> eta_dist(0.0, options.max_eta);
    while (static_cast<int>(points.size()) < count) {
      points.push_back(sheet_point(h, sheet, eta_dist(rng), azimuth_dist(rng)));
    }
    return points;
  }

  auto admissible = [&](double azimuth) {
    std::vector<Vec<N>> found;
    for (double eta : detail::orbit_crossings(h, sheet, azimuth, *orbit)) {
      Vec<N> p = sheet_point(h, sheet, eta, azimuth);
      if (facing && (p - orbit->center).dot(*facing) < 0.0) continue;
      found.push_back(p);
    }
    return found;
  };

  bool any = false;
  for (int k = 0; k < 720 && !any; ++k) any = !admissible(2.0 * std::numbers::pi * k / 720).empty();
  if (!any) {
    throw SolverError(ErrorCode::EmptyIntersection, "hyperboloid sheet does not meet the orbit sphere");
  }

  for (int attempt = 0; attempt < options.max_attempts && static_cast<int>(points.size()) < count;
       ++attempt) {
    const auto found = admissible(azimuth_dist(rng));
    if (found.empty()) continue;
    std::uniform_int_distribution<std::size_t> pick(0, found.size() - 1);
    points.push_back(found[pick(rng)]);
  }
  if (static_cast<int>(points.size()) < count) {
    throw SolverError(ErrorCode::EmptyIntersection, "could not draw enough points on the intersection");
  }
  return points;
}

template <int N>
struct BadConfiguration {
  Observations<N> observations;
  Solution<N> solution_a;
  Solution<N> solution_b;
  HyperboloidOfRevolution<N> hyperboloid;
  Sheet sheet = Sheet::NearFocusA;
};

struct BadConfigOptions {
  // Central angle between the two foci on the user sphere; chord 2 r sin(15 deg).
  double focus_separation_deg = 30.0;
  // a as a fraction of the focal half-distance.
  double axial_fraction = 0.2;
  Sheet sheet = Sheet::NearFocusA;
  // Clock offset of the solution at focus A; drawn from [-1e4, 0] when unset.
  std::optional<double> offset;
  // Keep satellites in the orbit hemisphere facing focus A.
  bool facing_focus_a = false;
  // Minimum pairwise satellite separation as a fraction of the orbit radius.
  double min_separation_fraction = 0.05;
  int max_attempts = 64;
};

/// Two points x, x' on the sphere and satellites on one sheet of a hyperboloid
/// with foci x, x', intersected with the orbit sphere. Both (x, t) and (x', t')
/// solve the range equations exactly.
template <int N>
BadConfiguration<N> generate_bad_configuration(const SphereConstraint<N>& sphere, double orbit_radius,
                                               int m_sats, std::uint64_t seed,
                                               const BadConfigOptions& options = {}) {
  validate(sphere);
  if (m_sats < N + 1) {
    throw SolverError(ErrorCode::InvalidInput,
                      "bad configuration needs at least " + std::to_string(N + 1) + " satellites");
  }
  if (!(orbit_radius > sphere.radius) || !(options.axial_fraction > 0.0 && options.axial_fraction < 1.0) ||
      !(options.focus_separation_deg > 0.0 && options.focus_separation_deg < 180.0)) {
    throw SolverError(ErrorCode::InfeasibleGeometry,
                      "need orbit radius > sphere radius, axial fraction in (0, 1) and separation in (0, 180)");
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto random_unit = [&] {
    Vec<N> v;
    do {
      for (int i = 0; i < N; ++i) v(i) = gauss(rng);
    } while (v.norm() < 1e-9);
    return Vec<N>(v.normalized());
  };

  const double angle = options.focus_separation_deg * std::numbers::pi / 180.0;
  for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
    const Vec<N> up = random_unit();
    Vec<N> side = random_unit();
    side -= side.dot(up) * up;
    if (side.norm() < 1e-6) continue;
    side.normalize();
    const Vec<N> x = sphere.center + sphere.radius * up;
    const Vec<N> x_prime = sphere.center + sphere.radius * (std::cos(angle) * up + std::sin(angle) * side);
    const double a = options.axial_fraction * 0.5 * (x - x_prime).norm();
    const auto h = hyperboloid_from_foci<N>(x, x_prime, a);

    const OrbitSphere<N> orbit{sphere.center, orbit_radius};
    const std::optional<Vec<N>> facing = options.facing_focus_a ? std::optional<Vec<N>>(up) : std::nullopt;
    const auto sats = sample_sheet<N>(h, options.sheet, m_sats, orbit, rng(), facing);

    bool spread = true;
    for (std::size_t i = 0; i < sats.size() && spread; ++i) {
      for (std::size_t j = i + 1; j < sats.size(); ++j) {
        if ((sats[i] - sats[j]).norm() < options.min_separation_fraction * orbit_radius) {
          spread = false;
          break;
        }
      }
    }
    if (!spread) continue;

    const double t = options.offset.value_or(std::uniform_real_distribution<double>(-1e4, 0.0)(rng));
    BadConfiguration<N> bad;
    bad.hyperboloid = h;
    bad.sheet = options.sheet;
    for (const auto& s : sats) bad.observations.push_back({s, (s - x).norm() + t});
    try {
      reduce(bad.observations);
    } catch (const SolverError&) {
      continue;
    }
    // On the sheet |s - x| - |s - x'| = -2a sigma, hence t' = t - 2a sigma.
    const double t_prime = t - 2.0 * a * sheet_sign(options.sheet);
    bad.solution_a = make_solution<N>(x, t, bad.observations);
    bad.solution_b = make_solution<N>(x_prime, t_prime, bad.observations);
    return bad;
  }
  throw SolverError(ErrorCode::InfeasibleGeometry,
                    "could not place a well-spread satellite set on the hyperboloid sheet");
}

}  // namespace spherepos
