#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "spherepos/error.hpp"

namespace spherepos {

/// Polynomial of degree at most four, coefficients stored lowest degree first.
struct QuarticPolynomial {
  std::array<double, 5> coefficients{};

  double operator()(double t) const {
    double acc = 0.0;
    for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) acc = acc * t + *it;
    return acc;
  }

  double derivative(double t) const {
    double acc = 0.0;
    for (int k = 4; k >= 1; --k) acc = acc * t + k * coefficients[static_cast<std::size_t>(k)];
    return acc;
  }

  // Degree ignoring exactly-zero leading terms.
  int degree() const {
    for (int k = 4; k >= 0; --k) {
      if (coefficients[static_cast<std::size_t>(k)] != 0.0) return k;
    }
    return -1;
  }
};

namespace detail {

// Variable scale rho making |a_k rho^k| comparable across k, so that
// thresholds on the rescaled coefficients are unit-free.
inline double balancing_scale(const std::array<double, 5>& c, int top) {
  int low = 0;
  while (low < top && c[static_cast<std::size_t>(low)] == 0.0) ++low;
  if (low == top) return 1.0;
  const double ratio = std::abs(c[static_cast<std::size_t>(low)] / c[static_cast<std::size_t>(top)]);
  return std::pow(ratio, 1.0 / (top - low));
}

inline double polish_root(const QuarticPolynomial& p, double t) {
  double best = t;
  double best_val = std::abs(p(t));
  for (int iter = 0; iter < 8 && best_val > 0.0; ++iter) {
    const double d = p.derivative(t);
    if (d == 0.0 || !std::isfinite(d)) break;
    t -= p(t) / d;
    const double val = std::abs(p(t));
    if (!std::isfinite(val) || val >= best_val) break;
    best = t;
    best_val = val;
  }
  return best;
}

}  // namespace detail

/// All real roots of a polynomial of degree <= 4, ascending.
///
/// Roots come from the companion-matrix eigenvalues of the balanced
/// polynomial, followed by Newton polishing. An eigenvalue counts as real when
/// |Im| < 1e-8 (1 + |Re|); roots closer than 1e-7 (1 + |t|) are merged.
inline std::vector<double> real_roots(const QuarticPolynomial& poly) {
  const auto& raw = poly.coefficients;
  double max_abs = 0.0;
  for (double c : raw) {
    if (!std::isfinite(c)) throw SolverError(ErrorCode::InvalidInput, "non-finite coefficient");
    max_abs = std::max(max_abs, std::abs(c));
  }
  if (max_abs == 0.0) throw SolverError(ErrorCode::ZeroPolynomial, "all coefficients are zero");

  int top = poly.degree();
  const double rho = detail::balancing_scale(raw, top);
  std::array<double, 5> scaled{};
  double scaled_max = 0.0;
  for (int k = 0; k <= 4; ++k) {
    scaled[static_cast<std::size_t>(k)] = raw[static_cast<std::size_t>(k)] * std::pow(rho, k);
    scaled_max = std::max(scaled_max, std::abs(scaled[static_cast<std::size_t>(k)]));
  }
  while (top > 0 && std::abs(scaled[static_cast<std::size_t>(top)]) <= 1e-12 * scaled_max) --top;
  if (top <= 0) return {};

  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(top, top);
  for (int i = 1; i < top; ++i) companion(i, i - 1) = 1.0;
  for (int i = 0; i < top; ++i) {
    companion(i, top - 1) = -scaled[static_cast<std::size_t>(i)] / scaled[static_cast<std::size_t>(top)];
  }
  Eigen::EigenSolver<Eigen::MatrixXd> eig(companion, false);

  std::vector<double> roots;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
    const std::complex<double> z = eig.eigenvalues()(i) * rho;
    if (std::abs(z.imag()) < 1e-8 * (1.0 + std::abs(z.real()))) {
      roots.push_back(detail::polish_root(poly, z.real()));
    }
  }
  std::sort(roots.begin(), roots.end());

  std::vector<double> merged;
  for (double r : roots) {
    if (!merged.empty() && std::abs(r - merged.back()) < 1e-7 * (1.0 + std::abs(r))) {
      if (std::abs(poly(r)) < std::abs(poly(merged.back()))) merged.back() = r;
      continue;
    }
    merged.push_back(r);
  }
  return merged;
}

}  // namespace spherepos
