#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "hebbpca/encoding.hpp"
#include "hebbpca/types.hpp"

// Equal-information encodings. Any orthonormal basis of the principal
// subspace is an equally good code when nothing is lost; rotating pairs of
// rows until every row carries the same variance k makes the code degrade
// gracefully when components go missing.

namespace hebbpca {

struct BalanceResult {
  WeightBasis basis;
  std::vector<double> variances;
  std::size_t rotations_applied = 0;
  double k = 0.0;
};

/// Angle theta in [0, pi) such that rotating the first vector of a pair
/// with restricted covariance [a c; c b] by theta towards the second gives
/// it variance k:
///
///   (a+b)/2 + ((a-b)/2) cos 2theta + c sin 2theta = k
///
/// The smallest such theta is returned.
inline double pair_rotation_angle(double a, double b, double c, double k,
                                  const Tolerances& tol = default_tolerances()) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (a - b);
  const double radius = std::hypot(half, c);
  if (std::abs(k - mid) > radius + tol.reachable) {
    throw Error(ErrorCode::Unreachable, "target variance outside the pair's range");
  }
  if (radius == 0.0 || k == a) return 0.0;

  const double phase = std::atan2(c, half);
  const double spread = std::acos(std::clamp((k - mid) / radius, -1.0, 1.0));
  auto wrap = [](double theta) {
    constexpr double pi = std::numbers::pi;
    theta = std::fmod(theta, pi);
    if (theta < 0.0) theta += pi;
    if (pi - theta < 1e-12) theta = 0.0;
    return theta;
  };
  return std::min(wrap(0.5 * (phase + spread)), wrap(0.5 * (phase - spread)));
}

inline std::vector<double> component_variances(const WeightBasis& basis, const CovarianceMatrix& c) {
  std::vector<double> out;
  out.reserve(basis.nodes());
  for (std::size_t i = 0; i < basis.nodes(); ++i) out.push_back(captured_variance(basis.row(i), c));
  return out;
}

/// Repeatedly rotates the lowest-variance unfinished row against the
/// highest-variance one until its variance is exactly the mean k, then
/// retires it. Ties resolve to the lowest index. At most nodes-1 rotations.
inline BalanceResult balance(const WeightBasis& basis, const CovarianceMatrix& c,
                             const Tolerances& tol = default_tolerances()) {
  if (basis.dims() != c.dims()) {
    throw Error(ErrorCode::DimensionMismatch, "basis and covariance differ in dims");
  }
  require_orthonormal(basis, tol);

  const std::size_t n = basis.nodes();
  std::vector<Vector> rows;
  for (std::size_t i = 0; i < n; ++i) rows.push_back(basis.row(i));
  std::vector<double> var = component_variances(basis, c);
  double k = 0.0;
  for (double v : var) k += v;
  k /= static_cast<double>(std::max<std::size_t>(n, 1));

  std::vector<bool> finished(n, false);
  std::size_t rotations = 0;
  const double spread_tol = tol.balanced * std::max(1.0, std::abs(k));
  while (true) {
    std::size_t lo = n;
    std::size_t hi = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (finished[i]) continue;
      if (lo == n || var[i] < var[lo]) lo = i;
      if (hi == n || var[i] > var[hi]) hi = i;
    }
    if (lo == n || lo == hi || var[hi] - var[lo] <= spread_tol) break;

    const double cross = rows[lo].dot(c.values() * rows[hi]);
    const double theta = pair_rotation_angle(var[lo], var[hi], cross, k, tol);
    const double cs = std::cos(theta);
    const double sn = std::sin(theta);
    const Vector first = cs * rows[lo] + sn * rows[hi];
    const Vector second = -sn * rows[lo] + cs * rows[hi];
    rows[lo] = first;
    rows[hi] = second;
    var[lo] = captured_variance(rows[lo], c);
    var[hi] = captured_variance(rows[hi], c);
    finished[lo] = true;
    ++rotations;
  }

  WeightBasis out = n == 0 ? basis : WeightBasis::from_rows(rows);
  return {out, component_variances(out, c), rotations, k};
}

/// Largest reconstruction error over every choice of `lost` components:
/// variance outside the span plus the `lost` largest component variances.
/// For lost < nodes-1 this generalizes the single-survivor case.
inline double worst_case_loss(const WeightBasis& basis, const CovarianceMatrix& c, std::size_t lost) {
  if (lost > basis.nodes()) {
    throw Error(ErrorCode::DimensionMismatch, "cannot lose more components than exist");
  }
  if (basis.dims() != c.dims()) {
    throw Error(ErrorCode::DimensionMismatch, "basis and covariance differ in dims");
  }
  std::vector<double> var = component_variances(basis, c);
  double kept = 0.0;
  for (double v : var) kept += v;
  std::sort(var.begin(), var.end(), std::greater<>());
  double worst = c.trace() - kept;
  for (std::size_t i = 0; i < lost; ++i) worst += var[i];
  return worst;
}

}  // namespace hebbpca
