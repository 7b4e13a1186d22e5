#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <span>
#include <vector>

#include "hebbpca/encoding.hpp"
#include "hebbpca/types.hpp"

// Ground truth for everything the learners claim: a cyclic Jacobi
// eigensolver, the best achievable residual for n components, and the
// objective f_n whose constrained maximum is the (n+1)-th eigenvector once
// the first n have been found.

namespace hebbpca {

/// Eigenpairs sorted by descending eigenvalue. Row i of `vectors` pairs with
/// values[i].
class Spectrum {
 public:
  Spectrum(Vector values, WeightBasis vectors)
      : values_(std::move(values)), vectors_(std::move(vectors)) {
    if (static_cast<std::size_t>(values_.size()) != vectors_.nodes()) {
      throw Error(ErrorCode::DimensionMismatch, "one eigenvalue per eigenvector required");
    }
  }

  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }
  std::size_t dims() const { return vectors_.dims(); }
  const Vector& values() const { return values_; }
  double value(std::size_t i) const { return values_(static_cast<Eigen::Index>(i)); }
  const WeightBasis& vectors() const { return vectors_; }
  Vector vector(std::size_t i) const { return vectors_.row(i); }

  /// First n eigenpairs.
  Spectrum prefix(std::size_t n) const {
    if (n > size()) throw Error(ErrorCode::DimensionMismatch, "prefix longer than spectrum");
    const auto k = static_cast<Eigen::Index>(n);
    return Spectrum(values_.head(k), WeightBasis(vectors_.rows().topRows(k)));
  }

 private:
  Vector values_;
  WeightBasis vectors_;
};

namespace detail {

inline double offdiag_frobenius(const Matrix& a) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      if (i != j) sum += a(i, j) * a(i, j);
  return std::sqrt(sum);
}

// Flip v so its largest-magnitude entry is positive; ties go to the lowest index.
inline void canonical_sign(Eigen::Ref<Vector> v) {
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < v.size(); ++k)
    if (std::abs(v(k)) > std::abs(v(best))) best = k;
  if (v(best) < 0.0) v = -v;
}

}  // namespace detail

/// Cyclic-by-row Jacobi rotations until the off-diagonal Frobenius norm is
/// below tol.jacobi_offdiag. Accepts any symmetric matrix.
inline Spectrum jacobi_eigen(const Matrix& input, const Tolerances& tol = default_tolerances()) {
  if (input.rows() != input.cols() || input.rows() < 1) {
    throw Error(ErrorCode::DimensionMismatch, "jacobi_eigen needs a square matrix");
  }
  if ((input - input.transpose()).cwiseAbs().maxCoeff() > tol.symmetric) {
    throw Error(ErrorCode::NotSymmetric, "jacobi_eigen needs a symmetric matrix");
  }
  const Eigen::Index n = input.rows();
  Matrix a = input;
  Matrix v = Matrix::Identity(n, n);

  int sweeps = 0;
  while (detail::offdiag_frobenius(a) > tol.jacobi_offdiag) {
    if (++sweeps > tol.jacobi_max_sweeps) {
      throw Error(ErrorCode::NoConvergence, "Jacobi sweep limit exceeded");
    }
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index x, Eigen::Index y) { return a(x, x) > a(y, y); });

  Vector values(n);
  Matrix rows(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index src = order[static_cast<std::size_t>(i)];
    values(i) = a(src, src);
    Vector vec = v.col(src);
    detail::canonical_sign(vec);
    rows.row(i) = vec.transpose();
  }
  return Spectrum(std::move(values), WeightBasis(std::move(rows)));
}

inline Spectrum jacobi_eigen(const CovarianceMatrix& c, const Tolerances& tol = default_tolerances()) {
  return jacobi_eigen(c.values(), tol);
}

/// Smallest achievable mean squared error with n components: sum of the
/// eigenvalues past the n-th.
inline double optimal_residual(const Spectrum& spectrum, std::size_t n) {
  if (n > spectrum.size()) {
    throw Error(ErrorCode::DimensionMismatch, "more components than dimensions");
  }
  return spectrum.values().tail(static_cast<Eigen::Index>(spectrum.size() - n)).sum();
}

/// Divisor applied to each removed component: lambda_i^2 (`Squared`) or
/// lambda_i (`Corrected`). Only `Corrected` leaves eigenvalue 0 on removed
/// components; `Squared` leaves lambda_i - 1.
enum class DeflationScale { Corrected, Squared };

namespace detail {

inline double deflation_divisor(double lambda, DeflationScale scale) {
  return scale == DeflationScale::Corrected ? lambda : lambda * lambda;
}

inline void check_prior(const CovarianceMatrix& c, const Spectrum& prior, const Tolerances& tol) {
  if (prior.size() > 0 && prior.dims() != c.dims()) {
    throw Error(ErrorCode::DimensionMismatch, "prior eigenvectors and covariance differ in dims");
  }
  for (std::size_t i = 0; i < prior.size(); ++i) {
    if (prior.value(i) <= tol.zero_eigenvalue) {
      throw Error(ErrorCode::ZeroEigenvalue, "prior eigenvalue is not positive");
    }
  }
}

}  // namespace detail

/// f_n(w) = w^T C w / 2 - sum_i (w^T C v_i)^2 / (2 s_i), where s_i is
/// lambda_i^2 or lambda_i (see DeflationScale).
inline double objective_f_n(const Vector& w, const CovarianceMatrix& c, const Spectrum& prior,
                            DeflationScale scale = DeflationScale::Squared,
                            const Tolerances& tol = default_tolerances()) {
  if (static_cast<std::size_t>(w.size()) != c.dims()) {
    throw Error(ErrorCode::DimensionMismatch, "w and covariance differ in dims");
  }
  detail::check_prior(c, prior, tol);
  const Vector cw = c.values() * w;
  double f = 0.5 * w.dot(cw);
  for (std::size_t i = 0; i < prior.size(); ++i) {
    const double proj = cw.dot(prior.vector(i));
    f -= proj * proj / (2.0 * detail::deflation_divisor(prior.value(i), scale));
  }
  return f;
}

/// Same objective evaluated from transmitted signals only: y = X w and
/// y_i = X v_i, with batch means in place of the covariance.
inline double objective_f_n(const SignalBatch& y, std::span<const SignalBatch> prior_signals,
                            std::span<const double> prior_values,
                            DeflationScale scale = DeflationScale::Squared,
                            const Tolerances& tol = default_tolerances()) {
  if (prior_signals.size() != prior_values.size()) {
    throw Error(ErrorCode::DimensionMismatch, "one eigenvalue per prior signal required");
  }
  const double m = static_cast<double>(y.values.size());
  double f = 0.5 * y.values.squaredNorm() / m;
  for (std::size_t i = 0; i < prior_signals.size(); ++i) {
    if (prior_signals[i].values.size() != y.values.size()) {
      throw Error(ErrorCode::DimensionMismatch, "signal batches differ in length");
    }
    if (prior_values[i] <= tol.zero_eigenvalue) {
      throw Error(ErrorCode::ZeroEigenvalue, "prior eigenvalue is not positive");
    }
    const double corr = y.values.dot(prior_signals[i].values) / m;
    f -= corr * corr / (2.0 * detail::deflation_divisor(prior_values[i], scale));
  }
  return f;
}

/// Gradient of objective_f_n: C w - sum_i C v_i (w^T C v_i) / s_i = C_n w.
inline Vector gradient_f_n(const Vector& w, const CovarianceMatrix& c, const Spectrum& prior,
                           DeflationScale scale = DeflationScale::Squared,
                           const Tolerances& tol = default_tolerances()) {
  if (static_cast<std::size_t>(w.size()) != c.dims()) {
    throw Error(ErrorCode::DimensionMismatch, "w and covariance differ in dims");
  }
  detail::check_prior(c, prior, tol);
  const Vector cw = c.values() * w;
  Vector g = cw;
  for (std::size_t i = 0; i < prior.size(); ++i) {
    const Vector cv = c.values() * prior.vector(i);
    g -= cv * (cw.dot(prior.vector(i)) / detail::deflation_divisor(prior.value(i), scale));
  }
  return g;
}

struct DeflatedMatrix {
  Matrix values;
  std::size_t order = 0;
};

/// C_n = C - sum_i C v_i v_i^T C / s_i.
inline DeflatedMatrix deflated_matrix(const CovarianceMatrix& c, const Spectrum& prior,
                                      DeflationScale scale = DeflationScale::Corrected,
                                      const Tolerances& tol = default_tolerances()) {
  detail::check_prior(c, prior, tol);
  Matrix out = c.values();
  for (std::size_t i = 0; i < prior.size(); ++i) {
    const Vector cv = c.values() * prior.vector(i);
    out -= (cv * cv.transpose()) / detail::deflation_divisor(prior.value(i), scale);
  }
  return {std::move(out), prior.size()};
}

}  // namespace hebbpca
