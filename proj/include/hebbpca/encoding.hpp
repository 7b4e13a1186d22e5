#pragma once

#include <cmath>
#include <span>
#include <sstream>
#include <vector>

#include "hebbpca/types.hpp"

// Data model operations: centering, covariance, projection onto a basis,
// reconstruction and the variance bookkeeping
//   I_tot = I_1 + ... + I_n + e^2
// that holds for any orthonormal basis. All quantities are averaged over
// samples (the covariance is (1/m) X^T X, not X^T X).

namespace hebbpca {

inline DataMatrix center(const DataMatrix& data) {
  const Vector mean = data.values().colwise().mean().transpose();
  Matrix shifted = data.values().rowwise() - mean.transpose();
  return DataMatrix::from_centered(std::move(shifted), data.mean() + mean);
}

inline CovarianceMatrix covariance(const DataMatrix& data) {
  if (!data.centered()) {
    throw Error(ErrorCode::UncenteredData, "covariance requires centered data");
  }
  const Matrix& x = data.values();
  Matrix c = (x.transpose() * x) / static_cast<double>(data.samples());
  // Blocked products do not promise c == c^T bit for bit.
  c = (0.5 * (c + c.transpose())).eval();
  return CovarianceMatrix(std::move(c));
}

inline double orthonormality_defect(const WeightBasis& basis) {
  if (basis.nodes() == 0) return 0.0;
  const Matrix& w = basis.rows();
  const Matrix gram = w * w.transpose();
  return (gram - Matrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
}

inline bool is_orthonormal(const WeightBasis& basis,
                           const Tolerances& tol = default_tolerances()) {
  return orthonormality_defect(basis) <= tol.orthonormal;
}

inline void require_orthonormal(const WeightBasis& basis, const Tolerances& tol) {
  if (!is_orthonormal(basis, tol)) {
    std::ostringstream msg;
    msg << "orthonormality defect " << orthonormality_defect(basis) << " exceeds " << tol.orthonormal;
    throw Error(ErrorCode::NonOrthonormalBasis, msg.str());
  }
}

inline std::vector<SignalBatch> project(const WeightBasis& basis, const DataMatrix& data) {
  if (basis.dims() != data.dims()) {
    throw Error(ErrorCode::DimensionMismatch, "basis and data dims differ");
  }
  std::vector<SignalBatch> out;
  out.reserve(basis.nodes());
  for (std::size_t i = 0; i < basis.nodes(); ++i) {
    out.push_back({i, data.values() * basis.row(i)});
  }
  return out;
}

/// x_hat_s = sum_i y_{i,s} w_i. signals[i] pairs with row i of the basis.
inline DataMatrix reconstruct(const WeightBasis& basis, std::span<const SignalBatch> signals,
                              const Tolerances& tol = default_tolerances()) {
  if (signals.size() != basis.nodes() || signals.empty()) {
    throw Error(ErrorCode::DimensionMismatch, "need one signal batch per basis row");
  }
  const Eigen::Index m = signals.front().values.size();
  for (const auto& s : signals) {
    if (s.values.size() != m) {
      throw Error(ErrorCode::DimensionMismatch, "signal batches differ in length");
    }
  }
  require_orthonormal(basis, tol);
  Matrix y(m, static_cast<Eigen::Index>(signals.size()));
  for (std::size_t i = 0; i < signals.size(); ++i) {
    y.col(static_cast<Eigen::Index>(i)) = signals[i].values;
  }
  return DataMatrix(y * basis.rows());
}

/// Mean squared error of x_hat = sum_i (x . w_i) w_i. No orthonormality is
/// assumed, so this is the error of the linear code as transmitted.
inline double linear_code_error(const Matrix& rows, const DataMatrix& data) {
  if (rows.rows() == 0) {
    return data.values().rowwise().squaredNorm().mean();
  }
  if (static_cast<std::size_t>(rows.cols()) != data.dims()) {
    throw Error(ErrorCode::DimensionMismatch, "basis and data dims differ");
  }
  const Matrix y = data.values() * rows.transpose();
  const Matrix diff = data.values() - y * rows;
  return diff.rowwise().squaredNorm().mean();
}

inline VarianceReport variance_decomposition(const WeightBasis& basis, const DataMatrix& data,
                                             const Tolerances& tol = default_tolerances()) {
  if (!data.centered()) {
    throw Error(ErrorCode::UncenteredData, "variance decomposition requires centered data");
  }
  if (basis.dims() != data.dims()) {
    throw Error(ErrorCode::DimensionMismatch, "basis and data dims differ");
  }
  require_orthonormal(basis, tol);
  VarianceReport report;
  report.total = data.values().rowwise().squaredNorm().mean();
  const auto signals = project(basis, data);
  report.per_component.reserve(signals.size());
  for (const auto& s : signals) {
    report.per_component.push_back(s.values.squaredNorm() / static_cast<double>(data.samples()));
  }
  report.residual = linear_code_error(basis.rows(), data);
  return report;
}

/// Variance of the signal of unit vector w: w^T C w.
inline double captured_variance(const Vector& w, const CovarianceMatrix& c) {
  return w.dot(c.values() * w);
}

/// Max entry of |A^T A - B^T B|; zero iff both bases span the same subspace.
inline double subspace_distance(const WeightBasis& a, const WeightBasis& b) {
  if (a.dims() != b.dims() || a.nodes() != b.nodes()) {
    throw Error(ErrorCode::DimensionMismatch, "bases differ in shape");
  }
  const Matrix pa = a.rows().transpose() * a.rows();
  const Matrix pb = b.rows().transpose() * b.rows();
  return (pa - pb).cwiseAbs().maxCoeff();
}

/// Classical Gram-Schmidt in row order. A second projection pass restores
/// orthogonality lost to rounding; the rank test uses the first pass.
inline WeightBasis orthonormalize(const std::vector<Vector>& rows,
                                  const Tolerances& tol = default_tolerances()) {
  if (rows.empty()) {
    throw Error(ErrorCode::DimensionMismatch, "nothing to orthonormalize");
  }
  std::vector<Vector> q;
  q.reserve(rows.size());
  for (const auto& r : rows) {
    if (r.size() != rows.front().size()) {
      throw Error(ErrorCode::DimensionMismatch, "rows differ in length");
    }
    Vector u = r;
    for (const auto& prev : q) u -= prev.dot(r) * prev;
    if (u.norm() < tol.rank) {
      throw Error(ErrorCode::RankDeficient, "rows are linearly dependent");
    }
    const Vector once = u;
    for (const auto& prev : q) u -= prev.dot(once) * prev;
    q.push_back(u / u.norm());
  }
  return WeightBasis::from_rows(q);
}

inline WeightBasis orthonormalize(const Matrix& rows, const Tolerances& tol = default_tolerances()) {
  std::vector<Vector> v;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) v.emplace_back(rows.row(i).transpose());
  return orthonormalize(v, tol);
}

}  // namespace hebbpca
