#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hebbpca/error.hpp"

namespace hebbpca {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Node indices are zero-based in code. Files written by the CLI use
/// one-based labels.
using NodeId = std::size_t;

/// Numerical thresholds used across the library. Every operation that
/// takes a tolerance accepts one of these; the defaults are the contract
/// values.
struct Tolerances {
  double centered = 1e-10;        // column means of centered data
  double symmetric = 1e-12;       // |C_ab - C_ba|
  double orthonormal = 1e-8;      // orthonormality_defect accepted as orthonormal
  double rank = 1e-12;            // Gram-Schmidt residual norm
  double zero_vector = 1e-15;     // normalize()
  double zero_signal = 1e-15;     // y_j^T y_j in the SHP deflation sum
  double degenerate = 1e-15;      // trace(C) at or below this is zero data
  double zero_eigenvalue = 1e-12; // prior eigenvalues in f_n / C_n
  double jacobi_offdiag = 1e-12;  // Frobenius norm of off-diagonal part
  int jacobi_max_sweeps = 100;
  double reachable = 1e-12;       // pair_rotation_angle slack
  double balanced = 1e-12;        // relative spread treated as already equal
};

inline const Tolerances& default_tolerances() {
  static const Tolerances tol{};
  return tol;
}

/// Sample-major data: one row per sample, one column per input dimension.
class DataMatrix {
 public:
  /// Raw (uncentered) data.
  explicit DataMatrix(Matrix values)
      : values_(std::move(values)), mean_(Vector::Zero(values_.cols())) {
    if (values_.rows() < 1 || values_.cols() < 1) {
      throw Error(ErrorCode::DimensionMismatch,
                  "data needs at least one sample and one dimension");
    }
  }

  /// Data already known to have zero column means (checked).
  static DataMatrix assume_centered(Matrix values,
                                    const Tolerances& tol = default_tolerances()) {
    DataMatrix d(std::move(values));
    const Vector means = d.values_.colwise().mean().transpose();
    if (means.cwiseAbs().maxCoeff() > tol.centered) {
      throw Error(ErrorCode::UncenteredData, "column means are not zero");
    }
    d.centered_ = true;
    return d;
  }

  /// Used by center(): values are already shifted and mean is what was removed.
  static DataMatrix from_centered(Matrix values, Vector mean) {
    DataMatrix d(std::move(values));
    if (mean.size() != d.values_.cols()) {
      throw Error(ErrorCode::DimensionMismatch, "mean length differs from dims");
    }
    d.mean_ = std::move(mean);
    d.centered_ = true;
    return d;
  }

  std::size_t samples() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t dims() const { return static_cast<std::size_t>(values_.cols()); }
  const Matrix& values() const { return values_; }
  bool centered() const { return centered_; }
  const Vector& mean() const { return mean_; }

 private:
  Matrix values_;
  Vector mean_;
  bool centered_ = false;
};

/// Symmetric positive-semidefinite second-moment matrix, averaged over samples.
class CovarianceMatrix {
 public:
  explicit CovarianceMatrix(Matrix values, const Tolerances& tol = default_tolerances())
      : values_(std::move(values)) {
    if (values_.rows() != values_.cols() || values_.rows() < 1) {
      throw Error(ErrorCode::DimensionMismatch, "covariance must be square");
    }
    if ((values_ - values_.transpose()).cwiseAbs().maxCoeff() > tol.symmetric) {
      throw Error(ErrorCode::NotSymmetric, "covariance must be symmetric");
    }
  }

  std::size_t dims() const { return static_cast<std::size_t>(values_.rows()); }
  const Matrix& values() const { return values_; }
  double trace() const { return values_.trace(); }

 private:
  Matrix values_;
};

/// Encoding vectors w_1..w_N stored as the rows of an N x dims matrix.
class WeightBasis {
 public:
  explicit WeightBasis(Matrix rows) : rows_(std::move(rows)) {
    if (rows_.cols() < 1) {
      throw Error(ErrorCode::DimensionMismatch, "basis rows need at least one entry");
    }
  }

  static WeightBasis from_rows(const std::vector<Vector>& rows) {
    if (rows.empty()) {
      throw Error(ErrorCode::DimensionMismatch, "basis needs at least one row");
    }
    Matrix m(static_cast<Eigen::Index>(rows.size()), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != m.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "basis rows differ in length");
      }
      m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    }
    return WeightBasis(std::move(m));
  }

  static WeightBasis identity(std::size_t dims) {
    const auto d = static_cast<Eigen::Index>(dims);
    return WeightBasis(Matrix::Identity(d, d));
  }

  std::size_t nodes() const { return static_cast<std::size_t>(rows_.rows()); }
  std::size_t dims() const { return static_cast<std::size_t>(rows_.cols()); }
  const Matrix& rows() const { return rows_; }
  Vector row(std::size_t i) const {
    return rows_.row(static_cast<Eigen::Index>(i)).transpose();
  }

 private:
  Matrix rows_;
};

/// Outputs of one node for every sample of a batch.
struct SignalBatch {
  NodeId node = 0;
  Vector values;
};

struct VarianceReport {
  double total = 0.0;
  std::vector<double> per_component;
  double residual = 0.0;
};

}  // namespace hebbpca
