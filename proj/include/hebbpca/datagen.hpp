#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "hebbpca/encoding.hpp"
#include "hebbpca/rng.hpp"
#include "hebbpca/types.hpp"

namespace hebbpca {

/// Target covariance spectrum for synthetic data.
struct SpectrumSpec {
  std::vector<double> eigenvalues;  // descending, > 0
  std::size_t samples = 0;
  std::uint64_t seed = 0;

  std::size_t dims() const { return eigenvalues.size(); }

  void validate() const {
    if (eigenvalues.empty()) throw Error(ErrorCode::InvalidSpec, "spectrum is empty");
    if (samples < 1) throw Error(ErrorCode::InvalidSpec, "need at least one sample");
    for (std::size_t i = 0; i < eigenvalues.size(); ++i) {
      if (!(eigenvalues[i] > 0.0)) throw Error(ErrorCode::InvalidSpec, "eigenvalues must be positive");
      if (i > 0 && eigenvalues[i] > eigenvalues[i - 1])
        throw Error(ErrorCode::InvalidSpec, "eigenvalues must be non-increasing");
    }
  }

  bool distinct() const {
    for (std::size_t i = 1; i < eigenvalues.size(); ++i)
      if (eigenvalues[i] == eigenvalues[i - 1]) return false;
    return true;
  }
};

/// One NormalStream seeded with spec.seed supplies, in this order:
///   Z   samples x dims, row by row
///   G   dims x dims, row by row
/// Q is Gram-Schmidt over the columns of G, and the samples are the rows of
/// Z diag(sqrt(lambda)) Q^T, centered afterwards.
inline DataMatrix gen_data(const SpectrumSpec& spec) {
  spec.validate();
  const auto d = static_cast<Eigen::Index>(spec.dims());
  const auto m = static_cast<Eigen::Index>(spec.samples);
  NormalStream normals(spec.seed);
  const Matrix z = normals.matrix(m, d);
  const Matrix g = normals.matrix(d, d);
  const Matrix q = orthonormalize(Matrix(g.transpose())).rows().transpose();

  Vector scale(d);
  for (Eigen::Index i = 0; i < d; ++i) scale(i) = std::sqrt(spec.eigenvalues[static_cast<std::size_t>(i)]);
  const Matrix x = (z * scale.asDiagonal()) * q.transpose();
  return center(DataMatrix(x));
}

}  // namespace hebbpca
