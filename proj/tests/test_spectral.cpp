#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "hebbpca/learners.hpp"
#include "hebbpca/spectral.hpp"
#include "oracles.hpp"

using namespace hebbpca;

namespace {

Matrix diag2() {
  Matrix c = Matrix::Zero(2, 2);
  c(0, 0) = 2.0;
  c(1, 1) = 0.5;
  return c;
}

Vector e(Eigen::Index i, Eigen::Index d) { return Vector::Unit(d, i); }

// Q diag(lambda) Q^T with a random orthogonal Q.
Matrix with_spectrum(std::mt19937_64& rng, const std::vector<double>& lambda) {
  const auto d = static_cast<Eigen::Index>(lambda.size());
  const Matrix q = oracle::random_orthonormal_rows(rng, d, d);
  Vector l(d);
  for (Eigen::Index i = 0; i < d; ++i) l(i) = lambda[static_cast<std::size_t>(i)];
  Matrix c = q.transpose() * l.asDiagonal() * q;
  return 0.5 * (c + c.transpose());
}

double max_residual(const Matrix& c, const Spectrum& s) {
  double worst = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Vector v = s.vector(i);
    worst = std::max(worst, (c * v - s.value(i) * v).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace

TEST(JacobiEigen, AlreadyDiagonal) {
  const Spectrum s = jacobi_eigen(CovarianceMatrix(diag2()));
  EXPECT_EQ(s.value(0), 2.0);
  EXPECT_EQ(s.value(1), 0.5);
  EXPECT_EQ(s.vector(0), e(0, 2));
  EXPECT_EQ(s.vector(1), e(1, 2));
}

TEST(JacobiEigen, ClassicTwoByTwo) {
  Matrix c(2, 2);
  c << 2, 1, 1, 2;
  const Spectrum s = jacobi_eigen(CovarianceMatrix(c));
  const double r = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(s.value(0), 3.0, 1e-15);
  EXPECT_NEAR(s.value(1), 1.0, 1e-15);
  EXPECT_NEAR(s.vector(0)(0), r, 1e-15);
  EXPECT_NEAR(s.vector(0)(1), r, 1e-15);
  EXPECT_NEAR(s.vector(1)(0), r, 1e-15);
  EXPECT_NEAR(s.vector(1)(1), -r, 1e-15);
}

TEST(JacobiEigen, RandomPsdReassembles) {
  std::mt19937_64 rng(606);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix c = oracle::random_psd(rng, 6);
    const Spectrum s = jacobi_eigen(CovarianceMatrix(c));
    Matrix back = Matrix::Zero(6, 6);
    for (std::size_t i = 0; i < 6; ++i) back += s.value(i) * s.vector(i) * s.vector(i).transpose();
    EXPECT_LE((back - c).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE(max_residual(c, s), 1e-8);
    EXPECT_LE(orthonormality_defect(s.vectors()), 1e-8);
  }
}

TEST(JacobiEigen, AgreesWithReferenceSolver) {
  std::mt19937_64 rng(17);
  for (Eigen::Index d = 2; d <= 10; ++d) {
    const Matrix c = oracle::random_psd(rng, d);
    const Spectrum s = jacobi_eigen(CovarianceMatrix(c));
    EXPECT_LE((s.values() - oracle::reference_eigen(c).values).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(JacobiEigen, SortedWithCanonicalSigns) {
  std::mt19937_64 rng(23);
  const Spectrum s = jacobi_eigen(CovarianceMatrix(oracle::random_psd(rng, 7)));
  for (std::size_t i = 1; i < s.size(); ++i) EXPECT_GE(s.value(i - 1), s.value(i));
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Vector v = s.vector(i);
    Eigen::Index k = 0;
    v.cwiseAbs().maxCoeff(&k);
    EXPECT_GT(v(k), 0.0);
  }
}

TEST(JacobiEigen, Deterministic) {
  std::mt19937_64 rng(29);
  const Matrix c = oracle::random_psd(rng, 8);
  const Spectrum a = jacobi_eigen(c);
  const Spectrum b = jacobi_eigen(c);
  EXPECT_EQ(a.values(), b.values());
  EXPECT_EQ(a.vectors().rows(), b.vectors().rows());
}

TEST(JacobiEigen, SweepLimit) {
  Matrix c(2, 2);
  c << 2, 1, 1, 2;
  Tolerances tol;
  tol.jacobi_max_sweeps = 0;
  try {
    jacobi_eigen(c, tol);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::NoConvergence);
  }
}

TEST(JacobiEigen, RejectsAsymmetric) {
  Matrix c(2, 2);
  c << 1, 2, 0, 1;
  EXPECT_THROW(jacobi_eigen(c), Error);
}

TEST(OptimalResidual, Examples) {
  const Spectrum s(Vector::LinSpaced(2, 3, 1), WeightBasis::identity(2));
  EXPECT_EQ(optimal_residual(s, 1), 1.0);
  EXPECT_EQ(optimal_residual(s, 2), 0.0);
  EXPECT_EQ(optimal_residual(s, 0), 4.0);
}

TEST(OptimalResidual, MatchesVarianceDecompositionOfTopBasis) {
  std::mt19937_64 rng(41);
  const DataMatrix d = center(DataMatrix(oracle::centered_gaussian(rng, 500, 8, 0.8)));
  const Spectrum s = jacobi_eigen(covariance(d));
  for (std::size_t n = 1; n <= 8; ++n) {
    const auto r = variance_decomposition(s.prefix(n).vectors(), d);
    EXPECT_NEAR(optimal_residual(s, n), r.residual, 1e-9);
  }
}

TEST(ObjectiveFn, NoPriorComponents) {
  const CovarianceMatrix c(diag2());
  const Spectrum s = jacobi_eigen(c);
  EXPECT_DOUBLE_EQ(objective_f_n(e(0, 2), c, s.prefix(0)), 1.0);
}

TEST(ObjectiveFn, OnePriorComponentSquaredScale) {
  const CovarianceMatrix c(diag2());
  const Spectrum s = jacobi_eigen(c);
  EXPECT_DOUBLE_EQ(objective_f_n(e(0, 2), c, s.prefix(1)), 0.5);
  EXPECT_DOUBLE_EQ(objective_f_n(e(0, 2), c, s.prefix(1), DeflationScale::Corrected), 0.0);
}

TEST(ObjectiveFn, SignalFormEqualsMatrixForm) {
  std::mt19937_64 rng(52);
  const DataMatrix d = center(DataMatrix(oracle::centered_gaussian(rng, 400, 5, 0.8)));
  const CovarianceMatrix c = covariance(d);
  const Spectrum s = jacobi_eigen(c);
  for (std::size_t n = 0; n <= 3; ++n) {
    const Spectrum prior = s.prefix(n);
    std::vector<SignalBatch> prior_signals;
    std::vector<double> prior_values;
    for (std::size_t i = 0; i < n; ++i) {
      prior_signals.push_back({i, d.values() * prior.vector(i)});
      prior_values.push_back(prior.value(i));
    }
    for (int k = 0; k < 5; ++k) {
      const Vector w = oracle::gaussian(rng, 5, 1).col(0).normalized();
      const SignalBatch y{n, d.values() * w};
      for (auto scale : {DeflationScale::Squared, DeflationScale::Corrected}) {
        EXPECT_NEAR(objective_f_n(w, c, prior, scale),
                    objective_f_n(y, prior_signals, prior_values, scale), 1e-9);
      }
    }
  }
}

TEST(ObjectiveFn, ZeroEigenvalue) {
  const CovarianceMatrix c(diag2());
  const Spectrum bad(Vector::Zero(1), WeightBasis(Matrix(e(0, 2).transpose())));
  try {
    objective_f_n(e(0, 2), c, bad);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::ZeroEigenvalue);
  }
  EXPECT_THROW(gradient_f_n(e(0, 2), c, bad), Error);
  EXPECT_THROW(deflated_matrix(c, bad), Error);
}

TEST(GradientFn, NoPriorIsCw) {
  const CovarianceMatrix c(diag2());
  Vector w(2);
  w << 0.3, -0.7;
  EXPECT_EQ(gradient_f_n(w, c, jacobi_eigen(c).prefix(0)), c.values() * w);
}

TEST(GradientFn, SquaredScaleAtTopEigenvector) {
  // C v_1 - C v_1 (v_1^T C v_1) / lambda_1^2 = (lambda_1 - 1) v_1 = (1, 0).
  const CovarianceMatrix c(diag2());
  const Vector g = gradient_f_n(e(0, 2), c, jacobi_eigen(c).prefix(1));
  EXPECT_DOUBLE_EQ(g(0), 1.0);
  EXPECT_DOUBLE_EQ(g(1), 0.0);
}

TEST(GradientFn, MatchesCentralDifferences) {
  std::mt19937_64 rng(73);
  for (int m = 0; m < 3; ++m) {
    const CovarianceMatrix c(oracle::random_psd(rng, 5));
    const Spectrum s = jacobi_eigen(c);
    for (std::size_t n = 0; n <= 2; ++n) {
      const Spectrum prior = s.prefix(n);
      for (auto scale : {DeflationScale::Squared, DeflationScale::Corrected}) {
        for (int k = 0; k < 20; ++k) {
          const Vector w = oracle::gaussian(rng, 5, 1).col(0);
          const Vector g = gradient_f_n(w, c, prior, scale);
          const Vector fd = oracle::finite_difference_gradient(
              [&](const Vector& p) { return objective_f_n(p, c, prior, scale); }, w);
          EXPECT_LE((g - fd).norm() / g.norm(), 1e-6);
        }
      }
    }
  }
}

TEST(DeflatedMatrix, CorrectedRemovesTopComponent) {
  const CovarianceMatrix c(diag2());
  const DeflatedMatrix cn = deflated_matrix(c, jacobi_eigen(c).prefix(1));
  EXPECT_EQ(cn.order, 1u);
  Matrix expected = Matrix::Zero(2, 2);
  expected(1, 1) = 0.5;
  EXPECT_EQ(cn.values, expected);
}

TEST(DeflatedMatrix, SquaredScaleLeavesLambdaMinusOne) {
  const CovarianceMatrix c(diag2());
  const DeflatedMatrix cn = deflated_matrix(c, jacobi_eigen(c).prefix(1), DeflationScale::Squared);
  Matrix expected = Matrix::Zero(2, 2);
  expected(0, 0) = 1.0;
  expected(1, 1) = 0.5;
  EXPECT_EQ(cn.values, expected);
  // v_1 keeps eigenvalue lambda_1 - 1 = 1, not 0.
  EXPECT_EQ(jacobi_eigen(cn.values).value(0), 1.0);
}

TEST(DeflatedMatrix, CorrectedEigenstructure) {
  std::mt19937_64 rng(88);
  for (int trial = 0; trial < 5; ++trial) {
    const CovarianceMatrix c(oracle::random_psd(rng, 6));
    const Spectrum s = jacobi_eigen(c);
    for (std::size_t n = 0; n <= 4; ++n) {
      const DeflatedMatrix cn = deflated_matrix(c, s.prefix(n));
      std::vector<double> expected(n, 0.0);
      for (std::size_t i = n; i < s.size(); ++i) expected.push_back(s.value(i));
      std::sort(expected.begin(), expected.end(), std::greater<>());
      const Spectrum got = jacobi_eigen(cn.values);
      for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(got.value(i), expected[i], 1e-8);
      EXPECT_GE(got.values().minCoeff(), -1e-10);
      EXPECT_LE((cn.values - cn.values.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(GradientFn, ParallelToNextEigenvectorWithCorrectedScale) {
  std::mt19937_64 rng(95);
  for (int trial = 0; trial < 5; ++trial) {
    const CovarianceMatrix c(oracle::random_psd(rng, 5));
    const Spectrum s = jacobi_eigen(c);
    for (std::size_t n = 0; n < 4; ++n) {
      const Vector w = s.vector(n);
      const Vector g = gradient_f_n(w, c, s.prefix(n), DeflationScale::Corrected);
      EXPECT_LE((g - g.dot(w) * w).norm(), 1e-8);
      EXPECT_NEAR(g.dot(w), s.value(n), 1e-9);
    }
  }
}

TEST(GradientFn, ProjectedAscentReachesNextEigenvector) {
  std::mt19937_64 rng(101);
  const CovarianceMatrix c(with_spectrum(rng, {5, 4, 3, 2, 1}));
  const Spectrum s = jacobi_eigen(c);
  const double eta = 1.0 / s.value(0);
  for (std::size_t n = 0; n <= 2; ++n) {
    const Spectrum prior = s.prefix(n);
    for (int start = 0; start < 50; ++start) {
      Vector w = oracle::gaussian(rng, 5, 1).col(0).normalized();
      for (int it = 0; it < 1000; ++it) {
        w = normalize(w + eta * gradient_f_n(w, c, prior, DeflationScale::Corrected));
      }
      EXPECT_GE(std::abs(w.dot(s.vector(n))), 0.999);
    }
  }
}
