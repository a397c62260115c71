#ifndef SVRN_LINALG_HPP
#define SVRN_LINALG_HPP

#include <bit>
#include <cmath>
#include <span>

#include <Eigen/Dense>

#include "svrn/errors.hpp"
#include "svrn/problem.hpp"

namespace svrn {

/// Cholesky factor L of an SPD matrix M = L L^T, kept together with M.
/// Immutable after construction, so concurrent solves are fine.
class SpdFactorization {
 public:
  explicit SpdFactorization(Matrix M) : matrix_(std::move(M)) {
    detail::require(matrix_.rows() == matrix_.cols() && matrix_.rows() > 0, "factorization needs a square matrix");
    const double scale = matrix_.cwiseAbs().maxCoeff();
    detail::require(std::isfinite(scale), "matrix has non-finite entries");
    detail::require((matrix_ - matrix_.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale,
                    "matrix is not symmetric");
    llt_.compute(matrix_);
    if (llt_.info() != Eigen::Success || !(llt_.matrixLLT().diagonal().array() > 0.0).all()) {
      throw NotPositiveDefinite("nonpositive pivot in Cholesky factorization");
    }
  }

  Index dim() const { return matrix_.rows(); }
  const Matrix& matrix() const { return matrix_; }
  Matrix lower() const { return llt_.matrixL(); }

  /// v with M v = g.
  Vector solve(const Vector& g) const {
    detail::require(g.size() == dim(), "right-hand side has the wrong size");
    return llt_.solve(g);
  }

  Matrix solve(const Matrix& G) const { return llt_.solve(G); }

  /// sqrt(g^T M^{-1} g), via the triangular factor.
  double inverse_norm(const Vector& g) const {
    const Vector w = llt_.matrixL().solve(g);
    return w.norm();
  }

 private:
  Matrix matrix_;
  Eigen::LLT<Matrix> llt_;
};

inline SpdFactorization spd_factor(const Matrix& M) { return SpdFactorization(M); }

/// ||v||_M = sqrt(v^T M v) for PSD M.
inline double h_norm(const Matrix& M, const Vector& v) {
  detail::require(M.rows() == v.size() && M.cols() == v.size(), "dimension mismatch in h_norm");
  const double q = v.dot(M * v);
  if (q < -1e-12) throw ContractViolation("matrix is not positive semidefinite along v");
  return std::sqrt(std::max(q, 0.0));
}

struct SpectralApprox {
  bool holds = false;
  double eps_actual = 0.0;
};

/// Smallest eps with (1-eps) B <= A <= (1+eps) B, from the eigenvalues of
/// L^{-1} A L^{-T} where B = L L^T.
inline SpectralApprox spectral_approx(const Matrix& A, const Matrix& B, double eps) {
  detail::require(A.rows() == B.rows() && A.cols() == B.cols(), "spectral_approx needs equally sized matrices");
  const SpdFactorization fac(B);
  const Matrix L = fac.lower();
  const Matrix left = L.triangularView<Eigen::Lower>().solve(A);
  Matrix whitened = L.triangularView<Eigen::Lower>().solve(left.transpose());
  whitened = 0.5 * (whitened + whitened.transpose()).eval();
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(whitened, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  SpectralApprox out;
  out.eps_actual = std::max(std::abs(ev[0] - 1.0), std::abs(ev[ev.size() - 1] - 1.0));
  out.holds = out.eps_actual <= eps;
  return out;
}

/// In-place orthonormal Walsh-Hadamard transform: butterflies, then a single
/// 1/sqrt(n) scaling.
inline void fwht_inplace(std::span<double> v) {
  const std::size_t n = v.size();
  if (n == 0 || !std::has_single_bit(n)) throw ContractViolation("fwht length must be a power of two");
  for (std::size_t h = 1; h < n; h <<= 1) {
    for (std::size_t i = 0; i < n; i += 2 * h) {
      for (std::size_t j = i; j < i + h; ++j) {
        const double a = v[j];
        const double b = v[j + h];
        v[j] = a + b;
        v[j + h] = a - b;
      }
    }
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (double& x : v) x *= scale;
}

inline Vector fwht(Vector v) {
  fwht_inplace(std::span<double>(v.data(), static_cast<std::size_t>(v.size())));
  return v;
}

/// Applies the transform to every column of a column-major matrix.
inline void fwht_columns(Matrix& M) {
  for (Index c = 0; c < M.cols(); ++c) {
    fwht_inplace(std::span<double>(M.col(c).data(), static_cast<std::size_t>(M.rows())));
  }
}

}  // namespace svrn

#endif  // SVRN_LINALG_HPP
