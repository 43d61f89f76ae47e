#pragma once

#include <string_view>

#include <Eigen/Dense>

namespace rrglm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Singular values at or below this fraction of the largest one are treated
/// as zero when counting rank.
inline constexpr double kDefaultRankTol = 1e-10;

/// Thin SVD A = U diag(s) V^T with k = min(rows, cols) components.
///
/// Singular values are nonincreasing. Each left singular vector has its
/// first nonzero entry nonnegative so that repeated calls on the same input
/// give the same factors.
struct ThinSvd {
  Matrix U;
  Vector s;
  Matrix V;

  Index size() const { return s.size(); }
  Matrix reconstruct() const;
};

ThinSvd thin_svd(const Matrix& A);

/// Eigenpairs of a symmetric matrix, eigenvalues nonincreasing.
struct SymEig {
  Matrix vectors;
  Vector values;
};

SymEig sym_eig(const Matrix& S);

/// Largest singular value of A to relative accuracy `tol`.
double spectral_norm(const Matrix& A, double tol = 1e-12);

/// Number of entries of `s` strictly above rel_tol * s(0).
Index numerical_rank(const Vector& s, double rel_tol = kDefaultRankTol);

/// Throws InputError naming `what` if A has a NaN or infinite entry.
void require_finite(const Matrix& A, std::string_view what);

/// Columns that complete the orthonormal columns of Q to `width` orthonormal
/// columns. Returns Q unchanged when width <= Q.cols().
Matrix complete_orthonormal(const Matrix& Q, Index width);

}  // namespace rrglm
