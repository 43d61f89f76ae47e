#include "rrglm/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rrglm/errors.hpp"

namespace rrglm {

namespace {

// Matrices whose Gram side is at most this large get a dense eigensolve in
// spectral_norm; larger ones use power iteration.
constexpr Index kDenseGramLimit = 400;

void fix_signs(Matrix& U, Matrix& V) {
  for (Index j = 0; j < U.cols(); ++j) {
    const double scale = U.col(j).cwiseAbs().maxCoeff();
    if (scale == 0.0) continue;
    for (Index i = 0; i < U.rows(); ++i) {
      const double u = U(i, j);
      if (std::abs(u) > 1e-12 * scale) {
        if (u < 0.0) {
          U.col(j) *= -1.0;
          V.col(j) *= -1.0;
        }
        break;
      }
    }
  }
}

}  // namespace

Matrix ThinSvd::reconstruct() const {
  return U * s.asDiagonal() * V.transpose();
}

void require_finite(const Matrix& A, std::string_view what) {
  for (Index j = 0; j < A.cols(); ++j) {
    for (Index i = 0; i < A.rows(); ++i) {
      if (!std::isfinite(A(i, j))) {
        throw InputError(std::string(what) + ": non-finite entry at (" + std::to_string(i) + ", " +
                         std::to_string(j) + ")");
      }
    }
  }
}

ThinSvd thin_svd(const Matrix& A) {
  require_finite(A, "thin_svd");
  const Index k = std::min(A.rows(), A.cols());
  ThinSvd out;
  if (k == 0) {
    out.U = Matrix(A.rows(), 0);
    out.s = Vector(0);
    out.V = Matrix(A.cols(), 0);
    return out;
  }
  Eigen::BDCSVD<Matrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  out.U = svd.matrixU();
  out.s = svd.singularValues();
  out.V = svd.matrixV();
  fix_signs(out.U, out.V);
  return out;
}

SymEig sym_eig(const Matrix& S) {
  require_finite(S, "sym_eig");
  if (S.rows() != S.cols()) throw InputError("sym_eig: matrix is not square");
  const double scale = S.size() == 0 ? 0.0 : S.cwiseAbs().maxCoeff();
  if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
    throw InputError("sym_eig: matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(S);
  if (es.info() != Eigen::Success) throw NumericalError("sym_eig: eigensolver failed");
  // Eigen sorts ascending.
  const Index n = S.rows();
  SymEig out;
  out.values = es.eigenvalues().reverse();
  out.vectors = es.eigenvectors().rowwise().reverse();
  Matrix dummy = Matrix::Zero(n, n);
  fix_signs(out.vectors, dummy);
  return out;
}

double spectral_norm(const Matrix& A, double tol) {
  require_finite(A, "spectral_norm");
  if (!(tol > 0.0)) throw InputError("spectral_norm: tol must be positive");
  if (A.size() == 0) return 0.0;
  const Matrix G = A.rows() >= A.cols() ? Matrix(A.transpose() * A) : Matrix(A * A.transpose());
  const Index k = G.rows();
  if (k <= kDenseGramLimit) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(G, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, es.eigenvalues()(k - 1)));
  }

  // Deterministic start with no symmetry that could make it orthogonal to
  // the leading eigenvector of a structured Gram matrix.
  Vector v(k);
  for (Index i = 0; i < k; ++i) v(i) = 1.0 + 0.5 * std::sin(1.0 + static_cast<double>(i));
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < 20000; ++it) {
    Vector w = G * v;
    const double next = v.dot(w);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    if (it > 0 && std::abs(next - lambda) <= 0.5 * tol * std::abs(next)) {
      return std::sqrt(std::max(0.0, next));
    }
    lambda = next;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(G, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues()(k - 1)));
}

Index numerical_rank(const Vector& s, double rel_tol) {
  if (s.size() == 0 || s(0) <= 0.0) return 0;
  const double cut = rel_tol * s(0);
  Index r = 0;
  for (Index i = 0; i < s.size(); ++i) {
    if (s(i) > cut) ++r;
  }
  return r;
}

Matrix complete_orthonormal(const Matrix& Q, Index width) {
  const Index d = Q.rows();
  if (width > d) throw InputError("complete_orthonormal: width exceeds dimension");
  if (width <= Q.cols()) return Q;
  Matrix out(d, width);
  if (Q.cols() == 0) {
    out = Matrix::Identity(d, width);
    return out;
  }
  Eigen::HouseholderQR<Matrix> qr(Q);
  const Matrix full = qr.householderQ() * Matrix::Identity(d, width);
  out.leftCols(Q.cols()) = Q;
  out.rightCols(width - Q.cols()) = full.rightCols(width - Q.cols());
  return out;
}

}  // namespace rrglm
