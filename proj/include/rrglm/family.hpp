#pragma once

#include <string>
#include <string_view>

#include "rrglm/linalg.hpp"
#include "rrglm/thresholding.hpp"

namespace rrglm {

enum class FamilyKind { gaussian, bernoulli };

/// Natural exponential family with canonical link and unit dispersion.
struct Family {
  FamilyKind kind = FamilyKind::gaussian;

  static Family gaussian() { return {FamilyKind::gaussian}; }
  static Family bernoulli() { return {FamilyKind::bernoulli}; }
  static Family parse(std::string_view name);

  std::string_view name() const;
  /// Cumulant b(theta).
  double cumulant(double theta) const;
  /// Inverse link b'(theta).
  double mean(double theta) const;
  /// Variance function b''(theta).
  double variance(double theta) const;
  /// Upper bound on b'' over the real line.
  double variance_bound() const;

  bool operator==(const Family&) const = default;
};

/// Design, responses and family of a vector GLM.
///
/// When `has_intercept` is set the first column of X is the all-ones
/// intercept column and the first row of every coefficient matrix is the
/// unpenalized intercept row. Everything else is the "slope" block.
struct DataSet {
  Matrix X;
  Matrix Y;
  Family family;
  bool has_intercept = true;

  Index n() const { return X.rows(); }
  /// Number of slope predictors (columns of X besides the intercept).
  Index p() const { return X.cols() - (has_intercept ? 1 : 0); }
  Index m() const { return Y.cols(); }
  Index first_slope() const { return has_intercept ? 1 : 0; }

  auto slope_design() const { return X.rightCols(p()); }

  void validate() const;
};

/// Builds a DataSet, prepending the intercept column when requested.
DataSet make_dataset(const Matrix& predictors, const Matrix& Y, Family family, bool intercept = true);

/// Slope block of a coefficient matrix for the given intercept convention.
inline auto slope_block(const Matrix& B, bool has_intercept) {
  return B.bottomRows(B.rows() - (has_intercept ? 1 : 0));
}

Matrix mean_from_linear(const Family& family, const Matrix& eta);
Matrix mean_matrix(const Family& family, const Matrix& X, const Matrix& B);

/// Negative log-likelihood, constants in y dropped:
/// gaussian ||Y - XB||_F^2 / 2, bernoulli sum log(1 + e^eta) - y eta.
double neg_log_likelihood_linear(const Family& family, const Matrix& Y, const Matrix& eta);
double neg_log_likelihood(const Family& family, const Matrix& X, const Matrix& Y, const Matrix& B);
/// Same quantity with XB and the sum formed in extended precision.
long double neg_log_likelihood_extended(const Family& family, const Matrix& X, const Matrix& Y, const Matrix& B);

/// Twice the gap to the saturated model.
double deviance_linear(const Family& family, const Matrix& Y, const Matrix& eta);

/// X^T (mu(B) - Y).
Matrix nll_gradient(const Family& family, const Matrix& X, const Matrix& Y, const Matrix& B);

/// Global bound on the information norm: ||X||_2^2 * sup b''.
double rho_upper_bound(const Family& family, const Matrix& X);

/// Design divisor for the penalized iteration: max(1, sqrt(rho / (2 - L))).
double scale_factor(const Family& family, const Matrix& X, const ThresholdRule& rule);

/// Design divisor for the rank-constrained iteration: max(1, sqrt(rho)).
double constrained_scale_factor(const Family& family, const Matrix& X);

}  // namespace rrglm
