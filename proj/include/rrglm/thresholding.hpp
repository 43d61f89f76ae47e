#pragma once

#include <string>
#include <string_view>

#include "rrglm/linalg.hpp"

namespace rrglm {

enum class RuleKind { soft, hard, ridge, hard_ridge, berhu, quantile };

/// A thresholding rule together with its parameters.
///
/// `lambda` is the threshold (unused by quantile), `eta` the ridge shrinkage
/// of hard_ridge and quantile, `M` the Berhu knot and `rank` the number of
/// components the quantile rule keeps.
struct ThresholdRule {
  RuleKind kind = RuleKind::soft;
  double lambda = 0.0;
  double eta = 0.0;
  double M = 1.0;
  Index rank = 1;

  static ThresholdRule soft(double lambda);
  static ThresholdRule hard(double lambda);
  static ThresholdRule ridge(double lambda);
  static ThresholdRule hard_ridge(double lambda, double eta);
  static ThresholdRule berhu(double lambda, double M);
  static ThresholdRule quantile(Index rank, double eta);

  /// Curvature constant: lower bound 1 - L on the slope of the inverse rule.
  double curvature() const;
  /// True when the coupled penalty is convex (soft, ridge, berhu).
  bool convex() const;
  /// Same rule with a different threshold.
  ThresholdRule with_lambda(double value) const;

  void validate() const;
  /// Canonical spec string, e.g. "hardridge:lambda=1,eta=0.1".
  std::string to_string() const;

  bool operator==(const ThresholdRule&) const = default;
};

std::string_view kind_name(RuleKind kind);

/// Parses `soft:lambda=..`, `hard:lambda=..`, `ridge:lambda=..`,
/// `hardridge:lambda=..,eta=..`, `berhu:lambda=..,M=..` and
/// `quantile:r=..,eta=..`. Missing lambda defaults to 0 so that a bare kind
/// can name a path family.
ThresholdRule parse_rule(std::string_view spec);

double apply_scalar(const ThresholdRule& rule, double t);

/// Keeps the r largest-magnitude entries of `a`, divided by (1 + eta), and
/// zeroes the rest. Ties go to the smaller index.
Vector apply_quantile(const Vector& a, Index r, double eta);

/// Applies the rule to a vector of singular values. The quantile rule keeps
/// min(rank, size) entries.
Vector apply_to_singular_values(const ThresholdRule& rule, const Vector& s);

/// Matrix version: thresholds the singular values and keeps the singular
/// vectors.
Matrix apply_matrix(const ThresholdRule& rule, const Matrix& B);

/// As apply_matrix, also returning the factors of the result (singular
/// values in `svd.s` are the thresholded ones).
ThinSvd apply_matrix_factored(const ThresholdRule& rule, const Matrix& B);

/// Coupled penalty P(theta) - P(0).
double penalty_scalar(const ThresholdRule& rule, double theta);

/// Sum of penalty_scalar over the given singular values.
double penalty_singular_values(const ThresholdRule& rule, const Vector& s);

double penalty_matrix(const ThresholdRule& rule, const Matrix& B);

}  // namespace rrglm
