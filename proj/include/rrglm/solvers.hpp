#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rrglm/family.hpp"
#include "rrglm/linalg.hpp"
#include "rrglm/thresholding.hpp"

namespace rrglm {

struct FitOptions {
  int max_iter = 5000;
  /// Stop once ||B(j+1) - B(j)||_F / max(1, ||B(j)||_F) <= tol.
  double tol = 1e-9;
  /// Initial coefficients; zero when empty.
  std::optional<Matrix> start;
  double rank_tol = kDefaultRankTol;

  void validate() const;
};

/// A fitted coefficient matrix with its diagnostics.
///
/// `scale` is the divisor k0 applied to the design inside the solver. Rule
/// parameters act on the singular values of scale * B°, so `objective` is
/// the solver's objective at the returned point:
/// objective(data, B, rule, eta_extra, scale).
struct CoefficientEstimate {
  Matrix B;
  bool has_intercept = true;
  ThinSvd slope_svd;
  Index rank = 0;
  double objective = 0.0;
  bool converged = false;
  int iterations = 0;
  double fixed_point_residual = 0.0;
  double scale = 1.0;
  ThresholdRule rule;
  double eta_extra = 0.0;
  /// F(B(0)), F(B(1)), ... as evaluated by the solver.
  std::vector<double> objective_trace;
  /// F(B(j-1)) - F(B(j)) for j = 1, 2, ..., formed before rounding the
  /// objectives to double.
  std::vector<double> objective_decrease;
  /// Numerical rank of the slope block of B(0), B(1), ...
  std::vector<Index> rank_trace;

  Matrix slope() const { return slope_block(B, has_intercept); }
  /// Intercept row as a vector (zeros without an intercept).
  Vector intercept() const;
};

/// NLL(X, B) + sum P(scale * sigma_i(B°)) + (eta_extra / 2) ||scale * B°||_F^2.
/// The quantile rule contributes no penalty term.
double objective(const DataSet& data, const Matrix& B, const ThresholdRule& rule, double eta_extra = 0.0,
                 double scale = 1.0);

/// Singular-value penalized fit by iterative matrix thresholding.
CoefficientEstimate penalized_fit(const DataSet& data, const ThresholdRule& rule, const FitOptions& opts = {});

/// Rank-constrained fit: minimizes NLL + (eta/2)||B°||^2 subject to
/// rank(B°) <= r with the quantile thresholding iteration.
CoefficientEstimate constrained_fit(const DataSet& data, Index r, double eta, const FitOptions& opts = {});

/// Distance of B from being a fixed point of the thresholding iteration,
/// evaluated on the design divided by `scale` and reported in the units of B.
double fixed_point_residual(const DataSet& data, const Matrix& B, const ThresholdRule& rule, double scale);
/// As above with the scale the matching solver would pick.
double fixed_point_residual(const DataSet& data, const Matrix& B, const ThresholdRule& rule);

/// Default design divisor for a rule: the constrained one for quantile rules.
double solver_scale(const DataSet& data, const ThresholdRule& rule);

struct RrrSolution {
  Matrix B;
  /// Square roots of the eigenvalues of Y^T H Y, nonincreasing.
  Vector d;
  /// Eigenvectors of Y^T H Y.
  Matrix V;
  Index rank = 0;
};

/// Classical reduced-rank regression with rank r = #{i : d_i >= lambda}.
RrrSolution rrr_closed_form(const Matrix& X, const Matrix& Y, double lambda);
/// Classical reduced-rank regression at a fixed rank.
RrrSolution rrr_closed_form_rank(const Matrix& X, const Matrix& Y, Index r);

struct RidgeFit {
  Matrix C;
  bool converged = false;
  int iterations = 0;
  double kkt_residual = 0.0;
  std::string diagnostics;
};

/// Per-response Newton fit of NLL(Z, C) + (eta/2)||C°||_F^2 with the
/// intercept row (if any) unpenalized.
RidgeFit ridge_glm_fit(const Matrix& Z, const Matrix& Y, const Family& family, double eta, bool has_intercept = true);

/// max(||eta C° - Z°^T (Y - mu)||_max, ||z0^T (Y - mu)||_max).
double ridge_kkt_residual(const Matrix& Z, const Matrix& Y, const Family& family, double eta, const Matrix& C,
                          bool has_intercept = true);

struct PathSpec {
  enum class Mode { penalized, constrained };
  Mode mode = Mode::penalized;
  /// Penalized mode: the rule family; lambda is replaced by each grid value.
  ThresholdRule rule;
  std::vector<double> lambdas;
  /// Constrained mode.
  std::vector<Index> ranks;
  double eta = 0.0;
};

struct PathEntry {
  double lambda = 0.0;
  Index rank_param = 0;
  double eta = 0.0;
  ThresholdRule rule;
  std::optional<CoefficientEstimate> estimate;
  std::string error;

  bool ok() const { return estimate.has_value(); }
};

struct SolutionPath {
  std::vector<PathEntry> entries;
};

/// One fit per grid point, in grid order. Convex rules warm-start from the
/// previous grid point; everything else starts from zero and may run on
/// `jobs` threads. A failing entry records its error instead of throwing.
SolutionPath fit_path(const DataSet& data, const PathSpec& spec, const FitOptions& opts = {}, int jobs = 1);

namespace detail {

/// The shared thresholding iteration on the design divided by `scale`.
CoefficientEstimate threshold_iteration(const DataSet& data, const ThresholdRule& rule, double eta_extra,
                                        double scale, const FitOptions& opts);

}  // namespace detail

}  // namespace rrglm
