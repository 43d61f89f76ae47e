#pragma once

#include <string_view>
#include <vector>

#include "rrglm/family.hpp"
#include "rrglm/linalg.hpp"
#include "rrglm/solvers.hpp"

namespace rrglm {

enum class ExtractionKind { type1, type1_scaled, type2 };

std::string_view extraction_name(ExtractionKind kind);
ExtractionKind parse_extraction(std::string_view name);

/// New features built from a low-rank estimate.
///
/// `Z` is the new design: the intercept column (when present) followed by
/// the r extracted features X° * transform.
struct ExtractionResult {
  Matrix Z;
  Matrix transform;
  ExtractionKind kind = ExtractionKind::type1;
  bool has_intercept = true;

  Index rank() const { return transform.cols(); }
  Matrix features() const { return Z.rightCols(transform.cols()); }
};

/// Z° = X° U (or X° U D when `scaled`), U and D from the thin SVD of the
/// slope block truncated at its numerical rank. X uses the estimate's
/// intercept convention.
ExtractionResult extract_type1(const CoefficientEstimate& estimate, const Matrix& X, bool scaled = false);

/// Z° = X° (B° V) with V the top-r eigenvectors of B°^T X°^T X° B°, so that
/// Z°^T Z° is diagonal and X° B° = Z° V^T.
ExtractionResult extract_type2(const CoefficientEstimate& estimate, const Matrix& X);

ExtractionResult extract(const CoefficientEstimate& estimate, const Matrix& X, ExtractionKind kind);

/// Rank sequence r(0) = start > r(1) > ... > r(T) = target, with
/// r(t+1) = max(target, min(r(t) - 1, ceil(decay * r(t)))).
struct CoolingSchedule {
  Index start = 1;
  Index target = 1;
  double decay = 0.7;
  /// Cap on constrained updates per stage.
  int max_updates = 500;

  static CoolingSchedule geometric(Index start, Index target, double decay = 0.7, int max_updates = 500);

  void validate() const;
  std::vector<Index> ranks() const;
};

/// r = floor(alpha n) ∧ p ∧ m, at least 1.
Index default_reduction_target(Index n, Index p, Index m, double alpha = 0.5);

struct ReductionResult {
  /// [x0, Z°] with the original responses and family.
  DataSet reduced;
  /// Accumulated p x target transform U° with orthonormal columns.
  Matrix transform;
  /// Last coefficient iterate in reduced coordinates.
  Matrix B;
  /// r(1), ..., r(T).
  std::vector<Index> stage_ranks;
  /// Per-stage constrained iterations (before projection).
  std::vector<CoefficientEstimate> stages;
  /// Worst ||U°^T U° - I||_max seen after any stage.
  double orthogonality_error = 0.0;
};

/// Progressive (annealed) feature-space reduction down to `target` slope
/// features.
ReductionResult progressive_reduce(const DataSet& data, Index target, const CoolingSchedule& schedule,
                                   double eta = 0.0, const FitOptions& opts = {});

}  // namespace rrglm
