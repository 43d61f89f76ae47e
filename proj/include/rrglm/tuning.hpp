#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rrglm/family.hpp"
#include "rrglm/solvers.hpp"

namespace rrglm {

/// Smallest threshold that keeps the slope block at zero when the penalized
/// iteration starts from zero, in the solver's scaled units.
double lambda_max(const DataSet& data, const ThresholdRule& rule, const FitOptions& opts = {});

/// L values from lambda_max down to lambda_max * ratio, log-spaced and
/// descending.
std::vector<double> lambda_grid(const DataSet& data, const ThresholdRule& rule, int L, double ratio,
                                const FitOptions& opts = {});

/// Degrees of freedom of a rank-r p x m coefficient matrix plus m intercepts.
double rank_degrees_of_freedom(Index r, Index p, Index m);

/// cv_deviance + log(n) * (r (p + m - r) + m).
double bic_correction(double cv_deviance, Index n, Index r, Index p, Index m);

/// Seeded shuffle split into `folds` contiguous blocks whose sizes differ by
/// at most one. Returns the fold index of every observation.
std::vector<int> assign_folds(Index n, int folds, std::uint64_t seed);

struct PcvOptions {
  int folds = 5;
  bool use_bic = false;
  std::uint64_t seed = 1;
  /// Ridge parameter of the per-fold refits in the solver's scaled units;
  /// each path entry's own eta when unset.
  std::optional<double> eta;
  int jobs = 1;
};

struct PcvCandidate {
  std::size_t index = 0;
  double lambda = 0.0;
  Index rank_param = 0;
  double eta = 0.0;
  Index rank = 0;
  double cv_deviance = 0.0;
  double score = 0.0;
  bool ok = false;
  std::string note;
};

struct PcvReport {
  std::vector<PcvCandidate> candidates;
  std::size_t selected = 0;
  int folds = 0;
  bool use_bic = false;
  std::uint64_t seed = 0;
  std::vector<Index> fold_sizes;

  const PcvCandidate& best() const { return candidates.at(selected); }
};

/// Index of the smallest score. Scores equal to 1e-12 relative count as
/// tied; ties go to the smaller rank, then to the earlier candidate.
std::size_t select_candidate(const std::vector<PcvCandidate>& candidates);

/// Projective cross-validation over a solution path computed on the whole
/// data set.
PcvReport pcv(const DataSet& data, const SolutionPath& path, const PcvOptions& opts = {});

/// Candidate design for PCV: [x0, X° U] from the Type-I basis of the
/// estimate (intercept only at rank 0).
Matrix pcv_design(const DataSet& data, const CoefficientEstimate& estimate);

}  // namespace rrglm
