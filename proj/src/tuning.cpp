#include "rrglm/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "rrglm/errors.hpp"
#include "rrglm/extraction.hpp"
#include "rrglm/parallel.hpp"

namespace rrglm {

namespace {

// Uniform integer in [0, bound) from the raw engine output. Rejection keeps
// the result identical across standard library implementations, unlike
// std::uniform_int_distribution.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t draw = rng();
  while (draw >= limit) draw = rng();
  return draw % bound;
}

Matrix select_rows(const Matrix& A, const std::vector<Index>& rows) {
  Matrix out(static_cast<Index>(rows.size()), A.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = A.row(rows[i]);
  return out;
}

bool same_score(double a, double b) {
  if (std::isinf(a) || std::isinf(b)) return a == b;
  return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

double lambda_max(const DataSet& data, const ThresholdRule& rule, const FitOptions& opts) {
  data.validate();
  opts.validate();
  const double scale = scale_factor(data.family, data.X, rule);
  const Matrix Xs = data.X / scale;
  const Index p = data.p();
  Matrix B = Matrix::Zero(data.X.cols(), data.m());
  double worst = 0.0;
  // Follow the intercept-only trajectory the penalized iteration takes while
  // the slope block stays at zero.
  for (int it = 0; it < opts.max_iter; ++it) {
    const Matrix G = Xs.transpose() * (data.Y - mean_matrix(data.family, Xs, B));
    worst = std::max(worst, spectral_norm(G.bottomRows(p)));
    if (!data.has_intercept) break;
    const double change = G.row(0).norm() / std::max(scale, B.norm());
    B.row(0) += G.row(0);
    if (change <= 0.1 * opts.tol) break;
  }
  return worst * (1.0 + 1e-9);
}

std::vector<double> lambda_grid(const DataSet& data, const ThresholdRule& rule, int L, double ratio,
                                const FitOptions& opts) {
  if (L < 1) throw InputError("lambda_grid: L must be >= 1");
  if (!(ratio > 0.0 && ratio < 1.0)) throw InputError("lambda_grid: ratio must lie in (0, 1)");
  const double top = lambda_max(data, rule, opts);
  std::vector<double> grid(static_cast<std::size_t>(L));
  grid[0] = top;
  for (int l = 1; l < L; ++l) {
    grid[static_cast<std::size_t>(l)] = top * std::pow(ratio, static_cast<double>(l) / (L - 1));
  }
  if (L > 1) grid.back() = top * ratio;
  return grid;
}

double rank_degrees_of_freedom(Index r, Index p, Index m) {
  return static_cast<double>(r * (p + m - r) + m);
}

double bic_correction(double cv_deviance, Index n, Index r, Index p, Index m) {
  if (n < 1 || r < 0 || p < 0 || m < 0) throw InputError("bic_correction: arguments must be nonnegative");
  return cv_deviance + std::log(static_cast<double>(n)) * rank_degrees_of_freedom(r, p, m);
}

std::vector<int> assign_folds(Index n, int folds, std::uint64_t seed) {
  if (folds < 2) throw InputError("assign_folds: need at least 2 folds");
  if (n < folds) throw InputError("assign_folds: more folds than observations");
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(uniform_below(rng, i + 1));
    std::swap(order[i], order[j]);
  }
  std::vector<int> fold(static_cast<std::size_t>(n));
  const Index base = n / folds;
  const Index extra = n % folds;
  std::size_t pos = 0;
  for (int k = 0; k < folds; ++k) {
    const Index size = base + (k < extra ? 1 : 0);
    for (Index c = 0; c < size; ++c) fold[static_cast<std::size_t>(order[pos++])] = k;
  }
  return fold;
}

Matrix pcv_design(const DataSet& data, const CoefficientEstimate& est) {
  if (est.rank == 0) return data.has_intercept ? Matrix(data.X.leftCols(1)) : Matrix(data.n(), 0);
  return extract_type1(est, data.X).Z;
}

PcvReport pcv(const DataSet& data, const SolutionPath& path, const PcvOptions& opts) {
  data.validate();
  if (path.entries.empty()) throw InputError("pcv: empty solution path");
  if (opts.folds < 2) throw InputError("pcv: need at least 2 folds");
  if (opts.eta && !(*opts.eta >= 0.0)) throw InputError("pcv: eta must be >= 0");

  PcvReport report;
  report.folds = opts.folds;
  report.use_bic = opts.use_bic;
  report.seed = opts.seed;
  const std::vector<int> fold = assign_folds(data.n(), opts.folds, opts.seed);
  std::vector<std::vector<Index>> test_rows(static_cast<std::size_t>(opts.folds));
  std::vector<std::vector<Index>> train_rows(static_cast<std::size_t>(opts.folds));
  for (Index i = 0; i < data.n(); ++i) {
    for (int k = 0; k < opts.folds; ++k) {
      (fold[static_cast<std::size_t>(i)] == k ? test_rows : train_rows)[static_cast<std::size_t>(k)].push_back(i);
    }
  }
  for (const auto& rows : test_rows) report.fold_sizes.push_back(static_cast<Index>(rows.size()));

  report.candidates.resize(path.entries.size());
  parallel_for(path.entries.size(), opts.jobs, [&](std::size_t l) {
    const PathEntry& entry = path.entries[l];
    PcvCandidate& cand = report.candidates[l];
    cand.index = l;
    cand.lambda = entry.lambda;
    cand.rank_param = entry.rank_param;
    cand.eta = opts.eta ? *opts.eta : entry.eta;
    cand.score = std::numeric_limits<double>::infinity();
    cand.cv_deviance = std::numeric_limits<double>::infinity();
    if (!entry.ok()) {
      cand.note = "path entry failed: " + entry.error;
      return;
    }
    const CoefficientEstimate& est = *entry.estimate;
    cand.rank = est.rank;
    try {
      const Matrix Z = pcv_design(data, est);
      const double ridge = cand.eta * est.scale * est.scale;
      double total = 0.0;
      for (int k = 0; k < opts.folds; ++k) {
        const auto& tr = train_rows[static_cast<std::size_t>(k)];
        const auto& te = test_rows[static_cast<std::size_t>(k)];
        const RidgeFit fit = ridge_glm_fit(select_rows(Z, tr), select_rows(data.Y, tr), data.family, ridge,
                                           data.has_intercept);
        if (!fit.converged) {
          cand.note = "fold " + std::to_string(k) + ": " + fit.diagnostics;
          return;
        }
        total += deviance_linear(data.family, select_rows(data.Y, te), select_rows(Z, te) * fit.C);
      }
      cand.cv_deviance = total;
      cand.score = opts.use_bic ? bic_correction(total, data.n(), est.rank, data.p(), data.m()) : total;
      cand.ok = std::isfinite(cand.score);
    } catch (const Error& e) {
      cand.note = e.what();
    }
  });

  report.selected = select_candidate(report.candidates);
  return report;
}

std::size_t select_candidate(const std::vector<PcvCandidate>& candidates) {
  if (candidates.empty()) throw InputError("select_candidate: no candidates");
  std::size_t best = 0;
  for (std::size_t l = 1; l < candidates.size(); ++l) {
    const PcvCandidate& c = candidates[l];
    const PcvCandidate& b = candidates[best];
    if (same_score(c.score, b.score)) {
      if (c.rank < b.rank) best = l;
    } else if (c.score < b.score) {
      best = l;
    }
  }
  return best;
}

}  // namespace rrglm
