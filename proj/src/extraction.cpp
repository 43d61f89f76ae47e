#include "rrglm/extraction.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rrglm/errors.hpp"

namespace rrglm {

namespace {

void require_layout(const CoefficientEstimate& est, const Matrix& X) {
  if (X.cols() != est.B.rows()) {
    throw InputError("extraction: design has " + std::to_string(X.cols()) + " columns, estimate expects " +
                     std::to_string(est.B.rows()));
  }
  if (est.rank < 1) throw EmptyExtractionError("extraction: estimate has rank 0, nothing to extract");
}

Matrix assemble(const Matrix& X, bool has_intercept, const Matrix& features) {
  if (!has_intercept) return features;
  Matrix Z(X.rows(), features.cols() + 1);
  Z.col(0) = X.col(0);
  Z.rightCols(features.cols()) = features;
  return Z;
}

}  // namespace

std::string_view extraction_name(ExtractionKind kind) {
  switch (kind) {
    case ExtractionKind::type1: return "type1";
    case ExtractionKind::type1_scaled: return "type1_scaled";
    case ExtractionKind::type2: return "type2";
  }
  return "type1";
}

ExtractionKind parse_extraction(std::string_view name) {
  if (name == "type1" || name == "1") return ExtractionKind::type1;
  if (name == "type1_scaled" || name == "1s") return ExtractionKind::type1_scaled;
  if (name == "type2" || name == "2") return ExtractionKind::type2;
  throw InputError("unknown extraction type '" + std::string(name) + "'");
}

ExtractionResult extract_type1(const CoefficientEstimate& est, const Matrix& X, bool scaled) {
  require_layout(est, X);
  const Index r = est.rank;
  const Index first = est.has_intercept ? 1 : 0;
  const auto Xs = X.rightCols(X.cols() - first);

  ExtractionResult out;
  out.kind = scaled ? ExtractionKind::type1_scaled : ExtractionKind::type1;
  out.has_intercept = est.has_intercept;
  out.transform = est.slope_svd.U.leftCols(r);
  if (scaled) out.transform = out.transform * est.slope_svd.s.head(r).asDiagonal();
  out.Z = assemble(X, est.has_intercept, Xs * out.transform);
  return out;
}

ExtractionResult extract_type2(const CoefficientEstimate& est, const Matrix& X) {
  require_layout(est, X);
  const Index r = est.rank;
  const Index first = est.has_intercept ? 1 : 0;
  const auto Xs = X.rightCols(X.cols() - first);
  const Matrix slope = est.slope();
  const Matrix fitted = Xs * slope;
  Matrix gram = fitted.transpose() * fitted;
  gram = 0.5 * (gram + gram.transpose());
  const SymEig eig = sym_eig(gram);

  ExtractionResult out;
  out.kind = ExtractionKind::type2;
  out.has_intercept = est.has_intercept;
  const Matrix V = eig.vectors.leftCols(r);
  out.transform = slope * V;
  out.Z = assemble(X, est.has_intercept, fitted * V);
  return out;
}

ExtractionResult extract(const CoefficientEstimate& est, const Matrix& X, ExtractionKind kind) {
  switch (kind) {
    case ExtractionKind::type1: return extract_type1(est, X, false);
    case ExtractionKind::type1_scaled: return extract_type1(est, X, true);
    case ExtractionKind::type2: return extract_type2(est, X);
  }
  return extract_type1(est, X, false);
}

CoolingSchedule CoolingSchedule::geometric(Index start, Index target, double decay, int max_updates) {
  CoolingSchedule s;
  s.start = start;
  s.target = target;
  s.decay = decay;
  s.max_updates = max_updates;
  s.validate();
  return s;
}

void CoolingSchedule::validate() const {
  if (target < 1) throw InputError("cooling schedule: target rank must be >= 1");
  if (start < target) throw InputError("cooling schedule: start rank below target");
  if (!(decay > 0.0 && decay < 1.0)) throw InputError("cooling schedule: decay must lie in (0, 1)");
  if (max_updates < 1) throw InputError("cooling schedule: max_updates must be >= 1");
}

std::vector<Index> CoolingSchedule::ranks() const {
  validate();
  std::vector<Index> out{start};
  while (out.back() > target) {
    const Index cur = out.back();
    const auto shrunk = static_cast<Index>(std::ceil(decay * static_cast<double>(cur)));
    out.push_back(std::max(target, std::min(cur - 1, shrunk)));
  }
  return out;
}

Index default_reduction_target(Index n, Index p, Index m, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("reduction target: alpha must lie in (0, 1)");
  const auto scaled = static_cast<Index>(std::floor(alpha * static_cast<double>(n)));
  return std::max<Index>(1, std::min({scaled, p, m}));
}

ReductionResult progressive_reduce(const DataSet& data, Index target, const CoolingSchedule& schedule, double eta,
                                   const FitOptions& opts) {
  data.validate();
  opts.validate();
  if (target < 1) throw InputError("progressive_reduce: target rank must be >= 1");
  if (target > data.p()) throw InputError("progressive_reduce: target rank exceeds the number of predictors");
  if (schedule.start != data.p()) throw InputError("progressive_reduce: schedule must start at p");
  if (schedule.target != target) throw InputError("progressive_reduce: schedule target differs from target");
  if (!(eta >= 0.0)) throw InputError("progressive_reduce: eta must be >= 0");

  const Index first = data.first_slope();
  ReductionResult out;
  out.reduced = data;
  out.transform = Matrix::Identity(data.p(), data.p());
  out.B = opts.start ? *opts.start : Matrix::Zero(data.X.cols(), data.m());

  const std::vector<Index> ranks = schedule.ranks();
  for (std::size_t t = 1; t < ranks.size(); ++t) {
    const Index r = ranks[t];
    DataSet& cur = out.reduced;
    const Index d = cur.p();

    FitOptions stage_opts = opts;
    stage_opts.max_iter = schedule.max_updates;
    const ThresholdRule rule = ThresholdRule::quantile(r, eta);
    // Truncate the carried-over coefficients to the stage rank so that the
    // stage starts from a feasible point.
    Matrix start = out.B;
    start.bottomRows(d) = apply_matrix(ThresholdRule::quantile(r, 0.0), start.bottomRows(d));
    stage_opts.start = std::move(start);
    CoefficientEstimate stage = detail::threshold_iteration(
        cur, rule, eta, constrained_scale_factor(cur.family, cur.X), stage_opts);

    const Index kept = std::min(r, stage.slope_svd.U.cols());
    const Matrix U1 = complete_orthonormal(stage.slope_svd.U.leftCols(kept), r);

    Matrix Z(cur.n(), first + r);
    if (cur.has_intercept) Z.col(0) = cur.X.col(0);
    Z.rightCols(r) = cur.X.rightCols(d) * U1;
    Matrix B(first + r, cur.m());
    if (cur.has_intercept) B.row(0) = stage.B.row(0);
    B.bottomRows(r) = U1.transpose() * stage.slope();

    cur.X = std::move(Z);
    out.B = std::move(B);
    out.transform = out.transform * U1;
    out.stage_ranks.push_back(r);
    out.stages.push_back(std::move(stage));
    const Matrix gram = out.transform.transpose() * out.transform;
    out.orthogonality_error =
        std::max(out.orthogonality_error, (gram - Matrix::Identity(r, r)).cwiseAbs().maxCoeff());
  }
  return out;
}

}  // namespace rrglm
