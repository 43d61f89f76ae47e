#include "rrglm/oracles.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "rrglm/errors.hpp"

namespace rrglm::oracles {

namespace {

Matrix gaussian_matrix(std::mt19937_64& rng, Index rows, Index cols, double sd = 1.0) {
  std::normal_distribution<double> normal(0.0, sd);
  Matrix A(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) A(i, j) = normal(rng);
  }
  return A;
}

void record(OracleVerdict& v, double gap, const std::string& witness, double tol) {
  if (gap > v.gap || (v.witness.empty() && gap >= v.gap)) {
    v.gap = gap;
    v.witness = witness;
  }
  if (gap > tol) v.pass = false;
}

}  // namespace

double matrix_approx_objective(const Matrix& Y, const Matrix& B, const ThresholdRule& rule) {
  return 0.5 * (Y - B).squaredNorm() + penalty_matrix(rule, B);
}

MatrixApproxOptimum matrix_approx_oracle(const Matrix& Y, const ThresholdRule& rule, double grid_resolution) {
  if (rule.kind == RuleKind::quantile) throw UsageError("matrix_approx_oracle: quantile rule has no penalty");
  if (Y.rows() > 5 || Y.cols() > 5) throw InputError("matrix_approx_oracle: Y is limited to 5x5");
  const ThinSvd svd = thin_svd(Y);
  const double norm = svd.size() > 0 ? svd.s(0) : 0.0;
  if (!(grid_resolution > 0.0) || (norm > 0.0 && grid_resolution > 1e-3 * norm)) {
    throw InputError("matrix_approx_oracle: grid resolution must be positive and <= 1e-3 ||Y||_2");
  }
  Vector theta = Vector::Zero(svd.size());
  double value = 0.0;
  for (Index i = 0; i < svd.size(); ++i) {
    const double sigma = svd.s(i);
    const auto steps = static_cast<long>(std::ceil(sigma / grid_resolution));
    double best = 0.5 * sigma * sigma + penalty_scalar(rule, 0.0);
    double arg = 0.0;
    for (long j = 1; j <= steps; ++j) {
      const double t = std::min(sigma, static_cast<double>(j) * grid_resolution);
      const double f = 0.5 * (sigma - t) * (sigma - t) + penalty_scalar(rule, t);
      if (f < best) {
        best = f;
        arg = t;
      }
    }
    theta(i) = arg;
    value += best;
  }
  return {svd.U * theta.asDiagonal() * svd.V.transpose(), value};
}

double rank_penalty_enumeration(const Matrix& Y, double lambda) {
  const Vector s = thin_svd(Y).s;
  double best = std::numeric_limits<double>::infinity();
  for (Index k = 0; k <= s.size(); ++k) {
    const double tail = s.tail(s.size() - k).squaredNorm();
    best = std::min(best, 0.5 * tail + 0.5 * lambda * lambda * static_cast<double>(k));
  }
  return best;
}

MatrixApproxOptimum rank_constrained_enumeration(const Matrix& Y, Index r, double eta) {
  const ThinSvd svd = thin_svd(Y);
  const Index k = svd.size();
  if (k > 16) throw InputError("rank_constrained_enumeration: too many singular values to enumerate");
  MatrixApproxOptimum best{Matrix::Zero(Y.rows(), Y.cols()), std::numeric_limits<double>::infinity()};
  for (unsigned mask = 0; mask < (1u << k); ++mask) {
    if (std::popcount(mask) > r) continue;
    Vector theta = Vector::Zero(k);
    for (Index i = 0; i < k; ++i) {
      if (mask & (1u << i)) theta(i) = svd.s(i) / (1.0 + eta);
    }
    const Matrix B = svd.U * theta.asDiagonal() * svd.V.transpose();
    const double value = 0.5 * (Y - B).squaredNorm() + 0.5 * eta * B.squaredNorm();
    if (value < best.value) best = {B, value};
  }
  return best;
}

OracleVerdict von_neumann_check(const Matrix& A, const Matrix& B, double tol) {
  if (A.cols() != B.rows() || A.rows() != B.cols()) {
    throw InputError("von_neumann_check: A is n x m, B must be m x n");
  }
  const Index k = std::max(A.rows(), A.cols());
  Matrix Ap = Matrix::Zero(k, k);
  Matrix Bp = Matrix::Zero(k, k);
  Ap.topLeftCorner(A.rows(), A.cols()) = A;
  Bp.topLeftCorner(B.rows(), B.cols()) = B;
  const Vector sa = thin_svd(Ap).s;
  const Vector sb = thin_svd(Bp).s;
  const double bound = sa.dot(sb);
  const double trace = std::abs((Ap * Bp).trace());
  OracleVerdict v;
  v.gap = std::max(0.0, trace - bound);
  v.pass = v.gap <= tol;
  std::ostringstream w;
  w.precision(17);
  w << "|tr(AB)|=" << trace << " bound=" << bound;
  v.witness = w.str();
  return v;
}

OracleVerdict von_neumann_trials(int trials, Index dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  OracleVerdict out;
  for (int t = 0; t < trials; ++t) {
    const Matrix A = gaussian_matrix(rng, dim, dim);
    const Matrix B = gaussian_matrix(rng, dim, dim);
    const OracleVerdict v = von_neumann_check(A, B);
    record(out, v.gap, "trial " + std::to_string(t) + ": " + v.witness, 1e-10);
  }
  return out;
}

OracleVerdict perturbation_check(const Matrix& Y, const ThresholdRule& rule, int trials, std::uint64_t seed,
                                 double delta_scale, double tol) {
  if (rule.kind == RuleKind::quantile || rule.curvature() != 0.0) {
    throw UsageError("perturbation_check: needs a rule with curvature constant 0 (soft, ridge, berhu)");
  }
  if (!(delta_scale >= 0.0)) throw InputError("perturbation_check: delta_scale must be >= 0");
  const Matrix Bhat = apply_matrix(rule, Y);
  const double base = matrix_approx_objective(Y, Bhat, rule);
  std::mt19937_64 rng(seed);
  OracleVerdict out;
  for (int t = 0; t < trials; ++t) {
    const Matrix D = delta_scale * gaussian_matrix(rng, Y.rows(), Y.cols());
    const double rise = matrix_approx_objective(Y, Bhat + D, rule) - base;
    const double gap = std::max(0.0, 0.5 * D.squaredNorm() - rise);
    record(out, gap, "trial " + std::to_string(t), tol);
  }
  return out;
}

OracleVerdict finite_diff_gradcheck(const Family& family, const Matrix& X, const Matrix& Y, const Matrix& B,
                                    double step, double tol) {
  if (!(step >= 1e-7 && step <= 1e-3)) throw InputError("finite_diff_gradcheck: step must lie in [1e-7, 1e-3]");
  const Matrix analytic = X.transpose() * (mean_matrix(family, X, B) - Y);
  OracleVerdict out;
  Matrix probe = B;
  for (Index j = 0; j < B.cols(); ++j) {
    for (Index i = 0; i < B.rows(); ++i) {
      const double orig = probe(i, j);
      probe(i, j) = orig + step;
      const double up = neg_log_likelihood(family, X, Y, probe);
      probe(i, j) = orig - step;
      const double down = neg_log_likelihood(family, X, Y, probe);
      probe(i, j) = orig;
      const double numeric = (up - down) / (2.0 * step);
      record(out, std::abs(numeric - analytic(i, j)), "entry (" + std::to_string(i) + ", " + std::to_string(j) + ")",
             tol);
    }
  }
  return out;
}

std::vector<NamedVerdict> run_oracle_suite(std::uint64_t seed) {
  std::vector<NamedVerdict> out;
  std::mt19937_64 rng(seed);

  out.push_back({"von_neumann (1000 random 4x4 pairs)", von_neumann_trials(1000, 4, seed)});

  const std::vector<ThresholdRule> convex = {ThresholdRule::soft(0.7), ThresholdRule::ridge(0.5),
                                             ThresholdRule::berhu(0.6, 0.8)};
  for (const auto& rule : convex) {
    const Matrix Y = gaussian_matrix(rng, 4, 3);
    out.push_back({"perturbation " + rule.to_string() + " (200 trials)", perturbation_check(Y, rule, 200, rng())});
  }

  for (const Family family : {Family::gaussian(), Family::bernoulli()}) {
    const Matrix X = gaussian_matrix(rng, 6, 4);
    Matrix Y = gaussian_matrix(rng, 6, 3);
    if (family.kind == FamilyKind::bernoulli) Y = Y.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
    const Matrix B = gaussian_matrix(rng, 4, 3, 0.5);
    out.push_back({"gradcheck " + std::string(family.name()), finite_diff_gradcheck(family, X, Y, B)});
  }

  const std::vector<ThresholdRule> rules = {ThresholdRule::soft(0.8), ThresholdRule::hard(1.1),
                                            ThresholdRule::ridge(0.6), ThresholdRule::hard_ridge(1.0, 0.3),
                                            ThresholdRule::berhu(0.7, 0.9)};
  for (const auto& rule : rules) {
    OracleVerdict v;
    for (int t = 0; t < 10; ++t) {
      const Matrix Y = gaussian_matrix(rng, 4, 3);
      const double attained = matrix_approx_objective(Y, apply_matrix(rule, Y), rule);
      const double oracle = matrix_approx_oracle(Y, rule, 1e-4).value;
      record(v, std::abs(attained - oracle), "trial " + std::to_string(t), 1e-4);
    }
    out.push_back({"matrix approximation " + rule.to_string(), v});
  }
  return out;
}

}  // namespace rrglm::oracles
