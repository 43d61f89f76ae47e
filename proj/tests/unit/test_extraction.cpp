#include <doctest.h>

#include <random>

#include "rrglm/errors.hpp"
#include "rrglm/extraction.hpp"
#include "synthetic.hpp"

using namespace rrglm;

namespace {

CoefficientEstimate estimate_of(const Matrix& B, bool has_intercept = true) {
  CoefficientEstimate est;
  est.B = B;
  est.has_intercept = has_intercept;
  est.slope_svd = thin_svd(est.slope());
  est.rank = numerical_rank(est.slope_svd.s);
  return est;
}

Matrix with_intercept(const Matrix& slope, std::mt19937_64& rng) {
  Matrix B(slope.rows() + 1, slope.cols());
  B.row(0) = testing::gaussian(rng, 1, slope.cols());
  B.bottomRows(slope.rows()) = slope;
  return B;
}

Matrix design(std::mt19937_64& rng, Index n, Index p) {
  Matrix X(n, p + 1);
  X.col(0).setOnes();
  X.rightCols(p) = testing::gaussian(rng, n, p);
  return X;
}

double max_offdiag_ratio(const Matrix& G) {
  double off = 0.0;
  for (Index i = 0; i < G.rows(); ++i) {
    for (Index j = 0; j < G.cols(); ++j) {
      if (i != j) off = std::max(off, std::abs(G(i, j)));
    }
  }
  return off / G.diagonal().cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("type-I on a canonical rank-one estimate picks the first predictor") {
  std::mt19937_64 rng(1);
  const Matrix X = design(rng, 10, 4);
  Matrix slope = Matrix::Zero(4, 3);
  slope(0, 0) = 1.0;
  const ExtractionResult r = extract_type1(estimate_of(with_intercept(slope, rng)), X);
  REQUIRE(r.rank() == 1);
  CHECK((r.features().col(0) - X.col(1)).norm() <= 1e-14);
  CHECK((r.Z.col(0).array() == 1.0).all());
}

TEST_CASE("type-I features and reconstruction") {
  std::mt19937_64 rng(2);
  const Matrix X = design(rng, 30, 6);
  const Matrix slope = testing::gaussian(rng, 6, 2) * testing::gaussian(rng, 2, 4);
  const CoefficientEstimate est = estimate_of(with_intercept(slope, rng));
  REQUIRE(est.rank == 2);
  const ExtractionResult r = extract_type1(est, X);
  CHECK(r.Z.cols() == 3);
  CHECK(r.features().cols() == 2);
  const Matrix U = r.transform;
  CHECK((U.transpose() * U - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-8);
  const Matrix DVt = est.slope_svd.s.head(2).asDiagonal() * est.slope_svd.V.leftCols(2).transpose();
  const Matrix lhs = X.rightCols(6) * slope;
  CHECK((lhs - r.features() * DVt).norm() <= 1e-8 * std::max(1.0, lhs.norm()));

  const ExtractionResult s = extract_type1(est, X, true);
  CHECK(s.kind == ExtractionKind::type1_scaled);
  CHECK((lhs - s.features() * est.slope_svd.V.leftCols(2).transpose()).norm() <= 1e-8 * lhs.norm());
}

TEST_CASE("type-II decorrelates and reconstructs") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 10; ++t) {
    const Matrix X = design(rng, 40, 6);
    const Matrix slope = testing::gaussian(rng, 6, 2) * testing::gaussian(rng, 2, 5);
    const CoefficientEstimate est = estimate_of(with_intercept(slope, rng));
    const ExtractionResult r = extract_type2(est, X);
    REQUIRE(r.rank() == 2);
    const Matrix Zs = r.features();
    CHECK(max_offdiag_ratio(Zs.transpose() * Zs) <= 1e-8);
    const Matrix fitted = X.rightCols(6) * slope;
    const SymEig eig = sym_eig(fitted.transpose() * fitted);
    CHECK((fitted - Zs * eig.vectors.leftCols(2).transpose()).norm() <= 1e-8 * fitted.norm());
  }
}

TEST_CASE("type-II with a single response is the fitted predictor up to sign") {
  std::mt19937_64 rng(4);
  const Matrix X = design(rng, 20, 3);
  const Matrix slope = testing::gaussian(rng, 3, 1);
  const ExtractionResult r = extract_type2(estimate_of(with_intercept(slope, rng)), X);
  const Vector fitted = X.rightCols(3) * slope;
  const Vector z = r.features().col(0);
  CHECK(std::min((z - fitted).norm(), (z + fitted).norm()) <= 1e-10 * fitted.norm());
}

TEST_CASE("type-I and type-II span the same space for reduced-rank regression") {
  const auto prob = testing::gaussian_low_rank(5, 80, 6, 5, {4.0, 2.0}, 0.5, false);
  const RrrSolution rrr = rrr_closed_form_rank(prob.data.X, prob.data.Y, 2);
  const CoefficientEstimate est = estimate_of(rrr.B, false);
  const ExtractionResult a = extract_type1(est, prob.data.X);
  const ExtractionResult b = extract_type2(est, prob.data.X);
  CHECK(testing::max_principal_sine(a.Z, b.Z) <= 1e-6);
}

TEST_CASE("rank-zero estimates cannot be extracted") {
  std::mt19937_64 rng(6);
  const Matrix X = design(rng, 10, 3);
  const CoefficientEstimate est = estimate_of(Matrix::Zero(4, 2));
  CHECK_THROWS_AS(extract_type1(est, X), EmptyExtractionError);
  CHECK_THROWS_AS(extract_type2(est, X), EmptyExtractionError);
  CHECK_THROWS_AS(extract_type1(estimate_of(Matrix::Ones(3, 2)), X), InputError);
}

TEST_CASE("extraction kind names") {
  CHECK(parse_extraction("1") == ExtractionKind::type1);
  CHECK(parse_extraction("1s") == ExtractionKind::type1_scaled);
  CHECK(parse_extraction("type2") == ExtractionKind::type2);
  CHECK(extraction_name(ExtractionKind::type2) == "type2");
  CHECK_THROWS_AS(parse_extraction("3"), InputError);
}

TEST_CASE("cooling schedule") {
  const auto ranks = CoolingSchedule::geometric(50, 5).ranks();
  CHECK(ranks.front() == 50);
  CHECK(ranks.back() == 5);
  for (std::size_t i = 1; i < ranks.size(); ++i) CHECK(ranks[i] < ranks[i - 1]);
  CHECK(ranks[1] == 35);
  const auto small = CoolingSchedule::geometric(3, 1).ranks();
  CHECK(small == std::vector<Index>{3, 2, 1});
  CHECK(CoolingSchedule::geometric(4, 4).ranks() == std::vector<Index>{4});
  CHECK_THROWS_AS(CoolingSchedule::geometric(4, 0), InputError);
  CHECK_THROWS_AS(CoolingSchedule::geometric(4, 5), InputError);
  CHECK_THROWS_AS(CoolingSchedule::geometric(4, 2, 1.0), InputError);
}

TEST_CASE("default reduction target") {
  CHECK(default_reduction_target(10, 50, 8) == 5);
  CHECK(default_reduction_target(100, 50, 8) == 8);
  CHECK(default_reduction_target(100, 3, 8) == 3);
  CHECK(default_reduction_target(1, 3, 8) == 1);
}

TEST_CASE("degenerate reduction leaves the design unchanged") {
  const auto prob = testing::gaussian_low_rank(7, 30, 4, 3, {2.0}, 1.0);
  const ReductionResult r = progressive_reduce(prob.data, 4, CoolingSchedule::geometric(4, 4));
  CHECK(r.reduced.X == prob.data.X);
  CHECK(r.transform == Matrix::Identity(4, 4));
  CHECK(r.stage_ranks.empty());
}

TEST_CASE("progressive reduction keeps a noiseless rank-one signal") {
  const auto prob = testing::gaussian_low_rank(8, 200, 50, 8, {3.0}, 0.0);
  const ReductionResult r = progressive_reduce(prob.data, 3, CoolingSchedule::geometric(50, 3));
  REQUIRE(r.reduced.X.cols() == 4);
  REQUIRE(r.transform.rows() == 50);
  REQUIRE(r.transform.cols() == 3);
  const Matrix Xs = prob.data.X.rightCols(50);
  const Matrix Zs = r.reduced.X.rightCols(3);
  CHECK((Zs - Xs * r.transform).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(r.orthogonality_error <= 1e-8);
  CHECK(testing::subspace_residual(Xs * prob.slope, Zs) <= 1e-6);
  CHECK(r.stage_ranks.back() == 3);
  CHECK(r.reduced.Y == prob.data.Y);
}

TEST_CASE("likelihood is preserved under the reduced parameterization") {
  const auto prob = testing::bernoulli_low_rank(9, 60, 8, 4, 2, 1.0);
  const ReductionResult r = progressive_reduce(prob.data, 3, CoolingSchedule::geometric(8, 3, 0.7, 50));
  std::mt19937_64 rng(10);
  const Matrix C = testing::gaussian(rng, 4, 4, 0.3);
  Matrix B(9, 4);
  B.row(0) = C.row(0);
  B.bottomRows(8) = r.transform * C.bottomRows(3);
  const double a = neg_log_likelihood(prob.data.family, r.reduced.X, prob.data.Y, C);
  const double b = neg_log_likelihood(prob.data.family, prob.data.X, prob.data.Y, B);
  CHECK(std::abs(a - b) <= 1e-10 * std::max(1.0, std::abs(a)));
}

TEST_CASE("progressive reduction argument checks") {
  const auto prob = testing::gaussian_low_rank(11, 30, 6, 3, {2.0}, 1.0);
  CHECK_THROWS_AS(progressive_reduce(prob.data, 0, CoolingSchedule{6, 0}), InputError);
  CHECK_THROWS_AS(progressive_reduce(prob.data, 7, CoolingSchedule::geometric(7, 7)), InputError);
  CHECK_THROWS_AS(progressive_reduce(prob.data, 2, CoolingSchedule::geometric(5, 2)), InputError);
}
