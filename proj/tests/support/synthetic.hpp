#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "rrglm/family.hpp"
#include "rrglm/linalg.hpp"

namespace rrglm::testing {

Matrix gaussian(std::mt19937_64& rng, Index rows, Index cols, double sd = 1.0);

/// rows x k matrix with orthonormal columns.
Matrix orthonormal(std::mt19937_64& rng, Index rows, Index k);

struct LowRankProblem {
  DataSet data;
  /// True slope block B°.
  Matrix slope;
  /// True intercepts (zero without an intercept).
  Vector intercept;
};

/// Y = 1 b0^T + X° B° + noise with B° = U diag(singular) V^T and standard
/// normal predictors.
LowRankProblem gaussian_low_rank(std::uint64_t seed, Index n, Index p, Index m, const std::vector<double>& singular,
                                 double noise_sd, bool intercept = true);

/// Bernoulli responses with logits 1 b0^T + X° B°, B° = scale U V^T of the
/// given rank and intercepts drawn from N(0, 0.25).
LowRankProblem bernoulli_low_rank(std::uint64_t seed, Index n, Index p, Index m, Index rank, double scale);

/// ||(I - P_Z) A||_F / ||A||_F with P_Z the projector onto span(Z).
double subspace_residual(const Matrix& A, const Matrix& Z);

/// Largest sine of the principal angles between span(A) and span(B).
double max_principal_sine(const Matrix& A, const Matrix& B);

}  // namespace rrglm::testing
