#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rrglm/family.hpp"
#include "rrglm/linalg.hpp"
#include "rrglm/thresholding.hpp"

// Brute-force and analytic checks used by the test suites and by the
// `verify` subcommand. Nothing in the library proper depends on them.
namespace rrglm::oracles {

struct OracleVerdict {
  bool pass = true;
  /// Worst violation seen; zero when every check holds exactly.
  double gap = 0.0;
  /// Which input produced the worst gap.
  std::string witness;
};

struct MatrixApproxOptimum {
  Matrix B;
  double value = 0.0;
};

/// ||Y - B||_F^2 / 2 + sum P(sigma_i(B)).
double matrix_approx_objective(const Matrix& Y, const Matrix& B, const ThresholdRule& rule);

/// Minimizes matrix_approx_objective by reducing to one scalar problem per
/// singular value of Y and grid-searching each over [0, sigma_i] with the
/// given spacing.
MatrixApproxOptimum matrix_approx_oracle(const Matrix& Y, const ThresholdRule& rule, double grid_resolution = 1e-4);

/// Optimal value of ||Y - B||_F^2 / 2 + (lambda^2 / 2) rank(B) by
/// enumerating truncation ranks.
double rank_penalty_enumeration(const Matrix& Y, double lambda);

/// Minimizes ||Y - B||_F^2 / 2 + (eta / 2) ||B||_F^2 over rank(B) <= r by
/// enumerating every subset of at most r singular triplets of Y.
MatrixApproxOptimum rank_constrained_enumeration(const Matrix& Y, Index r, double eta);

/// |Tr(AB)| <= sum sigma_i(A) sigma_i(B), padding to square with zeros.
OracleVerdict von_neumann_check(const Matrix& A, const Matrix& B, double tol = 1e-10);

/// von_neumann_check over random pairs of dim x dim matrices.
OracleVerdict von_neumann_trials(int trials, Index dim, std::uint64_t seed);

/// Q(B + D) - Q(B) >= (1 - L) ||D||_F^2 / 2 at B = apply_matrix(rule, Y) for
/// random D of the given scale. Rule must have curvature 0.
OracleVerdict perturbation_check(const Matrix& Y, const ThresholdRule& rule, int trials, std::uint64_t seed,
                                 double delta_scale = 1.0, double tol = 1e-10);

/// Central differences of the negative log-likelihood against
/// X^T (mu(B) - Y), entry by entry.
OracleVerdict finite_diff_gradcheck(const Family& family, const Matrix& X, const Matrix& Y, const Matrix& B,
                                    double step = 1e-5, double tol = 1e-5);

struct NamedVerdict {
  std::string name;
  OracleVerdict verdict;
};

/// The full oracle battery on seeded random inputs.
std::vector<NamedVerdict> run_oracle_suite(std::uint64_t seed);

}  // namespace rrglm::oracles
