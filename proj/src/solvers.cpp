#include "rrglm/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "rrglm/errors.hpp"
#include "rrglm/parallel.hpp"

namespace rrglm {

namespace {

// Relative band around lambda inside which a singular value counts as
// sitting on the discontinuity of a hard-type rule.
constexpr double kDiscontinuityBand = 1e-12;

// Slack on the descent check, relative to the objective's magnitude.
constexpr double kDescentSlack = 1e-12;

ThinSvd threshold_step(const ThresholdRule& rule, const Matrix& W) {
  ThinSvd svd = thin_svd(W);
  ThresholdRule effective = rule;
  if (rule.kind == RuleKind::hard || rule.kind == RuleKind::hard_ridge) {
    for (Index i = 0; i < svd.s.size(); ++i) {
      if (std::abs(svd.s(i) - rule.lambda) <= kDiscontinuityBand * rule.lambda) {
        effective.lambda = rule.lambda * (1.0 + 2.0 * kDiscontinuityBand);
        break;
      }
    }
  }
  svd.s = apply_to_singular_values(effective, svd.s);
  return svd;
}

double penalty_part(const ThresholdRule& rule, const Vector& s, double eta_extra) {
  const double ridge = 0.5 * eta_extra * s.squaredNorm();
  if (rule.kind == RuleKind::quantile) return ridge;
  return penalty_singular_values(rule, s) + ridge;
}

void require_shapes(const DataSet& data, const Matrix& B) {
  if (B.rows() != data.X.cols() || B.cols() != data.Y.cols()) {
    throw InputError("coefficient matrix is " + std::to_string(B.rows()) + "x" + std::to_string(B.cols()) +
                     ", expected " + std::to_string(data.X.cols()) + "x" + std::to_string(data.Y.cols()));
  }
}

}  // namespace

void FitOptions::validate() const {
  if (max_iter < 1) throw InputError("fit options: max_iter must be >= 1");
  if (!(tol > 0.0)) throw InputError("fit options: tol must be > 0");
  if (!(rank_tol > 0.0)) throw InputError("fit options: rank_tol must be > 0");
}

Vector CoefficientEstimate::intercept() const {
  if (!has_intercept) return Vector::Zero(B.cols());
  return B.row(0).transpose();
}

double objective(const DataSet& data, const Matrix& B, const ThresholdRule& rule, double eta_extra, double scale) {
  require_shapes(data, B);
  if (eta_extra < 0.0) throw InputError("objective: eta_extra must be >= 0");
  const double nll = neg_log_likelihood(data.family, data.X, data.Y, B);
  const Matrix slope = scale * slope_block(B, data.has_intercept);
  return nll + penalty_part(rule, thin_svd(slope).s, eta_extra);
}

double solver_scale(const DataSet& data, const ThresholdRule& rule) {
  if (rule.kind == RuleKind::quantile) return constrained_scale_factor(data.family, data.X);
  return scale_factor(data.family, data.X, rule);
}

namespace detail {

CoefficientEstimate threshold_iteration(const DataSet& data, const ThresholdRule& rule, double eta_extra,
                                        double scale, const FitOptions& opts) {
  data.validate();
  rule.validate();
  opts.validate();
  const Index p = data.p();
  const Matrix Xs = data.X / scale;

  Matrix Bs = Matrix::Zero(data.X.cols(), data.m());
  if (opts.start) {
    require_shapes(data, *opts.start);
    require_finite(*opts.start, "initial coefficients");
    Bs = scale * *opts.start;
  }

  CoefficientEstimate est;
  est.has_intercept = data.has_intercept;
  est.scale = scale;
  est.rule = rule;
  est.eta_extra = eta_extra;

  auto objective_at = [&](const Matrix& coef, const Vector& s) {
    return neg_log_likelihood_extended(data.family, Xs, data.Y, coef) +
           static_cast<long double>(penalty_part(rule, s, eta_extra));
  };
  Matrix eta = Xs * Bs;
  long double f_prev = 0.0L;
  {
    const Vector s0 = thin_svd(Bs.bottomRows(p)).s;
    f_prev = objective_at(Bs, s0);
    est.objective_trace.push_back(static_cast<double>(f_prev));
    est.rank_trace.push_back(numerical_rank(s0, opts.rank_tol));
  }

  for (int it = 1; it <= opts.max_iter; ++it) {
    const Matrix G = Xs.transpose() * (data.Y - mean_from_linear(data.family, eta));
    const ThinSvd th = threshold_step(rule, Bs.bottomRows(p) + G.bottomRows(p));

    Matrix next(Bs.rows(), Bs.cols());
    if (data.has_intercept) next.row(0) = Bs.row(0) + G.row(0);
    next.bottomRows(p) = th.reconstruct();

    const double change = (next - Bs).norm() / std::max(scale, Bs.norm());
    eta = Xs * next;
    const long double f_next = objective_at(next, th.s);
    // From a start above the rank bound the first step is a projection onto
    // the feasible set and may raise the objective.
    const bool infeasible_start = it == 1 && rule.kind == RuleKind::quantile && est.rank_trace[0] > rule.rank;
    if (!infeasible_start && f_next - f_prev > kDescentSlack * std::max(1.0L, std::abs(f_prev))) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "thresholding iteration: objective increased from " << f_prev << " to " << f_next << " at iteration "
          << it << " (" << rule.to_string() << ", scale " << scale << ")";
      throw NumericalError(msg.str());
    }
    est.objective_trace.push_back(static_cast<double>(f_next));
    est.objective_decrease.push_back(static_cast<double>(f_prev - f_next));
    f_prev = f_next;
    est.rank_trace.push_back(numerical_rank(th.s, opts.rank_tol));
    Bs = std::move(next);
    est.iterations = it;
    if (change <= opts.tol) {
      est.converged = true;
      break;
    }
  }
  est.B = Bs / scale;
  est.slope_svd = thin_svd(est.slope());
  est.rank = numerical_rank(est.slope_svd.s, opts.rank_tol);
  est.objective = est.objective_trace.back();
  est.fixed_point_residual = fixed_point_residual(data, est.B, rule, scale);
  return est;
}

}  // namespace detail

CoefficientEstimate penalized_fit(const DataSet& data, const ThresholdRule& rule, const FitOptions& opts) {
  if (rule.kind == RuleKind::quantile) {
    throw UsageError("penalized_fit: the quantile rule is a constraint; use constrained_fit");
  }
  data.validate();
  return detail::threshold_iteration(data, rule, 0.0, scale_factor(data.family, data.X, rule), opts);
}

CoefficientEstimate constrained_fit(const DataSet& data, Index r, double eta, const FitOptions& opts) {
  data.validate();
  const Index cap = std::min(data.p(), data.m());
  if (r < 1 || r > cap) {
    throw InputError("constrained_fit: rank " + std::to_string(r) + " outside [1, " + std::to_string(cap) + "]");
  }
  const ThresholdRule rule = ThresholdRule::quantile(r, eta);
  return detail::threshold_iteration(data, rule, eta, constrained_scale_factor(data.family, data.X), opts);
}

double fixed_point_residual(const DataSet& data, const Matrix& B, const ThresholdRule& rule, double scale) {
  require_shapes(data, B);
  const Index p = data.p();
  const Matrix Xs = data.X / scale;
  const Matrix Bs = scale * B;
  const Matrix G = Xs.transpose() * (data.Y - mean_matrix(data.family, Xs, Bs));
  const Matrix slope = Bs.bottomRows(p);
  double residual = (slope - threshold_step(rule, slope + G.bottomRows(p)).reconstruct()).norm();
  if (data.has_intercept) residual += G.row(0).norm();
  return residual / scale;
}

double fixed_point_residual(const DataSet& data, const Matrix& B, const ThresholdRule& rule) {
  return fixed_point_residual(data, B, rule, solver_scale(data, rule));
}

namespace {

RrrSolution rrr_impl(const Matrix& X, const Matrix& Y, std::optional<double> lambda, Index fixed_rank) {
  require_finite(X, "rrr design");
  require_finite(Y, "rrr response");
  if (X.rows() != Y.rows()) throw InputError("rrr_closed_form: X and Y differ in row count");
  if (X.rows() < X.cols()) throw InputError("rrr_closed_form: needs n >= p");
  Eigen::ColPivHouseholderQR<Matrix> qr(X);
  if (qr.rank() < X.cols()) throw InputError("rrr_closed_form: design is rank deficient");

  const Matrix Q = qr.householderQ() * Matrix::Identity(X.rows(), X.cols());
  const Matrix QtY = Q.transpose() * Y;
  const Matrix gram = QtY.transpose() * QtY;
  const SymEig eig = sym_eig(0.5 * (gram + gram.transpose()));

  RrrSolution out;
  out.d = eig.values.cwiseMax(0.0).cwiseSqrt();
  out.V = eig.vectors;
  if (lambda) {
    Index r = 0;
    while (r < out.d.size() && out.d(r) >= *lambda) ++r;
    out.rank = r;
  } else {
    out.rank = fixed_rank;
  }
  const Matrix ols = qr.solve(Y);
  const Matrix Vr = out.V.leftCols(out.rank);
  out.B = ols * Vr * Vr.transpose();
  return out;
}

}  // namespace

RrrSolution rrr_closed_form(const Matrix& X, const Matrix& Y, double lambda) {
  if (!(lambda >= 0.0)) throw InputError("rrr_closed_form: lambda must be >= 0");
  return rrr_impl(X, Y, lambda, 0);
}

RrrSolution rrr_closed_form_rank(const Matrix& X, const Matrix& Y, Index r) {
  if (r < 0 || r > Y.cols()) throw InputError("rrr_closed_form_rank: rank out of range");
  return rrr_impl(X, Y, std::nullopt, r);
}

double ridge_kkt_residual(const Matrix& Z, const Matrix& Y, const Family& family, double eta, const Matrix& C,
                          bool has_intercept) {
  const Matrix R = Y - mean_matrix(family, Z, C);
  const Index first = has_intercept ? 1 : 0;
  const Index q = Z.cols() - first;
  double worst = 0.0;
  if (q > 0) {
    const Matrix slope_kkt = eta * C.bottomRows(q) - Z.rightCols(q).transpose() * R;
    worst = slope_kkt.cwiseAbs().maxCoeff();
  }
  if (has_intercept) worst = std::max(worst, (Z.col(0).transpose() * R).cwiseAbs().maxCoeff());
  return worst;
}

RidgeFit ridge_glm_fit(const Matrix& Z, const Matrix& Y, const Family& family, double eta, bool has_intercept) {
  require_finite(Z, "ridge design");
  require_finite(Y, "ridge response");
  if (Z.rows() != Y.rows()) throw InputError("ridge_glm_fit: Z and Y differ in row count");
  if (!(eta >= 0.0)) throw InputError("ridge_glm_fit: eta must be >= 0");
  const Index q = Z.cols();
  const Index m = Y.cols();
  Vector penalty = Vector::Constant(q, eta);
  if (has_intercept && q > 0) penalty(0) = 0.0;

  RidgeFit fit;
  fit.C = Matrix::Zero(q, m);
  if (q == 0) {
    fit.converged = true;
    fit.kkt_residual = 0.0;
    return fit;
  }

  if (family.kind == FamilyKind::gaussian) {
    Matrix A = Z.transpose() * Z;
    A.diagonal() += penalty;
    Eigen::LDLT<Matrix> ldlt(A);
    const double scale = std::max(1.0, A.diagonal().cwiseAbs().maxCoeff());
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 1e-13 * scale) {
      throw InputError("ridge_glm_fit: singular normal equations (eta = 0 needs Z of full column rank)");
    }
    const Matrix rhs = Z.transpose() * Y;
    fit.C = ldlt.solve(rhs);
    // One step of iterative refinement.
    fit.C += ldlt.solve(rhs - A * fit.C);
    fit.converged = true;
    fit.iterations = 1;
    fit.kkt_residual = ridge_kkt_residual(Z, Y, family, eta, fit.C, has_intercept);
    return fit;
  }

  constexpr int kMaxNewton = 100;
  constexpr double kGradTol = 1e-9;
  // Newton decrement below roundoff of the objective.
  constexpr double kDecrementTol = 1e-15;
  constexpr double kDivergence = 1e4;
  // |linear predictor| beyond which a fitted probability is 0 or 1 to
  // double precision.
  constexpr double kSaturation = 30.0;
  fit.converged = true;
  for (Index k = 0; k < m; ++k) {
    const Vector y = Y.col(k);
    Vector c = Vector::Zero(q);
    auto objective_at = [&](const Vector& coef) {
      const Vector lin = Z * coef;
      double total = 0.0;
      for (Index i = 0; i < lin.size(); ++i) total += family.cumulant(lin(i)) - y(i) * lin(i);
      return total + 0.5 * coef.cwiseProduct(penalty).dot(coef);
    };
    double f = objective_at(c);
    bool done = false;
    int it = 0;
    for (; it < kMaxNewton; ++it) {
      const Vector lin = Z * c;
      Vector mu(lin.size());
      Vector w(lin.size());
      for (Index i = 0; i < lin.size(); ++i) {
        mu(i) = family.mean(lin(i));
        w(i) = family.variance(lin(i));
      }
      const Vector grad = Z.transpose() * (mu - y) + penalty.cwiseProduct(c);
      if (grad.cwiseAbs().maxCoeff() <= kGradTol) {
        done = true;
        break;
      }
      Matrix H = Z.transpose() * w.asDiagonal() * Z;
      H.diagonal() += penalty;
      Eigen::LDLT<Matrix> ldlt(H);
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) break;
      const Vector step = ldlt.solve(grad);
      if (!step.allFinite()) break;
      if (0.5 * grad.dot(step) <= kDecrementTol * std::max(1.0, std::abs(f))) {
        c -= step;
        done = true;
        break;
      }
      double t = 1.0;
      Vector trial = c - step;
      double f_trial = objective_at(trial);
      while (!(f_trial <= f) && t > 1e-10) {
        t *= 0.5;
        trial = c - t * step;
        f_trial = objective_at(trial);
      }
      if (!(f_trial <= f)) {
        // No decrease along the Newton direction: at the optimum to roundoff.
        done = grad.cwiseAbs().maxCoeff() <= 1e-6;
        break;
      }
      c = trial;
      f = f_trial;
      if (c.cwiseAbs().maxCoeff() > kDivergence) break;
    }
    fit.iterations = std::max(fit.iterations, it);
    fit.C.col(k) = c;
    const bool saturated = (Z * c).cwiseAbs().maxCoeff() > kSaturation;
    if (!done || saturated) {
      fit.converged = false;
      std::ostringstream msg;
      msg << "response " << k << ": ";
      if (saturated) {
        msg << "fitted probabilities numerically 0 or 1 (possible separation)";
      } else {
        msg << "Newton did not converge";
        if (c.cwiseAbs().maxCoeff() > kDivergence) msg << " (coefficients diverging; possible separation)";
      }
      if (!fit.diagnostics.empty()) fit.diagnostics += "; ";
      fit.diagnostics += msg.str();
    }
  }
  fit.kkt_residual = ridge_kkt_residual(Z, Y, family, eta, fit.C, has_intercept);
  return fit;
}

SolutionPath fit_path(const DataSet& data, const PathSpec& spec, const FitOptions& opts, int jobs) {
  data.validate();
  SolutionPath path;
  const bool penalized = spec.mode == PathSpec::Mode::penalized;
  const std::size_t count = penalized ? spec.lambdas.size() : spec.ranks.size();
  if (count == 0) throw InputError("fit_path: empty grid");
  path.entries.resize(count);

  auto run_entry = [&](std::size_t i, const std::optional<Matrix>& start) {
    PathEntry& entry = path.entries[i];
    try {
      FitOptions local = opts;
      local.start = start;
      if (penalized) {
        entry.lambda = spec.lambdas[i];
        entry.rule = spec.rule.with_lambda(spec.lambdas[i]);
        entry.eta = entry.rule.kind == RuleKind::hard_ridge ? entry.rule.eta : 0.0;
        entry.estimate = penalized_fit(data, entry.rule, local);
      } else {
        entry.rank_param = spec.ranks[i];
        entry.eta = spec.eta;
        entry.rule = ThresholdRule::quantile(std::max<Index>(spec.ranks[i], 1), spec.eta);
        entry.estimate = constrained_fit(data, spec.ranks[i], spec.eta, local);
      }
    } catch (const Error& e) {
      entry.estimate.reset();
      entry.error = e.what();
    }
  };

  if (penalized && spec.rule.convex()) {
    std::optional<Matrix> warm = opts.start;
    for (std::size_t i = 0; i < count; ++i) {
      run_entry(i, warm);
      if (path.entries[i].ok()) warm = path.entries[i].estimate->B;
    }
  } else {
    parallel_for(count, jobs, [&](std::size_t i) { run_entry(i, opts.start); });
  }
  return path;
}

}  // namespace rrglm
