#include "rrglm/family.hpp"

#include <cmath>
#include <string>

#include "rrglm/errors.hpp"

namespace rrglm {

namespace {

// log(1 + e^t) without overflow.
double log1p_exp(double t) {
  if (t > 0.0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

long double log1p_exp(long double t) {
  if (t > 0.0L) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

void require_conformable(const Matrix& X, const Matrix& B, const char* what) {
  if (X.cols() != B.rows()) {
    throw InputError(std::string(what) + ": design has " + std::to_string(X.cols()) +
                     " columns but coefficients have " + std::to_string(B.rows()) + " rows");
  }
}

}  // namespace

Family Family::parse(std::string_view name) {
  if (name == "gaussian") return gaussian();
  if (name == "bernoulli" || name == "binomial" || name == "logistic") return bernoulli();
  throw InputError("unknown family '" + std::string(name) + "'");
}

std::string_view Family::name() const {
  return kind == FamilyKind::gaussian ? "gaussian" : "bernoulli";
}

double Family::cumulant(double theta) const {
  return kind == FamilyKind::gaussian ? 0.5 * theta * theta : log1p_exp(theta);
}

double Family::mean(double theta) const {
  if (kind == FamilyKind::gaussian) return theta;
  if (theta >= 0.0) return 1.0 / (1.0 + std::exp(-theta));
  const double e = std::exp(theta);
  return e / (1.0 + e);
}

double Family::variance(double theta) const {
  if (kind == FamilyKind::gaussian) return 1.0;
  const double mu = mean(theta);
  return mu * (1.0 - mu);
}

double Family::variance_bound() const { return kind == FamilyKind::gaussian ? 1.0 : 0.25; }

void DataSet::validate() const {
  if (X.rows() < 1 || Y.rows() < 1) throw InputError("dataset: no observations");
  if (X.rows() != Y.rows()) {
    throw InputError("dataset: design has " + std::to_string(X.rows()) + " rows but response has " +
                     std::to_string(Y.rows()));
  }
  if (p() < 1) throw InputError("dataset: no predictors");
  if (m() < 1) throw InputError("dataset: no responses");
  require_finite(X, "design");
  require_finite(Y, "response");
  if (has_intercept && (X.col(0).array() != 1.0).any()) {
    throw InputError("dataset: first design column must be all ones when an intercept is used");
  }
  if (family.kind == FamilyKind::bernoulli) {
    for (Index j = 0; j < Y.cols(); ++j) {
      for (Index i = 0; i < Y.rows(); ++i) {
        if (Y(i, j) != 0.0 && Y(i, j) != 1.0) {
          throw InputError("dataset: bernoulli response (" + std::to_string(i) + ", " + std::to_string(j) +
                           ") is not 0 or 1");
        }
      }
    }
  }
}

DataSet make_dataset(const Matrix& predictors, const Matrix& Y, Family family, bool intercept) {
  DataSet data;
  data.family = family;
  data.has_intercept = intercept;
  data.Y = Y;
  if (intercept) {
    data.X.resize(predictors.rows(), predictors.cols() + 1);
    data.X.col(0).setOnes();
    data.X.rightCols(predictors.cols()) = predictors;
  } else {
    data.X = predictors;
  }
  data.validate();
  return data;
}

Matrix mean_from_linear(const Family& family, const Matrix& eta) {
  if (family.kind == FamilyKind::gaussian) return eta;
  return eta.unaryExpr([&](double t) { return family.mean(t); });
}

Matrix mean_matrix(const Family& family, const Matrix& X, const Matrix& B) {
  require_conformable(X, B, "mean_matrix");
  return mean_from_linear(family, X * B);
}

double neg_log_likelihood_linear(const Family& family, const Matrix& Y, const Matrix& eta) {
  if (Y.rows() != eta.rows() || Y.cols() != eta.cols()) {
    throw InputError("neg_log_likelihood: response and linear predictor differ in shape");
  }
  // Accumulate in long double: the solvers compare consecutive values whose
  // true difference can sit near roundoff.
  long double total = 0.0L;
  if (family.kind == FamilyKind::gaussian) {
    for (Index j = 0; j < Y.cols(); ++j) {
      for (Index i = 0; i < Y.rows(); ++i) {
        const long double r = static_cast<long double>(Y(i, j)) - static_cast<long double>(eta(i, j));
        total += r * r;
      }
    }
    return static_cast<double>(0.5L * total);
  }
  for (Index j = 0; j < Y.cols(); ++j) {
    for (Index i = 0; i < Y.rows(); ++i) {
      const double t = eta(i, j);
      total += static_cast<long double>(log1p_exp(t)) - static_cast<long double>(Y(i, j)) * t;
    }
  }
  return static_cast<double>(total);
}

double neg_log_likelihood(const Family& family, const Matrix& X, const Matrix& Y, const Matrix& B) {
  require_conformable(X, B, "neg_log_likelihood");
  return neg_log_likelihood_linear(family, Y, X * B);
}

long double neg_log_likelihood_extended(const Family& family, const Matrix& X, const Matrix& Y, const Matrix& B) {
  require_conformable(X, B, "neg_log_likelihood");
  if (Y.rows() != X.rows() || Y.cols() != B.cols()) {
    throw InputError("neg_log_likelihood: response and linear predictor differ in shape");
  }
  long double total = 0.0L;
  for (Index j = 0; j < Y.cols(); ++j) {
    for (Index i = 0; i < Y.rows(); ++i) {
      long double eta = 0.0L;
      for (Index k = 0; k < X.cols(); ++k) eta += static_cast<long double>(X(i, k)) * B(k, j);
      const long double y = Y(i, j);
      if (family.kind == FamilyKind::gaussian) {
        total += 0.5L * (y - eta) * (y - eta);
      } else {
        total += log1p_exp(eta) - y * eta;
      }
    }
  }
  return total;
}

double deviance_linear(const Family& family, const Matrix& Y, const Matrix& eta) {
  // The saturated log-likelihood is zero for binary responses and
  // ||Y||^2/2 - ||Y||^2/2 = 0 after dropping constants for the Gaussian.
  return 2.0 * neg_log_likelihood_linear(family, Y, eta);
}

Matrix nll_gradient(const Family& family, const Matrix& X, const Matrix& Y, const Matrix& B) {
  require_conformable(X, B, "nll_gradient");
  return X.transpose() * (mean_matrix(family, X, B) - Y);
}

double rho_upper_bound(const Family& family, const Matrix& X) {
  const double norm = spectral_norm(X);
  return norm * norm * family.variance_bound();
}

double scale_factor(const Family& family, const Matrix& X, const ThresholdRule& rule) {
  const double rho = rho_upper_bound(family, X);
  return std::max(1.0, std::sqrt(rho / (2.0 - rule.curvature())));
}

double constrained_scale_factor(const Family& family, const Matrix& X) {
  return std::max(1.0, std::sqrt(rho_upper_bound(family, X)));
}

}  // namespace rrglm
