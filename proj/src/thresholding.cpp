#include "rrglm/thresholding.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "rrglm/errors.hpp"

namespace rrglm {

namespace {

double sign(double t) { return t > 0.0 ? 1.0 : (t < 0.0 ? -1.0 : 0.0); }

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_number(std::string_view text, std::string_view key) {
  double v = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    throw InputError("rule spec: bad value '" + std::string(text) + "' for " + std::string(key));
  }
  return v;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

ThresholdRule ThresholdRule::soft(double lambda) {
  ThresholdRule r;
  r.kind = RuleKind::soft;
  r.lambda = lambda;
  r.validate();
  return r;
}

ThresholdRule ThresholdRule::hard(double lambda) {
  ThresholdRule r;
  r.kind = RuleKind::hard;
  r.lambda = lambda;
  r.validate();
  return r;
}

ThresholdRule ThresholdRule::ridge(double lambda) {
  ThresholdRule r;
  r.kind = RuleKind::ridge;
  r.lambda = lambda;
  r.validate();
  return r;
}

ThresholdRule ThresholdRule::hard_ridge(double lambda, double eta) {
  ThresholdRule r;
  r.kind = RuleKind::hard_ridge;
  r.lambda = lambda;
  r.eta = eta;
  r.validate();
  return r;
}

ThresholdRule ThresholdRule::berhu(double lambda, double M) {
  ThresholdRule r;
  r.kind = RuleKind::berhu;
  r.lambda = lambda;
  r.M = M;
  r.validate();
  return r;
}

ThresholdRule ThresholdRule::quantile(Index rank, double eta) {
  ThresholdRule r;
  r.kind = RuleKind::quantile;
  r.rank = rank;
  r.eta = eta;
  r.validate();
  return r;
}

double ThresholdRule::curvature() const {
  switch (kind) {
    case RuleKind::soft:
    case RuleKind::ridge:
    case RuleKind::berhu:
      return 0.0;
    case RuleKind::hard:
    case RuleKind::hard_ridge:
    case RuleKind::quantile:
      return 1.0;
  }
  return 1.0;
}

bool ThresholdRule::convex() const {
  return kind == RuleKind::soft || kind == RuleKind::ridge || kind == RuleKind::berhu;
}

ThresholdRule ThresholdRule::with_lambda(double value) const {
  ThresholdRule r = *this;
  r.lambda = value;
  r.validate();
  return r;
}

void ThresholdRule::validate() const {
  if (!std::isfinite(lambda) || lambda < 0.0) throw InputError("threshold rule: lambda must be >= 0");
  if (!std::isfinite(eta) || eta < 0.0) throw InputError("threshold rule: eta must be >= 0");
  if (kind == RuleKind::berhu && (!std::isfinite(M) || M <= 0.0)) {
    throw InputError("threshold rule: berhu M must be > 0");
  }
  if (kind == RuleKind::quantile && rank < 1) throw InputError("threshold rule: quantile r must be >= 1");
}

std::string_view kind_name(RuleKind kind) {
  switch (kind) {
    case RuleKind::soft: return "soft";
    case RuleKind::hard: return "hard";
    case RuleKind::ridge: return "ridge";
    case RuleKind::hard_ridge: return "hardridge";
    case RuleKind::berhu: return "berhu";
    case RuleKind::quantile: return "quantile";
  }
  return "unknown";
}

std::string ThresholdRule::to_string() const {
  std::string out(kind_name(kind));
  switch (kind) {
    case RuleKind::soft:
    case RuleKind::hard:
    case RuleKind::ridge:
      out += ":lambda=" + format_number(lambda);
      break;
    case RuleKind::hard_ridge:
      out += ":lambda=" + format_number(lambda) + ",eta=" + format_number(eta);
      break;
    case RuleKind::berhu:
      out += ":lambda=" + format_number(lambda) + ",M=" + format_number(M);
      break;
    case RuleKind::quantile:
      out += ":r=" + std::to_string(rank) + ",eta=" + format_number(eta);
      break;
  }
  return out;
}

ThresholdRule parse_rule(std::string_view spec) {
  spec = trim(spec);
  const auto colon = spec.find(':');
  const std::string_view name = trim(spec.substr(0, colon));
  ThresholdRule rule;
  if (name == "soft") {
    rule.kind = RuleKind::soft;
  } else if (name == "hard") {
    rule.kind = RuleKind::hard;
  } else if (name == "ridge") {
    rule.kind = RuleKind::ridge;
  } else if (name == "hardridge" || name == "hard_ridge") {
    rule.kind = RuleKind::hard_ridge;
  } else if (name == "berhu") {
    rule.kind = RuleKind::berhu;
  } else if (name == "quantile") {
    rule.kind = RuleKind::quantile;
  } else {
    throw InputError("rule spec: unknown rule '" + std::string(name) + "'");
  }

  std::string_view rest = colon == std::string_view::npos ? std::string_view{} : spec.substr(colon + 1);
  std::vector<std::string_view> seen;
  while (!trim(rest).empty()) {
    const auto comma = rest.find(',');
    const std::string_view item = trim(rest.substr(0, comma));
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) throw InputError("rule spec: expected key=value, got '" + std::string(item) + "'");
    const std::string_view key = trim(item.substr(0, eq));
    const std::string_view value = trim(item.substr(eq + 1));
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) {
      throw InputError("rule spec: key '" + std::string(key) + "' given twice");
    }
    seen.push_back(key);
    const bool allows_eta = rule.kind == RuleKind::hard_ridge || rule.kind == RuleKind::quantile;
    if (key == "lambda" && rule.kind != RuleKind::quantile) {
      rule.lambda = parse_number(value, key);
    } else if (key == "eta" && allows_eta) {
      rule.eta = parse_number(value, key);
    } else if (key == "M" && rule.kind == RuleKind::berhu) {
      rule.M = parse_number(value, key);
    } else if (key == "r" && rule.kind == RuleKind::quantile) {
      const double r = parse_number(value, key);
      if (r != std::floor(r)) throw InputError("rule spec: r must be an integer");
      rule.rank = static_cast<Index>(r);
    } else {
      throw InputError("rule spec: key '" + std::string(key) + "' not valid for " + std::string(name));
    }
  }
  rule.validate();
  return rule;
}

double apply_scalar(const ThresholdRule& rule, double t) {
  const double a = std::abs(t);
  const double lambda = rule.lambda;
  switch (rule.kind) {
    case RuleKind::soft:
      return a > lambda ? t - sign(t) * lambda : 0.0;
    case RuleKind::hard:
      return a > lambda ? t : 0.0;
    case RuleKind::ridge:
      return t / (1.0 + lambda);
    case RuleKind::hard_ridge:
      return a < lambda ? 0.0 : t / (1.0 + rule.eta);
    case RuleKind::berhu:
      if (a <= lambda) return 0.0;
      if (a < lambda + rule.M) return t - sign(t) * lambda;
      return t / (1.0 + lambda / rule.M);
    case RuleKind::quantile:
      break;
  }
  throw UsageError("apply_scalar: the quantile rule acts on vectors only");
}

Vector apply_quantile(const Vector& a, Index r, double eta) {
  if (r < 1 || r > a.size()) {
    throw InputError("apply_quantile: r=" + std::to_string(r) + " outside [1, " + std::to_string(a.size()) + "]");
  }
  if (!(eta >= 0.0)) throw InputError("apply_quantile: eta must be >= 0");
  std::vector<Index> order(static_cast<std::size_t>(a.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index i, Index j) { return std::abs(a(i)) > std::abs(a(j)); });
  Vector out = Vector::Zero(a.size());
  for (Index k = 0; k < r; ++k) {
    const Index i = order[static_cast<std::size_t>(k)];
    out(i) = a(i) / (1.0 + eta);
  }
  return out;
}

Vector apply_to_singular_values(const ThresholdRule& rule, const Vector& s) {
  if (rule.kind == RuleKind::quantile) {
    if (s.size() == 0) return s;
    return apply_quantile(s, std::min(rule.rank, s.size()), rule.eta);
  }
  Vector out(s.size());
  for (Index i = 0; i < s.size(); ++i) out(i) = apply_scalar(rule, s(i));
  return out;
}

ThinSvd apply_matrix_factored(const ThresholdRule& rule, const Matrix& B) {
  ThinSvd svd = thin_svd(B);
  svd.s = apply_to_singular_values(rule, svd.s);
  return svd;
}

Matrix apply_matrix(const ThresholdRule& rule, const Matrix& B) {
  return apply_matrix_factored(rule, B).reconstruct();
}

double penalty_scalar(const ThresholdRule& rule, double theta) {
  const double a = std::abs(theta);
  const double lambda = rule.lambda;
  switch (rule.kind) {
    case RuleKind::soft:
      return lambda * a;
    case RuleKind::ridge:
      return 0.5 * lambda * a * a;
    case RuleKind::hard:
      return a < lambda ? -0.5 * a * a + lambda * a : 0.5 * lambda * lambda;
    case RuleKind::hard_ridge:
      return 0.5 * rule.eta * a * a + (a != 0.0 ? 0.5 * lambda * lambda / (1.0 + rule.eta) : 0.0);
    case RuleKind::berhu:
      return a <= rule.M ? lambda * a : lambda * (a * a + rule.M * rule.M) / (2.0 * rule.M);
    case RuleKind::quantile:
      break;
  }
  throw UsageError("penalty_scalar: the quantile rule is a constraint and has no penalty");
}

double penalty_singular_values(const ThresholdRule& rule, const Vector& s) {
  // Roundoff-level singular values count as exact zeros; the rank part of
  // the hard-ridge penalty is discontinuous there.
  const double cut = s.size() == 0 ? 0.0 : kDefaultRankTol * s.cwiseAbs().maxCoeff();
  double total = 0.0;
  for (Index i = 0; i < s.size(); ++i) {
    if (std::abs(s(i)) > cut) total += penalty_scalar(rule, s(i));
  }
  return total;
}

double penalty_matrix(const ThresholdRule& rule, const Matrix& B) {
  if (rule.kind == RuleKind::quantile) {
    throw UsageError("penalty_matrix: the quantile rule is a constraint and has no penalty");
  }
  return penalty_singular_values(rule, thin_svd(B).s);
}

}  // namespace rrglm
