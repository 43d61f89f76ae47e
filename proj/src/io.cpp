#include "rrglm/io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "rrglm/errors.hpp"

namespace rrglm::io {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  s = s.substr(b, e - b);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? comma : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string json_error(const std::string& what, const std::exception& e) {
  return what + ": " + e.what();
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  CsvTable table;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line.front() == '#') continue;
    std::vector<std::string> cells = split(line);
    if (!have_header) {
      table.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw InputError(path + ": line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                       " fields, header has " + std::to_string(table.header.size()));
    }
    std::vector<double> row(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string& cell = cells[c];
      const char* first = cell.data();
      const char* last = cell.data() + cell.size();
      if (first != last && *first == '+') ++first;
      const auto res = std::from_chars(first, last, row[c]);
      if (cell.empty() || res.ec != std::errc() || res.ptr != last || !std::isfinite(row[c])) {
        throw InputError(path + ": row " + std::to_string(rows.size() + 1) + " (line " + std::to_string(lineno) +
                         "), column " + std::to_string(c + 1) + " '" + table.header[c] + "': not a finite number: '" +
                         cell + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  if (!have_header) throw InputError(path + ": missing header row");
  if (rows.empty()) throw InputError(path + ": no data rows");
  table.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(table.header.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < rows[i].size(); ++c) {
      table.values(static_cast<Index>(i), static_cast<Index>(c)) = rows[i][c];
    }
  }
  return table;
}

void write_csv(const std::string& path, const std::vector<std::string>& header, const Matrix& values,
               const std::vector<std::string>& comments) {
  if (static_cast<Index>(header.size()) != values.cols()) throw InputError("write_csv: header/column mismatch");
  std::ostringstream out;
  for (const auto& c : comments) out << "# " << c << '\n';
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  for (Index i = 0; i < values.rows(); ++i) {
    for (Index j = 0; j < values.cols(); ++j) out << (j ? "," : "") << format_double(values(i, j));
    out << '\n';
  }
  write_text(path, out.str());
}

Matrix Standardization::apply(const Matrix& predictors) const {
  if (!applied) return predictors;
  if (predictors.cols() != mean.size()) throw InputError("standardization: column count mismatch");
  Matrix out = predictors;
  for (Index j = 0; j < out.cols(); ++j) out.col(j) = (out.col(j).array() - mean(j)) / sd(j);
  return out;
}

Standardization standardize_columns(Matrix& predictors) {
  const Index n = predictors.rows();
  if (n < 2) throw InputError("standardize: need at least 2 rows");
  Standardization st;
  st.applied = true;
  st.mean.resize(predictors.cols());
  st.sd.resize(predictors.cols());
  for (Index j = 0; j < predictors.cols(); ++j) {
    const double mu = predictors.col(j).mean();
    const double var = (predictors.col(j).array() - mu).square().sum() / static_cast<double>(n - 1);
    const double sd = std::sqrt(var);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mu)))) {
      throw InputError("standardize: column " + std::to_string(j + 1) + " has zero variance");
    }
    st.mean(j) = mu;
    st.sd(j) = sd;
  }
  predictors = st.apply(predictors);
  return st;
}

LoadedData load_dataset(const std::string& design_path, const std::string& response_path, const Family& family,
                        bool intercept, bool standardize) {
  CsvTable design = read_csv(design_path);
  CsvTable response = read_csv(response_path);
  if (design.values.rows() != response.values.rows()) {
    throw InputError("row count mismatch: design has " + std::to_string(design.values.rows()) + ", response has " +
                     std::to_string(response.values.rows()));
  }
  if (family.kind == FamilyKind::bernoulli) {
    for (Index j = 0; j < response.values.cols(); ++j) {
      for (Index i = 0; i < response.values.rows(); ++i) {
        const double y = response.values(i, j);
        if (y != 0.0 && y != 1.0) {
          throw InputError(response_path + ": row " + std::to_string(i + 1) + ", column " + std::to_string(j + 1) +
                           " '" + response.header[static_cast<std::size_t>(j)] +
                           "': bernoulli response must be 0 or 1");
        }
      }
    }
  }
  LoadedData out;
  out.predictor_names = design.header;
  out.response_names = response.header;
  if (standardize) out.standardization = standardize_columns(design.values);
  out.data = make_dataset(design.values, response.values, family, intercept);
  return out;
}

Json matrix_to_json(const Matrix& A) {
  Json data = Json::array();
  for (Index i = 0; i < A.rows(); ++i) {
    for (Index j = 0; j < A.cols(); ++j) data.push_back(A(i, j));
  }
  return Json{{"rows", A.rows()}, {"cols", A.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const Json& j) {
  const auto rows = j.at("rows").get<Index>();
  const auto cols = j.at("cols").get<Index>();
  const Json& data = j.at("data");
  if (rows < 0 || cols < 0 || data.size() != static_cast<std::size_t>(rows * cols)) {
    throw InputError("matrix: data length does not match declared dimensions");
  }
  Matrix A(rows, cols);
  std::size_t k = 0;
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) A(r, c) = data[k++].get<double>();
  }
  return A;
}

Json estimate_to_json(const CoefficientEstimate& est) {
  Json sv = Json::array();
  for (Index i = 0; i < est.slope_svd.s.size(); ++i) sv.push_back(est.slope_svd.s(i));
  return Json{{"rule", est.rule.to_string()},
              {"eta_extra", est.eta_extra},
              {"has_intercept", est.has_intercept},
              {"rank", est.rank},
              {"singular_values", std::move(sv)},
              {"objective", est.objective},
              {"converged", est.converged},
              {"iterations", est.iterations},
              {"fixed_point_residual", est.fixed_point_residual},
              {"scale", est.scale},
              {"B", matrix_to_json(est.B)}};
}

CoefficientEstimate estimate_from_json(const Json& j) {
  try {
    CoefficientEstimate est;
    est.rule = parse_rule(j.at("rule").get<std::string>());
    est.eta_extra = j.at("eta_extra").get<double>();
    est.has_intercept = j.at("has_intercept").get<bool>();
    est.objective = j.at("objective").get<double>();
    est.converged = j.at("converged").get<bool>();
    est.iterations = j.at("iterations").get<int>();
    est.fixed_point_residual = j.at("fixed_point_residual").get<double>();
    est.scale = j.at("scale").get<double>();
    est.B = matrix_from_json(j.at("B"));
    require_finite(est.B, "estimate B");
    if (est.has_intercept && est.B.rows() < 1) throw InputError("estimate: B has no intercept row");
    est.slope_svd = thin_svd(est.slope());
    est.rank = j.at("rank").get<Index>();
    return est;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(json_error("malformed estimate", e));
  }
}

namespace {

Json standardization_to_json(const Standardization& st) {
  Json j{{"applied", st.applied}};
  if (st.applied) {
    j["mean"] = std::vector<double>(st.mean.data(), st.mean.data() + st.mean.size());
    j["sd"] = std::vector<double>(st.sd.data(), st.sd.data() + st.sd.size());
  }
  return j;
}

Standardization standardization_from_json(const Json& j) {
  Standardization st;
  st.applied = j.at("applied").get<bool>();
  if (st.applied) {
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto sd = j.at("sd").get<std::vector<double>>();
    if (mean.size() != sd.size()) throw InputError("standardization: mean/sd length mismatch");
    st.mean = Eigen::Map<const Vector>(mean.data(), static_cast<Index>(mean.size()));
    st.sd = Eigen::Map<const Vector>(sd.data(), static_cast<Index>(sd.size()));
  }
  return st;
}

}  // namespace

Json model_to_json(const Model& model) {
  return Json{{"family", std::string(model.family.name())},
              {"predictors", model.predictor_names},
              {"responses", model.response_names},
              {"standardization", standardization_to_json(model.standardization)},
              {"estimate", estimate_to_json(model.estimate)}};
}

Model model_from_json(const Json& j) {
  try {
    Model model;
    model.family = Family::parse(j.at("family").get<std::string>());
    model.predictor_names = j.at("predictors").get<std::vector<std::string>>();
    model.response_names = j.at("responses").get<std::vector<std::string>>();
    model.standardization = standardization_from_json(j.at("standardization"));
    model.estimate = estimate_from_json(j.at("estimate"));
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(json_error("malformed model file", e));
  }
}

Json path_to_json(const PathFile& file) {
  Json entries = Json::array();
  for (const PathEntry& e : file.path.entries) {
    Json row{{"lambda", e.lambda}, {"rank_param", e.rank_param}, {"eta", e.eta}, {"rule", e.rule.to_string()}};
    if (e.ok()) {
      row["estimate"] = estimate_to_json(*e.estimate);
    } else {
      row["error"] = e.error;
    }
    entries.push_back(std::move(row));
  }
  return Json{{"family", std::string(file.family.name())},
              {"predictors", file.predictor_names},
              {"responses", file.response_names},
              {"standardization", standardization_to_json(file.standardization)},
              {"entries", std::move(entries)}};
}

PathFile path_from_json(const Json& j) {
  try {
    PathFile file;
    file.family = Family::parse(j.at("family").get<std::string>());
    file.predictor_names = j.at("predictors").get<std::vector<std::string>>();
    file.response_names = j.at("responses").get<std::vector<std::string>>();
    file.standardization = standardization_from_json(j.at("standardization"));
    for (const Json& row : j.at("entries")) {
      PathEntry e;
      e.lambda = row.at("lambda").get<double>();
      e.rank_param = row.at("rank_param").get<Index>();
      e.eta = row.at("eta").get<double>();
      e.rule = parse_rule(row.at("rule").get<std::string>());
      if (row.contains("estimate")) {
        e.estimate = estimate_from_json(row.at("estimate"));
      } else {
        e.error = row.at("error").get<std::string>();
      }
      file.path.entries.push_back(std::move(e));
    }
    return file;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(json_error("malformed path file", e));
  }
}

Json pcv_to_json(const PcvReport& report) {
  Json candidates = Json::array();
  for (const PcvCandidate& c : report.candidates) {
    Json row{{"index", c.index}, {"lambda", c.lambda}, {"rank_param", c.rank_param}, {"eta", c.eta},
             {"rank", c.rank},   {"ok", c.ok}};
    row["cv_deviance"] = std::isfinite(c.cv_deviance) ? Json(c.cv_deviance) : Json(nullptr);
    row["score"] = std::isfinite(c.score) ? Json(c.score) : Json(nullptr);
    if (!c.note.empty()) row["note"] = c.note;
    candidates.push_back(std::move(row));
  }
  return Json{{"folds", report.folds},
              {"seed", report.seed},
              {"use_bic", report.use_bic},
              {"fold_sizes", report.fold_sizes},
              {"selected", report.selected},
              {"selected_rank", report.best().rank},
              {"candidates", std::move(candidates)}};
}

Json extraction_to_json(const ExtractionResult& result) {
  return Json{{"type", std::string(extraction_name(result.kind))},
              {"rank", result.rank()},
              {"has_intercept", result.has_intercept},
              {"transform", matrix_to_json(result.transform)}};
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(json_error(path, e));
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << text;
  if (!out) throw InputError("write failed: " + path);
}

}  // namespace rrglm::io
