#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "rrglm/extraction.hpp"
#include "rrglm/family.hpp"
#include "rrglm/solvers.hpp"
#include "rrglm/tuning.hpp"

namespace rrglm::io {

using Json = nlohmann::ordered_json;

/// A numeric CSV file with a header row.
struct CsvTable {
  std::vector<std::string> header;
  Matrix values;
};

/// Reads a comma-separated file whose first non-comment line is the header.
/// Lines starting with '#' and blank lines are skipped. Errors name the
/// offending line and column.
CsvTable read_csv(const std::string& path);

/// Writes `values` with the given header; `comments` become leading '#'
/// lines. Numbers use the shortest round-trip representation.
void write_csv(const std::string& path, const std::vector<std::string>& header, const Matrix& values,
               const std::vector<std::string>& comments = {});

/// Column centering and scaling applied to the predictors before fitting.
struct Standardization {
  bool applied = false;
  Vector mean;
  Vector sd;

  /// Applies the stored transform to raw predictors (no-op when not applied).
  Matrix apply(const Matrix& predictors) const;
};

/// Centers each column and divides by its sample standard deviation.
Standardization standardize_columns(Matrix& predictors);

struct LoadedData {
  DataSet data;
  std::vector<std::string> predictor_names;
  std::vector<std::string> response_names;
  Standardization standardization;
};

LoadedData load_dataset(const std::string& design_path, const std::string& response_path, const Family& family,
                        bool intercept, bool standardize);

/// Everything needed to reuse a fitted estimate on new data.
struct Model {
  Family family;
  std::vector<std::string> predictor_names;
  std::vector<std::string> response_names;
  Standardization standardization;
  CoefficientEstimate estimate;
};

Json matrix_to_json(const Matrix& A);
Matrix matrix_from_json(const Json& j);

Json estimate_to_json(const CoefficientEstimate& est);
/// Rebuilds an estimate; the slope SVD and rank are recomputed from B.
CoefficientEstimate estimate_from_json(const Json& j);

Json model_to_json(const Model& model);
Model model_from_json(const Json& j);

struct PathFile {
  Family family;
  std::vector<std::string> predictor_names;
  std::vector<std::string> response_names;
  Standardization standardization;
  SolutionPath path;
};

Json path_to_json(const PathFile& file);
PathFile path_from_json(const Json& j);

Json pcv_to_json(const PcvReport& report);

Json extraction_to_json(const ExtractionResult& result);

/// Two-space indented dump with a trailing newline.
std::string dump(const Json& j);
Json read_json(const std::string& path);
void write_text(const std::string& path, const std::string& text);

}  // namespace rrglm::io
