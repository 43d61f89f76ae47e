#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "rrglm/cli.hpp"
#include "rrglm/errors.hpp"
#include "rrglm/io.hpp"
#include "synthetic.hpp"

using namespace rrglm;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("rrglm_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& file) const { return (path / file).string(); }
};

std::string slurp(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write(const std::string& file, const std::string& text) { io::write_text(file, text); }

std::vector<std::string> names(const std::string& prefix, Index count) {
  std::vector<std::string> out;
  for (Index i = 1; i <= count; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

void write_problem(const TempDir& dir, const DataSet& data) {
  const Matrix predictors = data.X.rightCols(data.p());
  io::write_csv(dir / "X.csv", names("x", data.p()), predictors);
  io::write_csv(dir / "Y.csv", names("y", data.m()), data.Y);
}

}  // namespace

TEST_CASE("load_dataset adds the intercept unless disabled") {
  TempDir dir("load");
  write(dir / "X.csv", "a,b\n1,2\n3,4\n5,7\n");
  write(dir / "Y.csv", "# a comment\ny\n0.5\n1.5\n-2\n");
  const io::LoadedData with = io::load_dataset(dir / "X.csv", dir / "Y.csv", Family::gaussian(), true, false);
  CHECK(with.data.X.cols() == 3);
  CHECK(with.data.X(2, 2) == 7.0);
  CHECK(with.predictor_names == std::vector<std::string>{"a", "b"});
  const io::LoadedData without = io::load_dataset(dir / "X.csv", dir / "Y.csv", Family::gaussian(), false, false);
  CHECK(without.data.X.cols() == 2);
}

TEST_CASE("standardized predictors have mean 0 and sd 1") {
  TempDir dir("standardize");
  std::mt19937_64 rng(1);
  Matrix P = testing::gaussian(rng, 25, 3) * 4.0;
  P.col(1).array() += 10.0;
  io::write_csv(dir / "X.csv", names("x", 3), P);
  io::write_csv(dir / "Y.csv", names("y", 1), testing::gaussian(rng, 25, 1));
  const io::LoadedData d = io::load_dataset(dir / "X.csv", dir / "Y.csv", Family::gaussian(), true, true);
  for (Index j = 1; j <= 3; ++j) {
    const Vector c = d.data.X.col(j);
    const double mean = c.mean();
    const double sd = std::sqrt((c.array() - mean).square().sum() / 24.0);
    CHECK(std::abs(mean) <= 1e-10);
    CHECK(std::abs(sd - 1.0) <= 1e-10);
  }
  CHECK((d.standardization.apply(P) - d.data.X.rightCols(3)).cwiseAbs().maxCoeff() <= 1e-12);

  write(dir / "C.csv", "a,b\n1,2\n1,3\n1,4\n");
  write(dir / "Y3.csv", "y\n1\n2\n3\n");
  CHECK_THROWS_AS(io::load_dataset(dir / "C.csv", dir / "Y3.csv", Family::gaussian(), true, true), InputError);
}

TEST_CASE("load_dataset errors name the problem") {
  TempDir dir("errors");
  write(dir / "X.csv", "a,b\n1,2\n3,oops\n");
  write(dir / "Y.csv", "y\n0\n1\n");
  write(dir / "Y3.csv", "y\n0\n1\n1\n");
  write(dir / "X2.csv", "a,b\n1,2\n3,4\n");
  write(dir / "Yb.csv", "y\n0\n2\n");
  try {
    io::load_dataset(dir / "X.csv", dir / "Y.csv", Family::gaussian(), true, false);
    FAIL("expected an error");
  } catch (const InputError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 2") != std::string::npos);
    CHECK(msg.find("column 2") != std::string::npos);
    CHECK(msg.find("oops") != std::string::npos);
  }
  CHECK_THROWS_AS(io::load_dataset(dir / "X2.csv", dir / "Y3.csv", Family::gaussian(), true, false), InputError);
  try {
    io::load_dataset(dir / "X2.csv", dir / "Yb.csv", Family::bernoulli(), true, false);
    FAIL("expected an error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }
  CHECK_THROWS_AS(io::load_dataset(dir / "missing.csv", dir / "Y.csv", Family::gaussian(), true, false), InputError);
  write(dir / "ragged.csv", "a,b\n1\n");
  CHECK_THROWS_AS(io::read_csv(dir / "ragged.csv"), InputError);
}

TEST_CASE("fit on an identity design emits the thresholded response") {
  TempDir dir("fit");
  std::mt19937_64 rng(2);
  const Matrix Y = testing::gaussian(rng, 5, 3, 2.0);
  io::write_csv(dir / "X.csv", names("x", 5), Matrix::Identity(5, 5));
  io::write_csv(dir / "Y.csv", names("y", 3), Y);
  const int code = cli::run({"fit", "--design", dir / "X.csv", "--response", dir / "Y.csv", "--no-intercept",
                             "--rule", "soft:lambda=1", "--out", dir / "out"});
  REQUIRE(code == cli::kExitOk);
  const io::Model model = io::model_from_json(io::read_json(dir / "out/model.json"));
  CHECK(model.estimate.fixed_point_residual <= 1e-10);
  CHECK((model.estimate.B - apply_matrix(ThresholdRule::soft(1.0), Y)).norm() <= 1e-12);
  CHECK(model.estimate.rule == ThresholdRule::soft(1.0));
}

TEST_CASE("predict with a zero bernoulli estimate gives one half") {
  TempDir dir("predict");
  io::Model model;
  model.family = Family::bernoulli();
  model.predictor_names = {"a", "b"};
  model.response_names = {"y1", "y2"};
  model.estimate.B = Matrix::Zero(3, 2);
  model.estimate.rule = ThresholdRule::soft(1.0);
  io::write_text(dir / "model.json", io::dump(io::model_to_json(model)));
  write(dir / "new.csv", "a,b\n1,2\n-3,4\n0,0\n");
  REQUIRE(cli::run({"predict", "--estimate", dir / "model.json", "--design", dir / "new.csv", "--labels", "--out",
                    dir / "out"}) == cli::kExitOk);
  const io::CsvTable mu = io::read_csv(dir / "out/predictions.csv");
  CHECK(mu.header == model.response_names);
  CHECK((mu.values.array() == 0.5).all());
  CHECK(io::read_csv(dir / "out/labels.csv").values.rows() == 3);
  write(dir / "wide.csv", "a,b,c\n1,2,3\n");
  CHECK(cli::run({"predict", "--estimate", dir / "model.json", "--design", dir / "wide.csv", "--out", dir / "out"}) ==
        cli::kExitInput);
}

TEST_CASE("path file round trip is exact") {
  TempDir dir("path");
  const auto prob = testing::gaussian_low_rank(3, 60, 5, 4, {4.0, 2.0}, 1.0);
  write_problem(dir, prob.data);
  REQUIRE(cli::run({"path", "--design", dir / "X.csv", "--response", dir / "Y.csv", "--rule", "hard", "--grid",
                    "6,0.05", "--out", dir / "out"}) == cli::kExitOk);
  const std::string text = slurp(dir / "out/path.json");
  const io::PathFile file = io::path_from_json(io::Json::parse(text));
  CHECK(file.path.entries.size() == 6);
  CHECK(io::dump(io::path_to_json(file)) == text);
  for (const auto& e : file.path.entries) {
    REQUIRE(e.ok());
    CHECK(e.estimate->rank == numerical_rank(e.estimate->slope_svd.s));
  }
}

TEST_CASE("tune is byte-for-byte reproducible and selects the true rank") {
  TempDir dir("tune");
  const auto prob = testing::gaussian_low_rank(4, 400, 12, 10, {14.0, 10.0}, 1.0);
  write_problem(dir, prob.data);
  const std::vector<std::string> base = {"tune", "--design", dir / "X.csv", "--response", dir / "Y.csv", "--rule",
                                         "hard", "--grid", "20,0.01", "--folds", "5", "--bic", "--seed", "17"};
  auto with_out = [&](const std::string& out) {
    auto args = base;
    args.push_back("--out");
    args.push_back(out);
    return args;
  };
  REQUIRE(cli::run(with_out(dir / "a")) == cli::kExitOk);
  REQUIRE(cli::run(with_out(dir / "b")) == cli::kExitOk);
  CHECK(slurp(dir / "a/pcv_report.json") == slurp(dir / "b/pcv_report.json"));
  CHECK(slurp(dir / "a/model.json") == slurp(dir / "b/model.json"));
  const io::Json report = io::read_json(dir / "a/pcv_report.json");
  CHECK(report.at("selected_rank").get<Index>() == 2);
  CHECK(report.at("seed").get<std::uint64_t>() == 17);
}

TEST_CASE("reduce writes the reduced design with a provenance header") {
  TempDir dir("reduce");
  const auto prob = testing::gaussian_low_rank(5, 60, 12, 4, {3.0}, 0.5);
  write_problem(dir, prob.data);
  REQUIRE(cli::run({"reduce", "--design", dir / "X.csv", "--response", dir / "Y.csv", "--rank", "3", "--out",
                    dir / "out"}) == cli::kExitOk);
  const std::string text = slurp(dir / "out/reduced_design.csv");
  CHECK(text.rfind("# rrglm reduce", 0) == 0);
  CHECK(text.find("target rank: 3") != std::string::npos);
  const io::CsvTable Z = io::read_csv(dir / "out/reduced_design.csv");
  CHECK(Z.values.rows() == 60);
  CHECK(Z.values.cols() == 3);
  const io::CsvTable U = io::read_csv(dir / "out/transform.csv");
  CHECK(U.values.rows() == 12);
  CHECK((Z.values - prob.data.X.rightCols(12) * U.values).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("extract from a saved estimate") {
  TempDir dir("extract");
  const auto prob = testing::gaussian_low_rank(6, 80, 6, 5, {5.0, 3.0}, 0.5);
  write_problem(dir, prob.data);
  REQUIRE(cli::run({"fit", "--design", dir / "X.csv", "--response", dir / "Y.csv", "--rank", "2", "--out",
                    dir / "fit"}) == cli::kExitOk);
  REQUIRE(cli::run({"extract", "--estimate", dir / "fit/model.json", "--design", dir / "X.csv", "--type", "2",
                    "--out", dir / "ext"}) == cli::kExitOk);
  const io::CsvTable Z = io::read_csv(dir / "ext/features.csv");
  REQUIRE(Z.values.cols() == 2);
  const double off = std::abs((Z.values.col(0).transpose() * Z.values.col(1))(0));
  CHECK(off <= 1e-8 * Z.values.colwise().squaredNorm().maxCoeff());
}

TEST_CASE("exit codes") {
  TempDir dir("codes");
  const auto prob = testing::gaussian_low_rank(7, 40, 4, 3, {3.0}, 1.0);
  write_problem(dir, prob.data);
  CHECK(cli::run({"fit", "--design", dir / "nope.csv", "--response", dir / "Y.csv", "--rule", "soft:lambda=1"}) ==
        cli::kExitInput);
  CHECK(cli::run({"fit", "--design", dir / "X.csv", "--response", dir / "Y.csv", "--rule", "lasso:lambda=1"}) ==
        cli::kExitInput);
  CHECK(cli::run({"fit", "--bogus-flag"}) == cli::kExitInput);
  CHECK(cli::run({}) == cli::kExitInput);
  CHECK(cli::run({"fit", "--design", dir / "X.csv", "--response", dir / "Y.csv", "--rule", "soft:lambda=0.01",
                  "--max-iter", "1", "--out", dir / "slow"}) == cli::kExitNumerical);
  CHECK(fs::exists(dir / "slow/diagnostics.json"));
  CHECK(fs::exists(dir / "slow/model.json"));
  CHECK(cli::run({"verify", "--seed", "2"}) == cli::kExitOk);
}
