#include "rrglm/cli.hpp"

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "rrglm/errors.hpp"
#include "rrglm/extraction.hpp"
#include "rrglm/io.hpp"
#include "rrglm/oracles.hpp"
#include "rrglm/solvers.hpp"
#include "rrglm/tuning.hpp"

namespace rrglm::cli {

namespace {

namespace fs = std::filesystem;

struct RunConfig {
  std::string command;
  std::string design;
  std::string response;
  std::string family = "gaussian";
  std::string rule;
  std::string grid = "10,0.05";
  std::string rank;
  double eta = 0.0;
  std::string eta_grid;
  int folds = 5;
  bool bic = false;
  std::uint64_t seed = 1;
  bool standardize = false;
  bool no_intercept = false;
  int jobs = 1;
  std::string out = ".";
  std::string estimate;
  std::string type = "1";
  bool labels = false;
  double tol = 1e-9;
  int max_iter = 5000;
  int max_updates = 500;
  double decay = 0.7;
};

double parse_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw InputError(what + ": not a number: '" + s + "'");
  }
  return v;
}

Index parse_index(const std::string& s, const std::string& what) {
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw InputError(what + ": not an integer: '" + s + "'");
  }
  return static_cast<Index>(v);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) parts.push_back(item);
  return parts;
}

std::pair<int, double> parse_grid(const std::string& s) {
  const auto parts = split_list(s);
  if (parts.size() != 2) throw InputError("--grid expects L,ratio");
  return {static_cast<int>(parse_index(parts[0], "--grid L")), parse_double(parts[1], "--grid ratio")};
}

/// A single R means ranks 1..R; a comma list is taken as given.
std::vector<Index> parse_ranks(const std::string& s) {
  std::vector<Index> ranks;
  const auto parts = split_list(s);
  if (parts.size() == 1) {
    const Index r = parse_index(parts[0], "--rank");
    for (Index k = 1; k <= r; ++k) ranks.push_back(k);
  } else {
    for (const auto& p : parts) ranks.push_back(parse_index(p, "--rank"));
  }
  if (ranks.empty()) throw InputError("--rank: no ranks given");
  return ranks;
}

FitOptions fit_options(const RunConfig& cfg) {
  FitOptions opts;
  opts.tol = cfg.tol;
  opts.max_iter = cfg.max_iter;
  opts.validate();
  return opts;
}

fs::path out_dir(const RunConfig& cfg) {
  fs::path dir(cfg.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory " + cfg.out + ": " + ec.message());
  return dir;
}

io::LoadedData load(const RunConfig& cfg) {
  if (cfg.design.empty()) throw InputError("--design is required");
  if (cfg.response.empty()) throw InputError("--response is required");
  return io::load_dataset(cfg.design, cfg.response, Family::parse(cfg.family), !cfg.no_intercept, cfg.standardize);
}

bool constrained_mode(const RunConfig& cfg) {
  if (cfg.rule.empty()) {
    if (cfg.rank.empty()) throw InputError("either --rule or --rank is required");
    return true;
  }
  return parse_rule(cfg.rule).kind == RuleKind::quantile;
}

io::Model fit_model(const RunConfig& cfg, const io::LoadedData& loaded) {
  const FitOptions opts = fit_options(cfg);
  io::Model model{loaded.data.family, loaded.predictor_names, loaded.response_names, loaded.standardization, {}};
  if (constrained_mode(cfg)) {
    Index r = 0;
    double eta = cfg.eta;
    if (!cfg.rule.empty()) {
      const ThresholdRule rule = parse_rule(cfg.rule);
      r = rule.rank;
      eta = rule.eta;
    } else {
      r = parse_index(cfg.rank, "--rank");
    }
    model.estimate = constrained_fit(loaded.data, r, eta, opts);
  } else {
    model.estimate = penalized_fit(loaded.data, parse_rule(cfg.rule), opts);
  }
  return model;
}

std::vector<PathSpec> path_specs(const RunConfig& cfg, const DataSet& data) {
  std::vector<double> etas;
  if (!cfg.eta_grid.empty()) {
    for (const auto& e : split_list(cfg.eta_grid)) etas.push_back(parse_double(e, "--eta-grid"));
  }
  std::vector<PathSpec> specs;
  if (constrained_mode(cfg)) {
    double eta = cfg.eta;
    std::vector<Index> ranks;
    if (!cfg.rank.empty()) {
      ranks = parse_ranks(cfg.rank);
    } else {
      for (Index k = 1; k <= std::min(data.p(), data.m()); ++k) ranks.push_back(k);
    }
    if (!cfg.rule.empty()) eta = parse_rule(cfg.rule).eta;
    if (etas.empty()) etas.push_back(eta);
    for (double e : etas) {
      PathSpec spec;
      spec.mode = PathSpec::Mode::constrained;
      spec.ranks = ranks;
      spec.eta = e;
      specs.push_back(spec);
    }
    return specs;
  }
  const ThresholdRule base = parse_rule(cfg.rule);
  if (!etas.empty() && base.kind != RuleKind::hard_ridge) {
    throw UsageError("--eta-grid applies to hardridge and quantile rules only");
  }
  if (etas.empty()) etas.push_back(base.eta);
  const auto [L, ratio] = parse_grid(cfg.grid);
  for (double e : etas) {
    PathSpec spec;
    spec.rule = base;
    if (base.kind == RuleKind::hard_ridge) spec.rule.eta = e;
    spec.lambdas = lambda_grid(data, spec.rule, L, ratio, fit_options(cfg));
    specs.push_back(spec);
  }
  return specs;
}

SolutionPath run_path(const RunConfig& cfg, const DataSet& data) {
  SolutionPath path;
  for (const PathSpec& spec : path_specs(cfg, data)) {
    SolutionPath part = fit_path(data, spec, fit_options(cfg), cfg.jobs);
    for (auto& e : part.entries) path.entries.push_back(std::move(e));
  }
  bool any = false;
  for (const auto& e : path.entries) any = any || e.ok();
  if (!any) throw NumericalError("every path entry failed; first error: " + path.entries.front().error);
  return path;
}

Matrix design_for(const io::Model& model, const std::string& design_path) {
  io::CsvTable table = io::read_csv(design_path);
  const auto expected = static_cast<Index>(model.predictor_names.size());
  if (table.values.cols() != expected) {
    throw InputError(design_path + ": expected " + std::to_string(expected) + " predictor columns, found " +
                     std::to_string(table.values.cols()));
  }
  const Matrix predictors = model.standardization.apply(table.values);
  if (!model.estimate.has_intercept) return predictors;
  Matrix X(predictors.rows(), predictors.cols() + 1);
  X.col(0).setOnes();
  X.rightCols(predictors.cols()) = predictors;
  return X;
}

std::vector<std::string> numbered(const std::string& prefix, Index count) {
  std::vector<std::string> names;
  for (Index k = 1; k <= count; ++k) names.push_back(prefix + std::to_string(k));
  return names;
}

void print_estimate(const CoefficientEstimate& est) {
  std::cout << "rule " << est.rule.to_string() << ": rank " << est.rank << ", objective " << est.objective
            << ", iterations " << est.iterations << (est.converged ? "" : " (not converged)")
            << ", fixed-point residual " << est.fixed_point_residual << "\n";
}

int cmd_fit(const RunConfig& cfg) {
  const io::LoadedData loaded = load(cfg);
  const io::Model model = fit_model(cfg, loaded);
  const fs::path dir = out_dir(cfg);
  io::write_text((dir / "model.json").string(), io::dump(io::model_to_json(model)));
  print_estimate(model.estimate);
  if (!model.estimate.converged) {
    throw NumericalError("fit did not converge within " + std::to_string(cfg.max_iter) + " iterations");
  }
  return kExitOk;
}

int cmd_path(const RunConfig& cfg) {
  const io::LoadedData loaded = load(cfg);
  io::PathFile file{loaded.data.family, loaded.predictor_names, loaded.response_names, loaded.standardization,
                    run_path(cfg, loaded.data)};
  const fs::path dir = out_dir(cfg);
  io::write_text((dir / "path.json").string(), io::dump(io::path_to_json(file)));
  for (const auto& e : file.path.entries) {
    if (e.ok()) {
      print_estimate(*e.estimate);
    } else {
      std::cout << "rule " << e.rule.to_string() << ": failed: " << e.error << "\n";
    }
  }
  return kExitOk;
}

int cmd_tune(const RunConfig& cfg) {
  const io::LoadedData loaded = load(cfg);
  const SolutionPath path = run_path(cfg, loaded.data);
  PcvOptions popts;
  popts.folds = cfg.folds;
  popts.use_bic = cfg.bic;
  popts.seed = cfg.seed;
  popts.jobs = cfg.jobs;
  const PcvReport report = pcv(loaded.data, path, popts);
  const PathEntry& chosen = path.entries.at(report.selected);
  const fs::path dir = out_dir(cfg);
  io::write_text((dir / "pcv_report.json").string(), io::dump(io::pcv_to_json(report)));
  if (!chosen.ok() || !report.best().ok) throw NumericalError("no candidate produced a finite CV score");

  const io::Model model{loaded.data.family, loaded.predictor_names, loaded.response_names, loaded.standardization,
                        *chosen.estimate};
  io::write_text((dir / "model.json").string(), io::dump(io::model_to_json(model)));
  std::cout << "selected candidate " << report.selected << " of " << report.candidates.size() << ": "
            << chosen.rule.to_string() << ", rank " << report.best().rank << ", score " << report.best().score
            << "\n";
  return kExitOk;
}

int cmd_reduce(const RunConfig& cfg) {
  const io::LoadedData loaded = load(cfg);
  const DataSet& data = loaded.data;
  const Index target =
      cfg.rank.empty() ? default_reduction_target(data.n(), data.p(), data.m()) : parse_index(cfg.rank, "--rank");
  const CoolingSchedule schedule = CoolingSchedule::geometric(data.p(), target, cfg.decay, cfg.max_updates);
  const ReductionResult result = progressive_reduce(data, target, schedule, cfg.eta, fit_options(cfg));

  std::string stages;
  for (std::size_t t = 0; t < result.stage_ranks.size(); ++t) {
    stages += (t ? "," : "") + std::to_string(result.stage_ranks[t]);
  }
  std::string predictors;
  for (std::size_t j = 0; j < loaded.predictor_names.size(); ++j) {
    predictors += (j ? "," : "") + loaded.predictor_names[j];
  }
  const std::vector<std::string> comments = {
      "rrglm reduce", "design: " + cfg.design, "response: " + cfg.response, "family: " + cfg.family,
      "target rank: " + std::to_string(target), "stage ranks: " + stages,
      std::string("standardized: ") + (cfg.standardize ? "yes" : "no")};

  const fs::path dir = out_dir(cfg);
  const Matrix features = result.reduced.X.rightCols(target);
  io::write_csv((dir / "reduced_design.csv").string(), numbered("z", target), features, comments);
  std::vector<std::string> transform_comments = comments;
  transform_comments.push_back("rows follow predictor order: " + predictors);
  io::write_csv((dir / "transform.csv").string(), numbered("z", target), result.transform, transform_comments);

  io::Json stages_json = io::Json::array();
  for (std::size_t t = 0; t < result.stages.size(); ++t) {
    stages_json.push_back({{"rank", result.stage_ranks[t]},
                           {"iterations", result.stages[t].iterations},
                           {"converged", result.stages[t].converged},
                           {"objective", result.stages[t].objective}});
  }
  const io::Json report{{"target", target},
                        {"stage_ranks", result.stage_ranks},
                        {"stages", std::move(stages_json)},
                        {"orthogonality_error", result.orthogonality_error},
                        {"max_updates", cfg.max_updates},
                        {"decay", cfg.decay}};
  io::write_text((dir / "reduce_report.json").string(), io::dump(report));
  std::cout << "reduced " << data.p() << " predictors to " << target << " through ranks " << stages << "\n";
  return kExitOk;
}

int cmd_extract(const RunConfig& cfg) {
  io::Model model;
  if (!cfg.estimate.empty()) {
    model = io::model_from_json(io::read_json(cfg.estimate));
  } else {
    model = fit_model(cfg, load(cfg));
  }
  if (cfg.design.empty()) throw InputError("--design is required");
  const Matrix X = design_for(model, cfg.design);
  const ExtractionResult result = extract(model.estimate, X, parse_extraction(cfg.type));
  const fs::path dir = out_dir(cfg);
  io::write_csv((dir / "features.csv").string(), numbered("f", result.rank()), result.features(),
                {"rrglm extract", "type: " + std::string(extraction_name(result.kind)),
                 "rule: " + model.estimate.rule.to_string()});
  io::write_text((dir / "extraction.json").string(), io::dump(io::extraction_to_json(result)));
  std::cout << "extracted " << result.rank() << " features (" << extraction_name(result.kind) << ")\n";
  return kExitOk;
}

int cmd_predict(const RunConfig& cfg) {
  if (cfg.estimate.empty()) throw InputError("--estimate is required");
  if (cfg.design.empty()) throw InputError("--design is required");
  const io::Model model = io::model_from_json(io::read_json(cfg.estimate));
  const Matrix X = design_for(model, cfg.design);
  if (X.cols() != model.estimate.B.rows()) throw InputError("design width does not match the estimate");
  const Matrix mu = mean_matrix(model.family, X, model.estimate.B);
  const fs::path dir = out_dir(cfg);
  io::write_csv((dir / "predictions.csv").string(), model.response_names, mu);
  if (cfg.labels) {
    if (model.family.kind != FamilyKind::bernoulli) throw UsageError("--labels needs a bernoulli model");
    const Matrix labels = mu.unaryExpr([](double p) { return p >= 0.5 ? 1.0 : 0.0; });
    io::write_csv((dir / "labels.csv").string(), model.response_names, labels);
  }
  std::cout << "predicted " << mu.rows() << " rows\n";
  return kExitOk;
}

int cmd_verify(const RunConfig& cfg) {
  bool all = true;
  for (const auto& [name, v] : oracles::run_oracle_suite(cfg.seed)) {
    all = all && v.pass;
    std::cout << (v.pass ? "PASS " : "FAIL ") << name << ": gap " << v.gap << " at " << v.witness << "\n";
  }
  return all ? kExitOk : kExitNumerical;
}

void write_diagnostics(const RunConfig& cfg, const std::string& message) {
  try {
    const fs::path dir = out_dir(cfg);
    const io::Json j{{"command", cfg.command}, {"status", "numerical failure"}, {"error", message}};
    io::write_text((dir / "diagnostics.json").string(), io::dump(j));
  } catch (const std::exception& e) {
    std::cerr << "rrglm: could not write diagnostics: " << e.what() << "\n";
  }
}

}  // namespace

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"Singular-value penalized and rank-constrained vector GLMs", "rrglm"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto data_opts = [&](CLI::App* sub) {
    sub->add_option("--design", cfg.design, "Design CSV (header row, n x p)");
    sub->add_option("--response", cfg.response, "Response CSV (header row, n x m)");
    sub->add_option("--family", cfg.family, "gaussian or bernoulli")
        ->check(CLI::IsMember({"gaussian", "bernoulli"}));
    sub->add_flag("--standardize", cfg.standardize, "Center and scale each predictor");
    sub->add_flag("--no-intercept", cfg.no_intercept, "Do not prepend an intercept column");
    sub->add_option("--out", cfg.out, "Output directory");
    sub->add_option("--tol", cfg.tol, "Relative change tolerance");
    sub->add_option("--max-iter", cfg.max_iter, "Iteration cap per fit");
  };
  auto rule_opts = [&](CLI::App* sub) {
    sub->add_option("--rule", cfg.rule, "Rule spec, e.g. soft:lambda=0.5 or quantile:r=2,eta=0");
    sub->add_option("--rank", cfg.rank, "Rank (fit) or ranks: R for 1..R, or a comma list");
    sub->add_option("--eta", cfg.eta, "Ridge parameter of rank-constrained fits");
  };
  auto grid_opts = [&](CLI::App* sub) {
    sub->add_option("--grid", cfg.grid, "Lambda grid as L,ratio");
    sub->add_option("--eta-grid", cfg.eta_grid, "Comma list of eta values");
    sub->add_option("--jobs", cfg.jobs, "Worker threads")->check(CLI::PositiveNumber);
  };

  CLI::App* fit = app.add_subcommand("fit", "Fit one estimate");
  data_opts(fit);
  rule_opts(fit);

  CLI::App* path = app.add_subcommand("path", "Fit a solution path");
  data_opts(path);
  rule_opts(path);
  grid_opts(path);

  CLI::App* tune = app.add_subcommand("tune", "Select a path entry by projective cross-validation");
  data_opts(tune);
  rule_opts(tune);
  grid_opts(tune);
  tune->add_option("--folds", cfg.folds, "Number of folds")->check(CLI::Range(2, 1 << 30));
  tune->add_flag("--bic", cfg.bic, "Add the BIC correction to the CV deviance");
  tune->add_option("--seed", cfg.seed, "Fold assignment seed");

  CLI::App* reduce = app.add_subcommand("reduce", "Progressive feature-space reduction");
  data_opts(reduce);
  reduce->add_option("--rank", cfg.rank, "Target number of features");
  reduce->add_option("--eta", cfg.eta, "Ridge parameter");
  reduce->add_option("--decay", cfg.decay, "Cooling schedule decay");
  reduce->add_option("--max-updates", cfg.max_updates, "Updates per stage");

  CLI::App* ext = app.add_subcommand("extract", "Type-I or Type-II feature extraction");
  data_opts(ext);
  rule_opts(ext);
  ext->add_option("--estimate", cfg.estimate, "model.json from fit or tune");
  ext->add_option("--type", cfg.type, "1, 1s (scaled) or 2")->check(CLI::IsMember({"1", "1s", "2"}));

  CLI::App* predict = app.add_subcommand("predict", "Mean responses on a new design");
  predict->add_option("--estimate", cfg.estimate, "model.json from fit or tune")->required();
  predict->add_option("--design", cfg.design, "Design CSV")->required();
  predict->add_option("--out", cfg.out, "Output directory");
  predict->add_flag("--labels", cfg.labels, "Also write 0/1 labels (bernoulli)");

  CLI::App* verify = app.add_subcommand("verify", "Run the oracle checks");
  verify->group("");
  verify->add_option("--seed", cfg.seed, "Seed");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (fit->parsed()) return cfg.command = "fit", cmd_fit(cfg);
    if (path->parsed()) return cfg.command = "path", cmd_path(cfg);
    if (tune->parsed()) return cfg.command = "tune", cmd_tune(cfg);
    if (reduce->parsed()) return cfg.command = "reduce", cmd_reduce(cfg);
    if (ext->parsed()) return cfg.command = "extract", cmd_extract(cfg);
    if (predict->parsed()) return cfg.command = "predict", cmd_predict(cfg);
    if (verify->parsed()) return cfg.command = "verify", cmd_verify(cfg);
  } catch (const NumericalError& e) {
    std::cerr << "rrglm: numerical failure: " << e.what() << "\n";
    write_diagnostics(cfg, e.what());
    return kExitNumerical;
  } catch (const Error& e) {
    std::cerr << "rrglm: error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "rrglm: error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}

}  // namespace rrglm::cli
