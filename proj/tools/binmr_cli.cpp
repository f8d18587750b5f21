// binmr: fit, tune, predict and benchmark binned multinomial regression models.
//
// Exit codes: 0 success, 2 usage, 3 data or validation error, 4 numerical failure.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "binmr/baselines.hpp"
#include "binmr/benchmark.hpp"
#include "binmr/errors.hpp"
#include "binmr/inference.hpp"
#include "binmr/io.hpp"
#include "binmr/simulation.hpp"
#include "binmr/solver.hpp"
#include "binmr/tuning_path.hpp"

namespace fs = std::filesystem;
using namespace binmr;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataOptions {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::string binning;
  std::string method = "IBMR-int";
  bool use_covariates = false;
  std::size_t subsample = 0;
  std::string weights;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
};

struct LoadedCollection {
  DatasetCollection collection;
  std::vector<std::string> feature_names;
  bool all_have_covariates = true;
};

std::string dataset_id(const std::string& dir) {
  fs::path p(dir);
  if (!p.has_filename()) {
    p = p.parent_path();
  }
  return p.filename().string();
}

LoadedCollection load_collection(const std::vector<std::string>& dirs, const BinningSpec& spec,
                                 const DataOptions& opt, bool apply_subsample) {
  LoadedCollection out;
  std::vector<AnnotatedDataset> datasets;
  std::vector<DatasetBinning> binnings;
  for (const auto& dir : dirs) {
    const std::string id = dataset_id(dir);
    const auto k = spec.find_dataset(id);
    if (!k) {
      throw DataError("dataset directory '" + dir + "': binning file has no row for '" + id + "'");
    }
    LoadedDataset loaded = load_dataset(dir);
    if (out.feature_names.empty()) {
      out.feature_names = loaded.feature_names;
    } else if (loaded.feature_names != out.feature_names) {
      throw DataError("dataset '" + id + "' has different feature columns than '" + dataset_id(dirs.front()) + "'");
    }
    out.all_have_covariates = out.all_have_covariates && loaded.has_covariates;
    if (apply_subsample && opt.subsample > 0) {
      std::vector<double> w;
      if (!opt.weights.empty()) {
        w = read_weights(fs::path(dir) / opt.weights);
      }
      loaded.data = subsample(loaded.data, opt.subsample, w, opt.seed + datasets.size());
    }
    datasets.push_back(std::move(loaded.data));
    binnings.push_back(spec.dataset(*k));
  }
  out.collection = DatasetCollection(std::move(datasets), BinningSpec(spec.fine(), std::move(binnings)));
  require_valid(out.collection);
  return out;
}

Method parse_real_method(const std::string& name) {
  Method m;
  try {
    m = parse_method(name);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (is_oracle(m)) {
    throw UsageError(name + " needs true fine labels and is only available in the benchmark command");
  }
  return m;
}

/// The training collection the method's solver sees. IBMR-int keeps Z.tsv covariates only
/// with --use-covariates; otherwise each dataset gets an intercept column.
DatasetCollection method_collection(Method m, const LoadedCollection& loaded, bool use_covariates) {
  if (m == Method::ibmr_int && use_covariates) {
    if (!loaded.all_have_covariates) {
      throw DataError("--use-covariates: every training directory needs a Z.tsv");
    }
    return loaded.collection;
  }
  switch (m) {
    case Method::ibmr_int:
      return make_ibmr_int(loaded.collection);
    case Method::ibmr_ng:
      return make_ibmr_ng(loaded.collection);
    default:
      return make_subset(loaded.collection);
  }
}

ModelArtifact make_artifact(const LoadedCollection& loaded, const Coefficients& coeffs, double lambda, double rho,
                            Method m) {
  ModelArtifact a;
  a.categories = loaded.collection.binning().fine();
  a.coeffs = coeffs;
  a.lambda = lambda;
  a.rho = rho;
  a.method = method_name(m);
  a.feature_names = loaded.feature_names;
  a.feature_sds = pooled_feature_sds(loaded.collection.datasets());
  return a;
}

void write_ranking(const fs::path& file, const ModelArtifact& a, std::size_t top_n) {
  std::ofstream out(file);
  out << "category\trank\tfeature\tscore\n";
  const auto ranking = standardized_coefficient_ranking(a.coeffs, a.feature_sds, top_n);
  for (std::size_t l = 0; l < ranking.size(); ++l) {
    for (std::size_t r = 0; r < ranking[l].size(); ++r) {
      out << a.categories.name(l) << '\t' << r + 1 << '\t' << a.feature_names[ranking[l][r].feature] << '\t'
          << format_double(ranking[l][r].score) << '\n';
    }
  }
}

void write_trace(const fs::path& file, const FitResult& result) {
  std::ofstream out(file);
  out << "iteration\tobjective\n";
  for (std::size_t t = 0; t < result.objective_trace.size(); ++t) {
    out << t << '\t' << format_double(result.objective_trace[t]) << '\n';
  }
}

void report_status(const FitResult& r) {
  if (r.status != FitStatus::converged) {
    std::cerr << "warning: " << r.message << '\n';
  }
}

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      values.push_back(parse_double(item, flag, 1));
    } catch (const DataError&) {
      throw UsageError(flag + ": '" + item + "' is not a number");
    }
  }
  if (values.empty()) {
    throw UsageError(flag + " needs at least one value");
  }
  return values;
}

std::vector<std::string> read_lines(const fs::path& file) {
  std::ifstream in(file);
  if (!in) {
    throw DataError("cannot open '" + file.string() + "'");
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (!line.empty()) {
      lines.push_back(line);
    }
  }
  return lines;
}

void write_matrix(const fs::path& file, const Matrix& m, const std::vector<std::string>& header) {
  std::ofstream out(file);
  for (std::size_t j = 0; j < header.size(); ++j) {
    out << (j ? "\t" : "") << header[j];
  }
  out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      out << (j ? "\t" : "") << format_double(m(i, j));
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------

int cmd_fit(const DataOptions& opt, double lambda, double rho, const std::string& out_dir, std::size_t top_n) {
  const Method m = parse_real_method(opt.method);
  const BinningSpec spec = read_binning(fs::path(opt.binning));
  const LoadedCollection loaded = load_collection(opt.train, spec, opt, true);

  SolverConfig config;
  config.lambda = lambda;
  config.rho = rho;
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  FitResult result = fit(method_collection(m, loaded, opt.use_covariates), config);
  if (m == Method::relabel) {
    report_status(result);
    result = fit(make_relabel(loaded.collection, result.coeffs), config);
  }
  report_status(result);

  fs::create_directories(out_dir);
  const ModelArtifact artifact = make_artifact(loaded, result.coeffs, lambda, rho, m);
  save_model(fs::path(out_dir) / "model.tsv", artifact);
  write_trace(fs::path(out_dir) / "trace.tsv", result);
  write_ranking(fs::path(out_dir) / "ranking.tsv", artifact, top_n);
  std::cout << "fit " << method_name(m) << ": " << result.iterations << " iterations, "
            << result.active_rows.size() << " active rows, objective " << format_double(result.objective_trace.back())
            << '\n';
  return 0;
}

int cmd_path(const DataOptions& opt, std::size_t n_lambda, double ratio, const std::string& rhos_text,
             const std::string& out_dir, std::size_t top_n) {
  const Method m = parse_real_method(opt.method);
  if (opt.validation.empty()) {
    throw UsageError("path needs --validation");
  }
  if (n_lambda == 0 || !(ratio > 0.0 && ratio < 1.0)) {
    throw UsageError("--n-lambda must be positive and --lambda-min-ratio in (0, 1)");
  }
  const BinningSpec spec = read_binning(fs::path(opt.binning));
  LoadedCollection loaded = load_collection(opt.train, spec, opt, true);
  const LoadedCollection validation = load_collection(opt.validation, spec, opt, false);

  MethodFitOptions options;
  options.n_lambda = n_lambda;
  options.lambda_min_ratio = ratio;
  options.rhos = parse_list(rhos_text, "--rhos");
  options.path.threads = opt.threads;

  MethodFit result;
  if (m == Method::ibmr_int && opt.use_covariates) {
    const DatasetCollection train = method_collection(m, loaded, true);
    result.method = m;
    const TuningGrid grid = build_grid(train, n_lambda, ratio, options.rhos, options.path.solver);
    result.path = fit_path(train, validation.collection, grid, options.path);
    result.coeffs = result.path.best().fit->coeffs;
    result.lambda_max = grid.lambdas.front();
  } else {
    result = fit_method(m, loaded.collection, validation.collection, options);
  }

  fs::create_directories(out_dir);
  {
    std::ofstream report(fs::path(out_dir) / "path.tsv");
    write_path_report(report, result.path);
  }
  if (result.first_stage) {
    std::ofstream report(fs::path(out_dir) / "path_first_stage.tsv");
    write_path_report(report, *result.first_stage);
  }
  const PathEntry& best = result.path.best();
  const ModelArtifact artifact = make_artifact(loaded, result.coeffs, best.lambda, best.rho, m);
  save_model(fs::path(out_dir) / "model.tsv", artifact);
  write_ranking(fs::path(out_dir) / "ranking.tsv", artifact, top_n);
  std::cout << "path " << method_name(m) << ": lambda_max " << format_double(result.lambda_max) << ", selected lambda "
            << format_double(best.lambda) << " rho " << format_double(best.rho) << ", validation NLL "
            << format_double(best.validation_nll) << '\n';
  return 0;
}

int cmd_predict(const std::string& model_file, const std::string& data_dir, const std::string& mode,
                const std::string& binning_file, const std::string& observed_file, const std::string& out_file) {
  const ModelArtifact model = load_model(fs::path(model_file));
  const LoadedDataset data = load_dataset(data_dir);
  if (data.feature_names != model.feature_names) {
    throw DataError("'" + data_dir + "' feature columns do not match the model's " +
                    std::to_string(model.feature_names.size()) + " features");
  }

  PredictionSet preds;
  if (mode == "fine") {
    preds = predict_fine(model.coeffs, data.data.X, model.categories);
  } else {
    if (binning_file.empty()) {
      throw UsageError("--mode " + mode + " needs --binning");
    }
    const BinningSpec spec = read_binning(fs::path(binning_file));
    if (!(spec.fine() == model.categories)) {
      throw DataError("binning categories differ from the model's categories");
    }
    const std::string id = dataset_id(data_dir);
    const auto k = spec.find_dataset(id);
    if (!k) {
      throw DataError("binning file has no row for dataset '" + id + "'");
    }
    if (mode == "conditional") {
      preds = predict_conditional(model.coeffs, data.data.X, data.data.y, spec, *k);
    } else if (mode == "coarse") {
      const ObservedTestLabelSet observed =
          observed_file.empty() ? ObservedTestLabelSet::from_data(spec.dataset(*k), data.data.y)
                                : ObservedTestLabelSet::from_labels(spec.dataset(*k), read_lines(observed_file));
      preds = predict_coarse(model.coeffs, data.data.X, spec, *k, observed);
    } else {
      throw UsageError("--mode must be fine, conditional or coarse");
    }
  }

  if (out_file.empty() || out_file == "-") {
    write_predictions(std::cout, preds);
  } else {
    std::ofstream out(out_file);
    if (!out) {
      throw DataError("cannot write '" + out_file + "'");
    }
    write_predictions(out, preds);
  }
  return 0;
}

int cmd_simulate(const std::string& config_file, const std::string& out_dir, std::optional<std::uint64_t> seed) {
  SimConfig config;
  if (!config_file.empty()) {
    std::ifstream in(config_file);
    if (!in) {
      throw DataError("cannot open '" + config_file + "'");
    }
    config = read_sim_config(in, config_file);
  }
  if (seed) {
    config.seed = *seed;
  }
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(config_file + ": " + e.what());
  }
  const SimData data = simulate(config);
  const fs::path root(out_dir);
  fs::create_directories(root);

  const auto features = default_names("f", config.p);
  const auto& truth = data.truth;
  for (const auto* collection : {&data.train, &data.validation}) {
    for (std::size_t k = 0; k < collection->num_datasets(); ++k) {
      save_dataset(root / collection->binning().dataset(k).id(), collection->dataset(k), features);
    }
  }
  save_dataset(root / "test", data.test, features);

  std::vector<DatasetBinning> all = data.train.binning().datasets();
  for (const auto& d : data.validation.binning().datasets()) {
    all.push_back(d);
  }
  all.emplace_back("test", sim_categories().names());
  {
    std::ofstream out(root / "binning.tsv");
    write_binning(out, BinningSpec(sim_categories(), std::move(all)));
  }
  {
    std::ofstream out(root / "config.txt");
    write_sim_config(out, config);
  }

  const fs::path truth_dir = root / "truth";
  fs::create_directories(truth_dir);
  write_matrix(truth_dir / "beta_star.tsv", truth.beta_star, sim_categories().names());
  write_matrix(truth_dir / "test_probs.tsv", truth.test_probs, sim_categories().names());
  for (std::size_t k = 0; k < kSimDatasets; ++k) {
    for (const auto& [collection, labels] :
         {std::pair{&data.train, &truth.train_fine_labels}, std::pair{&data.validation, &truth.validation_fine_labels}}) {
      std::ofstream out(truth_dir / (collection->binning().dataset(k).id() + "_fine_labels.tsv"));
      for (const auto& l : (*labels)[k]) {
        out << l << '\n';
      }
    }
  }
  std::cout << "simulated N=" << config.N << " p=" << config.p << " s=" << config.s << " b=" << config.b
            << " seed=" << config.seed << " into " << out_dir << '\n';
  return 0;
}

int cmd_benchmark(const std::string& scenarios_file, std::size_t replicates, std::uint64_t seed,
                  const std::vector<std::string>& method_names, std::size_t n_lambda, double ratio,
                  const std::string& rhos_text, std::size_t threads, const std::string& out_dir) {
  std::ifstream in(scenarios_file);
  if (!in) {
    throw DataError("cannot open '" + scenarios_file + "'");
  }
  BenchmarkOptions options;
  const auto scenarios = read_scenarios(in, scenarios_file);
  options.replicates = replicates;
  options.first_seed = seed;
  for (const auto& name : method_names) {
    try {
      options.methods.push_back(parse_method(name));
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  options.fit.n_lambda = n_lambda;
  options.fit.lambda_min_ratio = ratio;
  options.fit.rhos = parse_list(rhos_text, "--rhos");
  options.fit.path.threads = threads;
  options.log = &std::cerr;

  const auto rows = run_benchmark(scenarios, options);
  fs::create_directories(out_dir);
  {
    std::ofstream out(fs::path(out_dir) / "replicates.tsv");
    write_replicates(out, scenarios, rows);
  }
  {
    std::ofstream out(fs::path(out_dir) / "summary.tsv");
    write_summary(out, scenarios, rows);
  }
  write_summary(std::cout, scenarios, rows);
  return 0;
}

void add_data_options(CLI::App* cmd, DataOptions& opt, bool with_validation) {
  cmd->add_option("--train", opt.train, "Training dataset directories")->required()->expected(1, -1);
  if (with_validation) {
    cmd->add_option("--validation", opt.validation, "Validation dataset directories")->required()->expected(1, -1);
  }
  cmd->add_option("--binning", opt.binning, "Binning table")->required();
  cmd->add_option("--method", opt.method, "IBMR-int, IBMR-NG, subset or relabel")->capture_default_str();
  cmd->add_flag("--use-covariates", opt.use_covariates, "IBMR-int: use Z.tsv columns instead of an intercept");
  cmd->add_option("--subsample", opt.subsample, "Rows kept per training dataset (0 keeps all)");
  cmd->add_option("--weights", opt.weights, "Sampling weight file inside each training directory");
  cmd->add_option("--seed", opt.seed, "Subsampling seed")->capture_default_str();
  cmd->add_option("--threads", opt.threads, "Worker threads for rho slices")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Binned multinomial logistic regression with group-lasso selection"};
  app.require_subcommand(1);

  DataOptions data_opt;
  std::string out_dir;
  std::size_t top_n = 10;
  double lambda = 0.0;
  double rho = 1.0;
  std::size_t n_lambda = 25;
  double ratio = 1e-3;
  std::string rhos = "0.01,0.1,1,10";

  auto* fit_cmd = app.add_subcommand("fit", "Fit one (lambda, rho) and save the model");
  add_data_options(fit_cmd, data_opt, false);
  fit_cmd->add_option("--lambda", lambda, "Group-lasso weight")->required();
  fit_cmd->add_option("--rho", rho, "Ridge weight on batch coefficients")->capture_default_str();
  fit_cmd->add_option("--out", out_dir, "Output directory")->required();
  fit_cmd->add_option("--top", top_n, "Features per category in ranking.tsv")->capture_default_str();

  DataOptions path_opt;
  auto* path_cmd = app.add_subcommand("path", "Fit the tuning grid and select by validation NLL");
  add_data_options(path_cmd, path_opt, true);
  path_cmd->add_option("--n-lambda", n_lambda, "Grid size")->capture_default_str();
  path_cmd->add_option("--lambda-min-ratio", ratio, "Smallest lambda over lambda_max")->capture_default_str();
  path_cmd->add_option("--rhos", rhos, "Comma-separated ridge weights")->capture_default_str();
  path_cmd->add_option("--out", out_dir, "Output directory")->required();
  path_cmd->add_option("--top", top_n, "Features per category in ranking.tsv")->capture_default_str();

  std::string model_file, data_dir, mode = "fine", binning_file, observed_file, pred_out;
  auto* predict_cmd = app.add_subcommand("predict", "Predict categories for a dataset");
  predict_cmd->add_option("--model", model_file, "Model file")->required();
  predict_cmd->add_option("--data", data_dir, "Dataset directory")->required();
  predict_cmd->add_option("--mode", mode, "fine, conditional or coarse")
      ->check(CLI::IsMember({"fine", "conditional", "coarse"}))
      ->capture_default_str();
  predict_cmd->add_option("--binning", binning_file, "Binning table (conditional and coarse modes)");
  predict_cmd->add_option("--observed-labels", observed_file, "Coarse mode: candidate labels, one per line");
  predict_cmd->add_option("--out", pred_out, "Output file (default stdout)");

  std::string config_file;
  std::optional<std::uint64_t> sim_seed;
  auto* sim_cmd = app.add_subcommand("simulate", "Write a simulated study in the dataset file format");
  sim_cmd->add_option("--config", config_file, "key = value file of N, p, s, b, seed, test_n");
  sim_cmd->add_option("--seed", sim_seed, "Overrides the config seed");
  sim_cmd->add_option("--out", out_dir, "Output directory")->required();

  std::string scenarios_file;
  std::size_t replicates = 10;
  std::uint64_t bench_seed = 1;
  std::size_t threads = 1;
  std::vector<std::string> methods = {"IBMR-int", "IBMR-NG", "subset", "relabel", "IBMR-int-ORC", "GL-ORC"};
  auto* bench_cmd = app.add_subcommand("benchmark", "Simulation study over scenarios and replicates");
  bench_cmd->add_option("--scenarios", scenarios_file, "Scenario table with columns N, p, s, b")->required();
  bench_cmd->add_option("--replicates", replicates, "Replicates per scenario")->capture_default_str();
  bench_cmd->add_option("--seed", bench_seed, "Seed of the first replicate")->capture_default_str();
  bench_cmd->add_option("--methods", methods, "Methods to compare")->delimiter(',');
  bench_cmd->add_option("--n-lambda", n_lambda, "Grid size")->capture_default_str();
  bench_cmd->add_option("--lambda-min-ratio", ratio, "Smallest lambda over lambda_max")->capture_default_str();
  bench_cmd->add_option("--rhos", rhos, "Comma-separated ridge weights")->capture_default_str();
  bench_cmd->add_option("--threads", threads, "Worker threads for rho slices")->capture_default_str();
  bench_cmd->add_option("--out", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*fit_cmd) {
      return cmd_fit(data_opt, lambda, rho, out_dir, top_n);
    }
    if (*path_cmd) {
      return cmd_path(path_opt, n_lambda, ratio, rhos, out_dir, top_n);
    }
    if (*predict_cmd) {
      return cmd_predict(model_file, data_dir, mode, binning_file, observed_file, pred_out);
    }
    if (*sim_cmd) {
      return cmd_simulate(config_file, out_dir, sim_seed);
    }
    if (*bench_cmd) {
      return cmd_benchmark(scenarios_file, replicates, bench_seed, methods, n_lambda, ratio, rhos, threads, out_dir);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitUsage;
}
