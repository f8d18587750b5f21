#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "binmr/baselines.hpp"
#include "binmr/benchmark.hpp"
#include "binmr/inference.hpp"
#include "binmr/io.hpp"
#include "binmr/likelihood.hpp"
#include "binmr/simulation.hpp"
#include "binmr/solver.hpp"
#include "binmr/tuning_path.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace binmr;
using namespace binmr::testing;
namespace fs = std::filesystem;

namespace {

// Collects the outcome of one criterion and prints a single PASS/FAIL line when it goes out of scope.
class Criterion {
 public:
  Criterion(int id, std::string title) : id_(id), title_(std::move(title)), start_(clock::now()) {}

  Criterion(const Criterion&) = delete;
  Criterion& operator=(const Criterion&) = delete;

  ~Criterion() {
    std::cout << "criterion " << std::setw(2) << id_ << " " << (ok_ ? "PASS" : "FAIL") << "  " << title_ << "  ("
              << std::fixed << std::setprecision(1) << seconds() << " s)" << std::endl;
    std::cout.unsetf(std::ios::floatfield);
  }

  void expect(bool condition, const std::string& what) {
    CHECK_MESSAGE(condition, what);
    if (!condition) {
      if (failures_ < 10) {
        std::cout << "  failed: " << what << "\n";
      }
      ++failures_;
      ok_ = false;
    }
  }

  void note(const std::string& text) const { std::cout << "  " << text << "\n"; }

  double seconds() const { return std::chrono::duration<double>(clock::now() - start_).count(); }

 private:
  using clock = std::chrono::steady_clock;
  int id_;
  std::string title_;
  clock::time_point start_;
  bool ok_ = true;
  int failures_ = 0;
};

std::string str(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("binmr_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

struct Stats {
  double mean = 0.0;
  double sd = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

Stats stats(const std::vector<double>& v) {
  Stats s;
  s.n = v.size();
  for (double x : v) {
    s.mean += x;
  }
  s.mean /= static_cast<double>(s.n);
  double ss = 0.0;
  for (double x : v) {
    ss += (x - s.mean) * (x - s.mean);
  }
  s.sd = s.n > 1 ? std::sqrt(ss / static_cast<double>(s.n - 1)) : 0.0;
  s.se = s.sd / std::sqrt(static_cast<double>(s.n));
  return s;
}

SimConfig scenario(std::size_t N, double b) {
  SimConfig c;
  c.N = N;
  c.p = 250;
  c.s = 40;
  c.b = b;
  return c;
}

using MetricOf = double ReplicateMetrics::*;

// Per-method statistics of one metric over the replicates of one scenario. Failed fits count as
// failures of the criterion rather than being dropped silently.
std::map<Method, Stats> run_study(Criterion& crit, const SimConfig& config, const std::vector<Method>& methods,
                                  std::size_t replicates, MetricOf metric) {
  BenchmarkOptions options;
  options.methods = methods;
  options.replicates = replicates;
  options.first_seed = 1;
  const auto rows = run_benchmark({Scenario{config}}, options);
  std::map<Method, std::vector<double>> values;
  for (const auto& r : rows) {
    crit.expect(!r.failed, std::string(method_name(r.method)) + " replicate " + std::to_string(r.replicate) +
                               " fitted: " + r.error);
    if (!r.failed) {
      values[r.method].push_back(r.*metric);
    }
  }
  std::map<Method, Stats> out;
  for (Method m : methods) {
    out[m] = stats(values[m]);
    crit.note(std::string(method_name(m)) + " N=" + std::to_string(config.N) + " b=" + str(config.b) +
              ": mean " + str(out[m].mean) + " sd " + str(out[m].sd) + " se " + str(out[m].se) + " over " +
              std::to_string(out[m].n));
  }
  return out;
}

}  // namespace

TEST_SUITE("acceptance") {

TEST_CASE("criterion 01: gradients match central differences") {
  Criterion crit(1, "gradients match central finite differences on 20 random instances");
  std::mt19937_64 rng(20241);
  double worst = 0.0;
  for (int instance = 0; instance < 20; ++instance) {
    const DatasetCollection c = random_collection(rng, InstanceShape{});
    const Coefficients coeffs = random_coefficients(rng, c);
    const auto g = flatten(gradients(coeffs, c));
    const auto fd =
        central_differences(coeffs, 1e-5, [&](const Coefficients& x) { return negative_log_likelihood(x, c); });
    crit.expect(g.size() == fd.size(), "gradient length matches coefficient count");
    for (std::size_t i = 0; i < std::min(g.size(), fd.size()); ++i) {
      const double e = gradient_relative_error(fd[i], g[i]);
      worst = std::max(worst, e);
      crit.expect(e < 1e-5, "instance " + std::to_string(instance) + " coordinate " + std::to_string(i) +
                                " relative error " + str(e));
    }
  }
  crit.note("worst relative error " + str(worst));
  crit.expect(crit.seconds() < 10.0, "runtime under 10 s");
}

TEST_CASE("criterion 02: objective traces never increase") {
  Criterion crit(2, "objective traces are nonincreasing on 100 random problems");
  std::mt19937_64 rng(20242);
  std::uniform_int_distribution<std::size_t> K(1, 4), C(2, 6), p(2, 12), r(0, 2), n(20, 80);
  std::uniform_real_distribution<double> log_weight(-4.0, 0.0);
  double worst = 0.0;
  for (int problem = 0; problem < 100; ++problem) {
    InstanceShape shape;
    shape.K = K(rng);
    shape.C = C(rng);
    shape.p = p(rng);
    shape.r = r(rng);
    shape.n = n(rng);
    shape.coarse = problem % 4 != 0;
    const DatasetCollection c = random_collection(rng, shape);
    SolverConfig config;
    config.lambda = std::pow(10.0, log_weight(rng));
    config.rho = std::pow(10.0, log_weight(rng));
    config.max_iters = 500;
    config.tol = 1e-12;
    const FitResult f = fit(c, config);
    for (std::size_t t = 1; t < f.objective_trace.size(); ++t) {
      const double rise = f.objective_trace[t] - f.objective_trace[t - 1];
      worst = std::max(worst, rise);
      crit.expect(rise <= 1e-10, "problem " + std::to_string(problem) + " iteration " + std::to_string(t) +
                                     " rises by " + str(rise));
    }
  }
  crit.note("largest single-step increase " + str(worst));
  crit.expect(crit.seconds() < 120.0, "runtime under 2 min");
}

TEST_CASE("criterion 03: group prox matches a numeric minimizer") {
  Criterion crit(3, "row prox agrees with a numeric minimizer and the closed-form example");
  std::mt19937_64 rng(20243);
  std::uniform_int_distribution<int> width(1, 8);
  std::uniform_real_distribution<double> log_t(-3.0, 1.0);
  double worst = 0.0;
  for (int row = 0; row < 1000; ++row) {
    const Matrix nu = gaussian(rng, 1, width(rng), 2.0);
    const double t = std::pow(10.0, log_t(rng));
    const Matrix got = prox_group_rows(nu, t);
    const Eigen::RowVectorXd want = numeric_group_prox(nu.row(0), t);
    const double err = (got.row(0) - want).cwiseAbs().maxCoeff();
    worst = std::max(worst, err);
    crit.expect(err <= 1e-6, "row " + std::to_string(row) + " differs by " + str(err));
  }
  crit.note("largest deviation " + str(worst));
  Matrix example(1, 2);
  example << 3.0, 4.0;
  const Matrix shrunk = prox_group_rows(example, 2.5);
  crit.expect(shrunk(0, 0) == 1.5 && shrunk(0, 1) == 2.0, "(3, 4) at threshold 2.5 gives (1.5, 2) exactly");
}

TEST_CASE("criterion 04: convex single-dataset fit reaches the reference optimum") {
  Criterion crit(4, "K = 1 all-fine fit at 0.1 lambda_max matches a tight reference solve");
  std::mt19937_64 rng(20244);
  InstanceShape shape;
  shape.K = 1;
  shape.n = 300;
  shape.p = 20;
  shape.C = 4;
  shape.r = 0;
  shape.coarse = false;
  DatasetCollection raw = random_collection(rng, shape);
  // Labels drawn from a planted model so the optimum has several active rows.
  Coefficients planted = random_coefficients(rng, raw, 1.0);
  planted.beta.bottomRows(10).setZero();
  {
    AnnotatedDataset d = raw.dataset(0);
    const Matrix p = softmax_rows(linear_predictors(planted, d.X)).values;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < d.rows(); ++i) {
      double draw = u(rng);
      Eigen::Index l = 0;
      while (l + 1 < p.cols() && (draw -= p(static_cast<Eigen::Index>(i), l)) > 0.0) {
        ++l;
      }
      d.y[i] = raw.binning().fine().name(static_cast<std::size_t>(l));
    }
    raw = DatasetCollection({d}, raw.binning());
  }
  const DatasetCollection c = make_ibmr_ng(raw);
  const double lmax = lambda_max(c, 0.0);
  SolverConfig config;
  config.lambda = 0.1 * lmax;
  const FitResult f = fit(c, config);
  SolverConfig tight = config;
  tight.tol = 1e-12;
  tight.max_iters = 10 * config.max_iters;
  const FitResult ref = fit(c, tight);
  const double gap = std::abs(f.objective_trace.back() - ref.objective_trace.back());
  crit.note("objective " + str(f.objective_trace.back()) + " reference " + str(ref.objective_trace.back()) +
            " gap " + str(gap) + ", active rows " + std::to_string(f.active_rows.size()));
  crit.expect(f.converged, "default fit converged");
  crit.expect(gap <= 1e-6, "objective within 1e-6 of the reference");
  crit.expect(crit.seconds() < 30.0, "runtime under 30 s");
}

TEST_CASE("criterion 05: lambda_max is the exact zero threshold") {
  Criterion crit(5, "beta stays exactly zero at lambda_max and activates at 0.9 lambda_max");
  std::mt19937_64 rng(20245);
  for (int instance = 0; instance < 10; ++instance) {
    const DatasetCollection c = random_collection(rng, InstanceShape{});
    const double lmax = lambda_max(c, 0.5);
    SolverConfig config;
    config.lambda = lmax;
    config.rho = 0.5;
    const FitResult f = fit(c, config);
    crit.expect(f.coeffs.beta.isZero(0.0), "random instance " + std::to_string(instance) + " keeps beta = 0");
  }

  SimConfig sc;
  sc.seed = 1;
  const SimData d = simulate(sc);
  const DatasetCollection train = make_ibmr_int(d.train);
  const double rho = 0.1;
  const double lmax = lambda_max(train, rho);
  SolverConfig config;
  config.rho = rho;
  config.lambda = lmax;
  const FitResult at = fit(train, config);
  crit.expect(at.coeffs.beta.isZero(0.0), "simulated data: beta is exactly zero at lambda_max");
  config.lambda = 0.9 * lmax;
  const FitResult below = fit(train, config);
  crit.note("simulated N=" + std::to_string(sc.N) + " p=" + std::to_string(sc.p) + ": lambda_max " + str(lmax) +
            ", active rows at 0.9 lambda_max " + std::to_string(below.active_rows.size()));
  crit.expect(!below.active_rows.empty(), "simulated data: some row is active at 0.9 lambda_max");
}

TEST_CASE("criterion 06: coarse probabilities are bin sums and rows normalize") {
  Criterion crit(6, "coarse-label probabilities are exact bin sums and probability rows sum to 1");
  std::mt19937_64 rng(20246);
  double worst = 0.0;
  for (int instance = 0; instance < 50; ++instance) {
    InstanceShape shape;
    shape.C = 3 + static_cast<std::size_t>(instance % 6);
    const DatasetCollection c = random_collection(rng, shape);
    const Coefficients coeffs = random_coefficients(rng, c, 2.0);
    for (std::size_t k = 0; k < c.num_datasets(); ++k) {
      const auto& d = c.dataset(k);
      const DatasetBinning& b = c.binning().dataset(k);
      const ProbMatrix fine = unconditional_probs(coeffs, d, k);
      const ProbMatrix cond = conditional_probs(coeffs, d, k, c.binning());
      const Matrix coarse = coarse_label_probs(fine, b);
      for (Eigen::Index i = 0; i < fine.values.rows(); ++i) {
        for (std::size_t j = 0; j < b.num_labels(); ++j) {
          double sum = 0.0;
          for (std::size_t l : b.bin(j)) {
            sum += fine.values(i, static_cast<Eigen::Index>(l));
          }
          crit.expect(coarse(i, static_cast<Eigen::Index>(j)) == sum, "coarse probability equals its bin sum");
        }
        for (const Matrix* m : {&fine.values, &cond.values, &coarse}) {
          const double dev = std::abs(m->row(i).sum() - 1.0);
          worst = std::max(worst, dev);
          crit.expect(dev <= 1e-12, "row sums to 1 within 1e-12, off by " + str(dev));
        }
      }
    }
  }
  crit.note("largest row-sum deviation " + str(worst));
}

TEST_CASE("criterion 07: simulation ordering of the methods") {
  Criterion crit(7, "test KL ordering IBMR-int <= IBMR-NG, both beat relabel, relabel beats subset");
  const std::vector<Method> methods = {Method::ibmr_int, Method::ibmr_ng, Method::relabel, Method::subset};
  auto s = run_study(crit, scenario(2400, 0.1), methods, 10, &ReplicateMetrics::kl);
  const Stats& in = s[Method::ibmr_int];
  const Stats& ng = s[Method::ibmr_ng];
  const Stats& rl = s[Method::relabel];
  const Stats& sb = s[Method::subset];
  auto se = [](const Stats& a, const Stats& b) { return std::max(a.se, b.se); };
  crit.expect(in.mean <= ng.mean + ng.se, "IBMR-int <= IBMR-NG + 1 SE");
  crit.expect(rl.mean - in.mean > se(in, rl), "IBMR-int beats relabel by more than 1 SE");
  crit.expect(rl.mean - ng.mean > se(ng, rl), "IBMR-NG beats relabel by more than 1 SE");
  crit.expect(sb.mean - rl.mean > se(rl, sb), "relabel beats subset by more than 1 SE");
  crit.note("runtime target is 30 min on 8 cores; measured " + str(crit.seconds() / 60.0) + " min");
}

TEST_CASE("criterion 08: KL decreases with sample size") {
  Criterion crit(8, "IBMR-int test KL decreases from N = 2400 to N = 9600");
  const auto small = run_study(crit, scenario(2400, 0.1), {Method::ibmr_int}, 5, &ReplicateMetrics::kl);
  const auto large = run_study(crit, scenario(9600, 0.1), {Method::ibmr_int}, 5, &ReplicateMetrics::kl);
  crit.expect(large.at(Method::ibmr_int).mean < small.at(Method::ibmr_int).mean,
              "mean KL at N = 9600 below mean KL at N = 2400");
}

TEST_CASE("criterion 09: batch effects hurt and the intercept helps") {
  Criterion crit(9, "IBMR-int error rises from b = 0 to b = 0.4 and IBMR-int beats IBMR-NG at b = 0.4");
  const auto clean = run_study(crit, scenario(2400, 0.0), {Method::ibmr_int}, 10, &ReplicateMetrics::error_rate);
  auto shifted =
      run_study(crit, scenario(2400, 0.4), {Method::ibmr_int, Method::ibmr_ng}, 10, &ReplicateMetrics::error_rate);
  const Stats& c0 = clean.at(Method::ibmr_int);
  const Stats& in = shifted[Method::ibmr_int];
  const Stats& ng = shifted[Method::ibmr_ng];
  const double spread = std::max(c0.sd, in.sd);
  crit.expect(in.mean - c0.mean > spread,
              "error rate rise " + str(in.mean - c0.mean) + " exceeds IBMR-int spread " + str(spread));
  crit.expect(ng.mean - in.mean > std::max(in.se, ng.se), "IBMR-int beats IBMR-NG at b = 0.4 by more than 1 SE");
}

TEST_CASE("criterion 10: conditional predictions respect the observed label") {
  Criterion crit(10, "conditional predictions stay in the observed bin over 10^4 observations");
  SimConfig sc;
  sc.N = 10002;
  sc.p = 100;
  sc.seed = 10;
  const SimData d = simulate(sc);
  SolverConfig config;
  config.lambda = 0.3 * lambda_max(make_ibmr_ng(d.train), 0.0);
  config.max_iters = 200;
  const Coefficients coeffs = fit(make_ibmr_ng(d.train), config).coeffs;
  const BinningSpec& spec = d.train.binning();
  std::size_t checked = 0;
  std::size_t moved = 0;
  for (std::size_t k = 0; k < d.train.num_datasets(); ++k) {
    const auto& ds = d.train.dataset(k);
    const PredictionSet p = predict_conditional(coeffs, ds.X, ds.y, spec, k);
    for (std::size_t i = 0; i < ds.rows(); ++i) {
      const Bin& bin = spec.unbin(k, ds.y[i]);
      const std::size_t l = spec.fine().index_of(p.labels[i]);
      crit.expect(std::find(bin.begin(), bin.end(), l) != bin.end(), "prediction lies in the observed bin");
      if (bin.size() == 1) {
        crit.expect(p.labels[i] == spec.fine().name(bin[0]), "fine-labeled observation keeps its label");
      } else if (p.labels[i] != d.truth.train_fine_labels[k][i]) {
        ++moved;
      }
      ++checked;
    }
  }
  crit.note(std::to_string(checked) + " observations checked, " + std::to_string(moved) +
            " coarse observations resolved to a different fine label than the truth");
  crit.expect(checked >= 10000, "at least 10^4 observations");
}

TEST_CASE("criterion 11: files round trip losslessly") {
  Criterion crit(11, "model, dataset and report files round trip losslessly");
  TempDir tmp;
  SimConfig sc;
  sc.N = 600;
  sc.p = 100;
  sc.b = 0.2;
  sc.seed = 11;
  sc.test_n = 50;
  const SimData d = simulate(sc);
  const DatasetCollection train = make_ibmr_int(d.train);
  SolverConfig config;
  config.lambda = 0.2 * lambda_max(train, 1.0);
  config.rho = 1.0;
  config.max_iters = 100;
  const FitResult f = fit(train, config);

  ModelArtifact a;
  a.categories = train.binning().fine();
  a.coeffs = f.coeffs;
  a.lambda = config.lambda;
  a.rho = config.rho;
  a.method = method_name(Method::ibmr_int);
  a.feature_names = default_names("gene", train.num_features());
  a.feature_sds = pooled_feature_sds(train.datasets());
  save_model(tmp.path / "model.tsv", a);
  const ModelArtifact b = load_model(tmp.path / "model.tsv");
  bool gamma_equal = b.coeffs.gamma.size() == a.coeffs.gamma.size();
  for (std::size_t k = 0; gamma_equal && k < a.coeffs.gamma.size(); ++k) {
    gamma_equal = b.coeffs.gamma[k] == a.coeffs.gamma[k];
  }
  crit.expect(b.coeffs.alpha == a.coeffs.alpha && b.coeffs.beta == a.coeffs.beta && gamma_equal,
              "model coefficients reload bit for bit");
  crit.expect(b.lambda == a.lambda && b.rho == a.rho && b.method == a.method && b.categories == a.categories &&
                  b.feature_names == a.feature_names && b.feature_sds == a.feature_sds,
              "model metadata reloads exactly");

  for (std::size_t k = 0; k < train.num_datasets(); ++k) {
    const auto& ds = train.dataset(k);
    const fs::path dir = tmp.path / ("dataset" + std::to_string(k));
    save_dataset(dir, ds, {}, {"intercept"});
    const LoadedDataset back = load_dataset(dir);
    crit.expect(back.data.X == ds.X && back.data.Z == ds.Z && back.data.y == ds.y,
                "dataset " + std::to_string(k) + " reloads bit for bit");
  }

  std::stringstream binning;
  write_binning(binning, train.binning());
  crit.expect(read_binning(binning) == train.binning(), "binning file reloads");

  const PredictionSet pred = predict_fine(f.coeffs, d.test.X, train.binning().fine());
  std::stringstream report;
  write_predictions(report, pred);
  const Table t = read_table(report);
  bool same = t.rows.size() == pred.labels.size();
  for (std::size_t i = 0; same && i < t.rows.size(); ++i) {
    same = t.rows[i][t.column("prediction")] == pred.labels[i];
    for (std::size_t l = 0; same && l < pred.support.size(); ++l) {
      same = parse_double(t.rows[i][t.column(pred.support[l])], "report", i + 2) ==
             pred.probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l));
    }
  }
  crit.expect(same, "prediction report parses back to the same labels and probabilities");

  PathOptions po;
  po.solver.max_iters = 50;
  const PathResult path = fit_path(train, make_ibmr_int(d.validation), build_grid(train, 3, 0.1, {1.0}), po);
  std::stringstream path_report;
  write_path_report(path_report, path);
  const Table pt = read_table(path_report);
  bool path_same = pt.rows.size() == path.entries.size();
  for (std::size_t i = 0; path_same && i < pt.rows.size(); ++i) {
    path_same = parse_double(pt.rows[i][pt.column("lambda")], "path", i + 2) == path.entries[i].lambda &&
                parse_double(pt.rows[i][pt.column("validation_nll")], "path", i + 2) == path.entries[i].validation_nll;
  }
  crit.expect(path_same, "path report parses back to the same grid and validation NLL");

  std::stringstream cfg;
  write_sim_config(cfg, sc);
  const SimConfig sc2 = read_sim_config(cfg);
  crit.expect(sc2.N == sc.N && sc2.p == sc.p && sc2.s == sc.s && sc2.b == sc.b && sc2.seed == sc.seed &&
                  sc2.test_n == sc.test_n,
              "simulation config reloads");
}

}
