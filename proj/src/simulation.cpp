#include "binmr/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

#include "binmr/likelihood.hpp"
#include "binmr/errors.hpp"
#include "binmr/io.hpp"

namespace binmr {

namespace {

const char* const kCategoryNames[kSimCategories] = {"A1", "A2", "B1", "B2", "C1", "C2",
                                                     "D1", "D2", "E1", "E2", "F1", "F2"};
const char* const kPairNames[5] = {"A", "B", "C", "D", "E"};

// Stream 0 draws beta*, streams 1-6 training datasets, 7-12 validation, 13 the test set.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(id), 0x9e3779b9u};
  return std::mt19937_64(seq);
}

Matrix ar1_rows(std::mt19937_64& rng, std::size_t n, std::size_t p) {
  std::normal_distribution<double> z(0.0, 1.0);
  const double innovation = std::sqrt(1.0 - kSimArCorrelation * kSimArCorrelation);
  Matrix X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    double prev = z(rng);
    X(i, 0) = prev;
    for (Eigen::Index j = 1; j < X.cols(); ++j) {
      prev = kSimArCorrelation * prev + innovation * z(rng);
      X(i, j) = prev;
    }
  }
  return X;
}

std::size_t draw_category(std::mt19937_64& rng, const Eigen::Ref<const Eigen::RowVectorXd>& probs) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double target = u(rng);
  double cumulative = 0.0;
  for (Eigen::Index l = 0; l < probs.size(); ++l) {
    cumulative += probs(l);
    if (target < cumulative) {
      return static_cast<std::size_t>(l);
    }
  }
  return static_cast<std::size_t>(probs.size() - 1);
}

struct GeneratedDataset {
  AnnotatedDataset data;
  std::vector<std::string> fine_labels;
  Vector offset;
  Matrix probs;
};

GeneratedDataset generate(std::mt19937_64& rng, std::size_t n, const SimConfig& config, const Matrix& beta_star,
                          const DatasetBinning* binning) {
  GeneratedDataset g;
  Matrix X = ar1_rows(rng, n, config.p);
  const Matrix eta = X * beta_star;
  g.probs = softmax_rows(eta).values;

  const CategorySet fine = sim_categories();
  g.fine_labels.reserve(n);
  g.data.y.reserve(n);
  for (Eigen::Index i = 0; i < g.probs.rows(); ++i) {
    const std::size_t l = draw_category(rng, g.probs.row(i));
    g.fine_labels.push_back(fine.name(l));
    g.data.y.push_back(binning ? binning->label_name(binning->label_of_fine(l)) : fine.name(l));
  }

  std::normal_distribution<double> z(0.0, 1.0);
  Vector u(static_cast<Eigen::Index>(config.p));
  for (Eigen::Index j = 0; j < u.size(); ++j) {
    u(j) = z(rng);
  }
  g.offset = Vector::Zero(u.size());
  if (config.b > 0.0 && n > 0) {
    const double a = config.b * X.norm() / (std::sqrt(static_cast<double>(n)) * u.norm());
    g.offset = a * u;
    X.rowwise() += g.offset.transpose();
  }
  g.data.X = std::move(X);
  g.data.Z = Matrix(static_cast<Eigen::Index>(n), 0);
  return g;
}

}  // namespace

void SimConfig::validate() const {
  if (N == 0 || N % kSimDatasets != 0) {
    throw std::invalid_argument("N must be a positive multiple of 6 (got " + std::to_string(N) + ")");
  }
  if (p < kSimNonzeroRows) {
    throw std::invalid_argument("p must be at least 100 (got " + std::to_string(p) + ")");
  }
  if (s > kSimNonzeroRows) {
    throw std::invalid_argument("s must not exceed 100 (got " + std::to_string(s) + ")");
  }
  if (!(b >= 0.0) || !std::isfinite(b)) {
    throw std::invalid_argument("b must be finite and nonnegative");
  }
  if (test_n == 0) {
    throw std::invalid_argument("test_n must be positive");
  }
}

CategorySet sim_categories() {
  return CategorySet(std::vector<std::string>(std::begin(kCategoryNames), std::end(kCategoryNames)));
}

BinningSpec sim_binning(const std::string& prefix) {
  std::vector<DatasetBinning> datasets;
  for (std::size_t k = 0; k < kSimDatasets; ++k) {
    std::vector<std::string> labels;
    for (std::size_t l = 0; l < kSimCategories; ++l) {
      if (k < 4 && l < 10) {
        labels.emplace_back(kPairNames[l / 2]);
      } else {
        labels.emplace_back(kCategoryNames[l]);
      }
    }
    datasets.emplace_back(prefix + std::to_string(k + 1), std::move(labels));
  }
  return BinningSpec(sim_categories(), std::move(datasets));
}

SimData simulate(const SimConfig& config) {
  config.validate();
  SimData out;
  SimTruth& truth = out.truth;

  auto coef_rng = stream(config.seed, 0);
  std::vector<std::size_t> rows(config.p);
  std::iota(rows.begin(), rows.end(), 0);
  std::shuffle(rows.begin(), rows.end(), coef_rng);
  truth.nonzero_rows.assign(rows.begin(), rows.begin() + kSimNonzeroRows);
  truth.shared_rows.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(config.s));
  std::sort(truth.nonzero_rows.begin(), truth.nonzero_rows.end());
  std::sort(truth.shared_rows.begin(), truth.shared_rows.end());

  // Normal(0, 2): variance 2
  std::normal_distribution<double> coef(0.0, std::sqrt(2.0));
  truth.beta_star = Matrix::Zero(static_cast<Eigen::Index>(config.p), kSimCategories);
  truth.alpha_star = Vector::Zero(kSimCategories);
  for (std::size_t idx = 0; idx < kSimNonzeroRows; ++idx) {
    const auto j = static_cast<Eigen::Index>(rows[idx]);
    const bool shared = idx < config.s;
    if (shared) {
      for (Eigen::Index pair = 0; pair < 5; ++pair) {
        const double v = coef(coef_rng);
        truth.beta_star(j, 2 * pair) = v;
        truth.beta_star(j, 2 * pair + 1) = v;
      }
      truth.beta_star(j, 10) = coef(coef_rng);
      truth.beta_star(j, 11) = coef(coef_rng);
    } else {
      for (Eigen::Index l = 0; l < static_cast<Eigen::Index>(kSimCategories); ++l) {
        truth.beta_star(j, l) = coef(coef_rng);
      }
    }
  }

  const std::size_t n_k = config.N / kSimDatasets;
  auto build = [&](const std::string& prefix, std::uint64_t first_stream,
                   std::vector<std::vector<std::string>>& fine_labels, std::vector<Vector>& offsets) {
    BinningSpec spec = sim_binning(prefix);
    std::vector<AnnotatedDataset> datasets;
    for (std::size_t k = 0; k < kSimDatasets; ++k) {
      auto rng = stream(config.seed, first_stream + k);
      GeneratedDataset g = generate(rng, n_k, config, truth.beta_star, &spec.dataset(k));
      fine_labels.push_back(std::move(g.fine_labels));
      offsets.push_back(std::move(g.offset));
      datasets.push_back(std::move(g.data));
    }
    return DatasetCollection(std::move(datasets), std::move(spec));
  };
  out.train = build("train", 1, truth.train_fine_labels, truth.train_batch_offsets);
  out.validation = build("validation", 1 + kSimDatasets, truth.validation_fine_labels,
                         truth.validation_batch_offsets);

  SimConfig test_config = config;
  test_config.b = 0.0;
  auto test_rng = stream(config.seed, 1 + 2 * kSimDatasets);
  GeneratedDataset test = generate(test_rng, config.test_n, test_config, truth.beta_star, nullptr);
  truth.test_probs = std::move(test.probs);
  out.test = std::move(test.data);
  return out;
}

double empirical_batch_ratio(const Matrix& X, const Matrix& X_tilde) {
  if (X.rows() != X_tilde.rows() || X.cols() != X_tilde.cols()) {
    throw DataError("shape mismatch between observed and batch-free features");
  }
  const double denom = X_tilde.norm();
  if (!(denom > 0.0)) {
    throw DataError("batch-free features have zero Frobenius norm");
  }
  return (X - X_tilde).norm() / denom;
}

SimConfig read_sim_config(std::istream& in, const std::string& source) {
  SimConfig config;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) {
      line.resize(hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(source, line_no, "expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      std::size_t used = 0;
      if (key == "N") {
        config.N = std::stoull(value, &used);
      } else if (key == "p") {
        config.p = std::stoull(value, &used);
      } else if (key == "s") {
        config.s = std::stoull(value, &used);
      } else if (key == "b") {
        config.b = std::stod(value, &used);
      } else if (key == "seed") {
        config.seed = std::stoull(value, &used);
      } else if (key == "test_n") {
        config.test_n = std::stoull(value, &used);
      } else {
        throw ParseError(source, line_no, "unknown key '" + key + "'");
      }
      if (used != value.size()) {
        throw ParseError(source, line_no, "trailing characters in value of '" + key + "'");
      }
    } catch (const std::logic_error&) {
      throw ParseError(source, line_no, "invalid value for '" + key + "': '" + value + "'");
    }
  }
  return config;
}

void write_sim_config(std::ostream& out, const SimConfig& config) {
  out << "N = " << config.N << "\np = " << config.p << "\ns = " << config.s << "\nb = " << format_double(config.b)
      << "\nseed = " << config.seed << "\ntest_n = " << config.test_n << '\n';
}

}  // namespace binmr
