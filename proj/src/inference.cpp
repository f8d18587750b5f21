#include "binmr/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

#include "binmr/detail/row_kernels.hpp"
#include "binmr/errors.hpp"
#include "binmr/io.hpp"

namespace binmr {

const char* mode_name(PredictionMode mode) {
  switch (mode) {
    case PredictionMode::fine:
      return "fine";
    case PredictionMode::conditional:
      return "conditional";
    case PredictionMode::coarse:
      return "coarse";
  }
  return "unknown";
}

ObservedTestLabelSet ObservedTestLabelSet::from_data(const DatasetBinning& binning,
                                                     const std::vector<std::string>& y) {
  return from_labels(binning, y);
}

ObservedTestLabelSet ObservedTestLabelSet::from_labels(const DatasetBinning& binning,
                                                       const std::vector<std::string>& labels) {
  std::vector<bool> seen(binning.num_labels(), false);
  for (const auto& label : labels) {
    auto j = binning.find_label(label);
    if (!j) {
      throw LookupError("dataset '" + binning.id() + "' has no label '" + label + "'");
    }
    seen[*j] = true;
  }
  ObservedTestLabelSet set;
  for (std::size_t j = 0; j < seen.size(); ++j) {
    if (seen[j]) {
      set.indices_.push_back(j);
      set.labels_.push_back(binning.label_name(j));
    }
  }
  return set;
}

namespace {

// Lowest index wins ties.
template <typename Row>
std::size_t argmax(const Row& row) {
  std::size_t best = 0;
  for (Eigen::Index l = 1; l < row.size(); ++l) {
    if (row(l) > row(static_cast<Eigen::Index>(best))) {
      best = static_cast<std::size_t>(l);
    }
  }
  return best;
}

}  // namespace

PredictionSet predict_fine(const Coefficients& coeffs, const Matrix& X, const CategorySet& fine) {
  if (coeffs.num_categories() != fine.size()) {
    throw DataError("category axis: coefficients have " + std::to_string(coeffs.num_categories()) +
                    " categories, label set has " + std::to_string(fine.size()));
  }
  PredictionSet out;
  out.mode = PredictionMode::fine;
  out.probs = softmax_rows(linear_predictors(coeffs, X)).values;
  out.support = fine.names();
  out.indices.resize(static_cast<std::size_t>(X.rows()));
  out.labels.resize(out.indices.size());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const std::size_t l = argmax(out.probs.row(i));
    out.indices[static_cast<std::size_t>(i)] = l;
    out.labels[static_cast<std::size_t>(i)] = fine.name(l);
  }
  return out;
}

PredictionSet predict_conditional(const Coefficients& coeffs, const Matrix& X,
                                  const std::vector<std::string>& y_observed, const BinningSpec& spec,
                                  std::size_t dataset_index) {
  if (static_cast<Eigen::Index>(y_observed.size()) != X.rows()) {
    throw DataError("observation axis: " + std::to_string(y_observed.size()) + " labels for " +
                    std::to_string(X.rows()) + " rows");
  }
  const Matrix eta = linear_predictors(coeffs, X);
  std::vector<const Bin*> bins;
  bins.reserve(y_observed.size());
  for (const auto& label : y_observed) {
    bins.push_back(&spec.unbin(dataset_index, label));
  }
  PredictionSet out;
  out.mode = PredictionMode::conditional;
  out.probs = conditional_probs(eta, bins).values;
  out.support = spec.fine().names();
  out.indices.resize(y_observed.size());
  out.labels.resize(y_observed.size());
  for (std::size_t i = 0; i < y_observed.size(); ++i) {
    const Bin& bin = *bins[i];
    std::size_t best = bin.front();
    for (std::size_t l : bin) {
      if (out.probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) >
          out.probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(best))) {
        best = l;
      }
    }
    out.indices[i] = best;
    out.labels[i] = spec.fine().name(best);
  }
  return out;
}

PredictionSet predict_coarse(const Coefficients& coeffs, const Matrix& X, const BinningSpec& spec,
                             std::size_t dataset_index, const ObservedTestLabelSet& observed) {
  if (observed.empty()) {
    throw DataError("coarse prediction needs at least one observed test label");
  }
  const DatasetBinning& binning = spec.dataset(dataset_index);
  const Matrix eta = linear_predictors(coeffs, X);
  const auto& labels = observed.label_indices();
  const auto m = static_cast<Eigen::Index>(labels.size());

  PredictionSet out;
  out.mode = PredictionMode::coarse;
  out.support = observed.labels();
  out.probs.resize(eta.rows(), m);
  out.indices.resize(static_cast<std::size_t>(eta.rows()));
  out.labels.resize(out.indices.size());
  for (Eigen::Index i = 0; i < eta.rows(); ++i) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t j : labels) {
      for (std::size_t l : binning.bin(j)) {
        top = std::max(top, eta(i, static_cast<Eigen::Index>(l)));
      }
    }
    double total = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      double mass = 0.0;
      for (std::size_t l : binning.bin(labels[static_cast<std::size_t>(j)])) {
        mass += std::exp(eta(i, static_cast<Eigen::Index>(l)) - top);
      }
      out.probs(i, j) = mass;
      total += mass;
    }
    out.probs.row(i) /= total;
    const std::size_t best = argmax(out.probs.row(i));
    out.indices[static_cast<std::size_t>(i)] = best;
    out.labels[static_cast<std::size_t>(i)] = out.support[best];
  }
  return out;
}

double error_rate(const PredictionSet& predictions, const std::vector<std::string>& y_observed) {
  if (predictions.labels.size() != y_observed.size()) {
    throw DataError("observation axis: " + std::to_string(predictions.labels.size()) +
                    " predictions for " + std::to_string(y_observed.size()) + " observed labels");
  }
  if (y_observed.empty()) {
    throw DataError("error rate of an empty prediction set");
  }
  std::unordered_map<std::string, bool> support;
  for (const auto& s : predictions.support) {
    support.emplace(s, true);
  }
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < y_observed.size(); ++i) {
    if (!support.count(y_observed[i])) {
      throw DataError("label-space mismatch: observed label '" + y_observed[i] + "' is not a " +
                      mode_name(predictions.mode) + " prediction label");
    }
    if (predictions.labels[i] != y_observed[i]) {
      ++wrong;
    }
  }
  return static_cast<double>(wrong) / static_cast<double>(y_observed.size());
}

namespace {

void check_same_shape(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DataError("shape mismatch: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                    std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  if (a.rows() == 0) {
    throw DataError("probability matrices have no rows");
  }
}

}  // namespace

double kl_divergence(const Matrix& true_probs, const Matrix& est_probs) {
  check_same_shape(true_probs, est_probs);
  double total = 0.0;
  for (Eigen::Index i = 0; i < true_probs.rows(); ++i) {
    double row = 0.0;
    for (Eigen::Index l = 0; l < true_probs.cols(); ++l) {
      const double p = true_probs(i, l);
      if (p > 0.0) {
        row += p * std::log(p / std::max(est_probs(i, l), kProbabilityClamp));
      }
    }
    total += row;
  }
  return total / static_cast<double>(true_probs.rows());
}

double hellinger_distance(const Matrix& true_probs, const Matrix& est_probs) {
  check_same_shape(true_probs, est_probs);
  double total = 0.0;
  for (Eigen::Index i = 0; i < true_probs.rows(); ++i) {
    double affinity = 0.0;
    for (Eigen::Index l = 0; l < true_probs.cols(); ++l) {
      affinity += std::sqrt(true_probs(i, l) * est_probs(i, l));
    }
    total += std::sqrt(std::max(0.0, 1.0 - affinity));
  }
  return total / static_cast<double>(true_probs.rows());
}

std::vector<std::vector<RankedFeature>> standardized_coefficient_ranking(const Coefficients& coeffs,
                                                                         const Vector& feature_sds,
                                                                         std::size_t top_n) {
  const Eigen::Index p = coeffs.beta.rows();
  if (feature_sds.size() != p) {
    throw DataError("feature axis: " + std::to_string(feature_sds.size()) + " standard deviations for " +
                    std::to_string(p) + " features");
  }
  for (Eigen::Index j = 0; j < p; ++j) {
    if (!(feature_sds(j) > 0.0)) {
      throw std::invalid_argument("feature standard deviations must be positive (feature " +
                                  std::to_string(j) + ")");
    }
  }
  std::vector<std::vector<RankedFeature>> ranking(static_cast<std::size_t>(coeffs.beta.cols()));
  for (Eigen::Index l = 0; l < coeffs.beta.cols(); ++l) {
    auto& list = ranking[static_cast<std::size_t>(l)];
    list.reserve(static_cast<std::size_t>(p));
    for (Eigen::Index j = 0; j < p; ++j) {
      list.push_back({static_cast<std::size_t>(j), std::abs(coeffs.beta(j, l)) * feature_sds(j)});
    }
    std::stable_sort(list.begin(), list.end(),
                     [](const RankedFeature& a, const RankedFeature& b) { return a.score > b.score; });
    if (list.size() > top_n) {
      list.resize(top_n);
    }
  }
  return ranking;
}

void write_predictions(std::ostream& out, const PredictionSet& predictions, const std::vector<std::string>& ids) {
  if (!ids.empty() && ids.size() != predictions.labels.size()) {
    throw DataError("observation axis: " + std::to_string(ids.size()) + " ids for " +
                    std::to_string(predictions.labels.size()) + " predictions");
  }
  out << "id\tmode\tprediction";
  for (const auto& s : predictions.support) {
    out << '\t' << s;
  }
  out << '\n';
  for (std::size_t i = 0; i < predictions.labels.size(); ++i) {
    out << (ids.empty() ? std::to_string(i + 1) : ids[i]) << '\t' << mode_name(predictions.mode) << '\t'
        << predictions.labels[i];
    for (Eigen::Index l = 0; l < predictions.probs.cols(); ++l) {
      out << '\t' << format_double(predictions.probs(static_cast<Eigen::Index>(i), l));
    }
    out << '\n';
  }
}

ConfusionMatrix confusion_matrix(const PredictionSet& predictions, const std::vector<std::string>& y_observed) {
  if (predictions.labels.size() != y_observed.size()) {
    throw DataError("observation axis: " + std::to_string(predictions.labels.size()) +
                    " predictions for " + std::to_string(y_observed.size()) + " observed labels");
  }
  ConfusionMatrix cm;
  cm.predicted = predictions.support;
  std::unordered_map<std::string, std::size_t> row_of;
  for (const auto& y : y_observed) {
    if (row_of.emplace(y, cm.observed.size()).second) {
      cm.observed.push_back(y);
    }
  }
  cm.percent = Matrix::Zero(static_cast<Eigen::Index>(cm.observed.size()),
                            static_cast<Eigen::Index>(cm.predicted.size()));
  for (std::size_t i = 0; i < y_observed.size(); ++i) {
    cm.percent(static_cast<Eigen::Index>(row_of[y_observed[i]]),
               static_cast<Eigen::Index>(predictions.indices[i])) += 1.0;
  }
  for (Eigen::Index r = 0; r < cm.percent.rows(); ++r) {
    cm.percent.row(r) *= 100.0 / cm.percent.row(r).sum();
  }
  return cm;
}

void write_confusion(std::ostream& out, const ConfusionMatrix& confusion) {
  out << "observed";
  for (const auto& p : confusion.predicted) {
    out << '\t' << p;
  }
  out << '\n';
  for (std::size_t r = 0; r < confusion.observed.size(); ++r) {
    out << confusion.observed[r];
    for (Eigen::Index c = 0; c < confusion.percent.cols(); ++c) {
      out << '\t' << format_double(confusion.percent(static_cast<Eigen::Index>(r), c));
    }
    out << '\n';
  }
}

}  // namespace binmr
