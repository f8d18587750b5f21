#include "binmr/likelihood.hpp"

#include <string>

#include "binmr/detail/row_kernels.hpp"
#include "binmr/errors.hpp"

namespace binmr {

Coefficients Coefficients::zeros(std::size_t num_categories, std::size_t p, std::size_t r,
                                 std::size_t num_datasets) {
  Coefficients c;
  const auto nc = static_cast<Eigen::Index>(num_categories);
  c.alpha = Vector::Zero(nc);
  c.beta = Matrix::Zero(static_cast<Eigen::Index>(p), nc);
  if (r > 0) {
    c.gamma.assign(num_datasets, Matrix::Zero(static_cast<Eigen::Index>(r), nc));
  }
  return c;
}

Coefficients Coefficients::zeros_for(const DatasetCollection& collection) {
  return zeros(collection.num_categories(), collection.num_features(), collection.num_covariates(),
               collection.num_datasets());
}

Coefficients Coefficients::with_zero_batch(const DatasetCollection& collection) const {
  Coefficients c;
  c.alpha = alpha;
  c.beta = beta;
  if (collection.num_covariates() > 0) {
    c.gamma.assign(collection.num_datasets(),
                   Matrix::Zero(static_cast<Eigen::Index>(collection.num_covariates()), alpha.size()));
  }
  return c;
}

void Coefficients::center() {
  if (alpha.size() == 0) {
    return;
  }
  alpha.array() -= alpha.mean();
  auto center_rows = [](Matrix& m) {
    if (m.rows() == 0) {
      return;
    }
    const Vector means = m.rowwise().mean();
    m.colwise() -= means;
  };
  center_rows(beta);
  for (auto& g : gamma) {
    center_rows(g);
  }
}

std::vector<std::size_t> Coefficients::active_rows() const {
  std::vector<std::size_t> rows;
  for (Eigen::Index j = 0; j < beta.rows(); ++j) {
    if (beta.row(j).squaredNorm() > 0.0) {
      rows.push_back(static_cast<std::size_t>(j));
    }
  }
  return rows;
}

bool Coefficients::all_finite() const {
  if (!alpha.allFinite() || !beta.allFinite()) {
    return false;
  }
  for (const auto& g : gamma) {
    if (!g.allFinite()) {
      return false;
    }
  }
  return true;
}

void check_dimensions(const Coefficients& coeffs, const DatasetCollection& collection) {
  const auto c = static_cast<Eigen::Index>(collection.num_categories());
  if (coeffs.alpha.size() != c) {
    throw DataError("category axis: alpha has " + std::to_string(coeffs.alpha.size()) +
                    " entries, expected " + std::to_string(c));
  }
  if (coeffs.beta.cols() != c) {
    throw DataError("category axis: beta has " + std::to_string(coeffs.beta.cols()) +
                    " columns, expected " + std::to_string(c));
  }
  if (coeffs.beta.rows() != static_cast<Eigen::Index>(collection.num_features())) {
    throw DataError("feature axis: beta has " + std::to_string(coeffs.beta.rows()) +
                    " rows, data has " + std::to_string(collection.num_features()) + " features");
  }
  if (coeffs.gamma.empty()) {
    if (collection.num_covariates() != 0) {
      throw DataError("covariate axis: data has " + std::to_string(collection.num_covariates()) +
                      " covariates but the coefficients have no batch block");
    }
    return;
  }
  if (coeffs.gamma.size() != collection.num_datasets()) {
    throw DataError("dataset axis: " + std::to_string(coeffs.gamma.size()) +
                    " gamma matrices for " + std::to_string(collection.num_datasets()) + " datasets");
  }
  for (const auto& g : coeffs.gamma) {
    if (g.rows() != static_cast<Eigen::Index>(collection.num_covariates()) || g.cols() != c) {
      throw DataError("covariate axis: gamma is " + std::to_string(g.rows()) + "x" +
                      std::to_string(g.cols()) + ", expected " +
                      std::to_string(collection.num_covariates()) + "x" + std::to_string(c));
    }
  }
}

Matrix linear_predictors(const Coefficients& coeffs, const Matrix& X) {
  if (X.cols() != coeffs.beta.rows()) {
    throw DataError("feature axis: X has " + std::to_string(X.cols()) + " columns, beta has " +
                    std::to_string(coeffs.beta.rows()) + " rows");
  }
  Matrix eta = X * coeffs.beta;
  eta.rowwise() += coeffs.alpha.transpose();
  return eta;
}

Matrix linear_predictors(const Coefficients& coeffs, const AnnotatedDataset& dataset,
                         std::size_t dataset_index) {
  Matrix eta = linear_predictors(coeffs, dataset.X);
  if (!coeffs.gamma.empty()) {
    if (dataset_index >= coeffs.gamma.size()) {
      throw DataError("dataset axis: no gamma for dataset " + std::to_string(dataset_index));
    }
    const Matrix& g = coeffs.gamma[dataset_index];
    if (dataset.Z.cols() != g.rows()) {
      throw DataError("covariate axis: Z has " + std::to_string(dataset.Z.cols()) +
                      " columns, gamma has " + std::to_string(g.rows()) + " rows");
    }
    if (g.rows() > 0) {
      eta.noalias() += dataset.Z * g;
    }
  } else if (dataset.Z.cols() != 0) {
    throw DataError("covariate axis: Z has " + std::to_string(dataset.Z.cols()) +
                    " columns but the coefficients have no batch block");
  }
  return eta;
}

ProbMatrix softmax_rows(const Matrix& eta) {
  ProbMatrix out{Matrix(eta.rows(), eta.cols()), ProbKind::unconditional};
  for (Eigen::Index i = 0; i < eta.rows(); ++i) {
    detail::softmax_row(eta.row(i), out.values.row(i));
  }
  return out;
}

ProbMatrix unconditional_probs(const Coefficients& coeffs, const AnnotatedDataset& dataset,
                               std::size_t dataset_index) {
  return softmax_rows(linear_predictors(coeffs, dataset, dataset_index));
}

ProbMatrix conditional_probs(const Matrix& eta, const std::vector<const Bin*>& bins) {
  if (static_cast<Eigen::Index>(bins.size()) != eta.rows()) {
    throw DataError("observation axis: " + std::to_string(bins.size()) + " labels for " +
                    std::to_string(eta.rows()) + " rows");
  }
  ProbMatrix out{Matrix(eta.rows(), eta.cols()), ProbKind::conditional};
  for (Eigen::Index i = 0; i < eta.rows(); ++i) {
    detail::conditional_row(eta.row(i), *bins[static_cast<std::size_t>(i)], out.values.row(i));
  }
  return out;
}

ProbMatrix conditional_probs(const Coefficients& coeffs, const AnnotatedDataset& dataset,
                             std::size_t dataset_index, const BinningSpec& spec) {
  const Matrix eta = linear_predictors(coeffs, dataset, dataset_index);
  std::vector<const Bin*> bins;
  bins.reserve(dataset.y.size());
  for (const auto& label : dataset.y) {
    bins.push_back(&spec.unbin(dataset_index, label));
  }
  return conditional_probs(eta, bins);
}

Matrix coarse_label_probs(const ProbMatrix& unconditional, const DatasetBinning& binning) {
  const Matrix& p = unconditional.values;
  Matrix out(p.rows(), static_cast<Eigen::Index>(binning.num_labels()));
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (std::size_t j = 0; j < binning.num_labels(); ++j) {
      out(i, static_cast<Eigen::Index>(j)) = detail::bin_mass(p.row(i), binning.bin(j));
    }
  }
  return out;
}

double negative_log_likelihood(const Coefficients& coeffs, const DatasetCollection& collection) {
  check_dimensions(coeffs, collection);
  double total = 0.0;
  for (std::size_t k = 0; k < collection.num_datasets(); ++k) {
    const Matrix eta = linear_predictors(coeffs, collection.dataset(k), k);
    total += detail::dataset_nll(eta, collection, k, nullptr);
  }
  return total / static_cast<double>(collection.total_rows());
}

Gradients gradients(const Coefficients& coeffs, const DatasetCollection& collection) {
  check_dimensions(coeffs, collection);
  const auto c = static_cast<Eigen::Index>(collection.num_categories());
  const double inv_n = 1.0 / static_cast<double>(collection.total_rows());
  Gradients g;
  g.alpha = Vector::Zero(c);
  g.beta = Matrix::Zero(static_cast<Eigen::Index>(collection.num_features()), c);
  Matrix residual;
  for (std::size_t k = 0; k < collection.num_datasets(); ++k) {
    const auto& d = collection.dataset(k);
    const Matrix eta = linear_predictors(coeffs, d, k);
    detail::dataset_nll(eta, collection, k, &residual);
    g.beta.noalias() += d.X.transpose() * residual;
    g.alpha += residual.colwise().sum().transpose();
    if (coeffs.has_batch()) {
      g.gamma.push_back(inv_n * (d.Z.transpose() * residual));
    }
  }
  g.beta *= inv_n;
  g.alpha *= inv_n;
  return g;
}

}  // namespace binmr
