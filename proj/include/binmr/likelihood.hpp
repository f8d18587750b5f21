#ifndef BINMR_LIKELIHOOD_HPP
#define BINMR_LIKELIHOOD_HPP

#include <cstddef>
#include <vector>

#include "binmr/label_binning.hpp"
#include "binmr/types.hpp"

namespace binmr {

/**
 * Model parameters: intercepts `alpha` (|C|), shared coefficients `beta` (p x |C|)
 * and one batch coefficient matrix `gamma[k]` (r x |C|) per training dataset.
 *
 * An empty `gamma` list means the model has no batch block (r = 0).
 */
struct Coefficients {
  Vector alpha;
  Matrix beta;
  std::vector<Matrix> gamma;

  static Coefficients zeros(std::size_t num_categories, std::size_t p, std::size_t r,
                            std::size_t num_datasets);

  /// Zero coefficients shaped for `collection`.
  static Coefficients zeros_for(const DatasetCollection& collection);

  std::size_t num_categories() const noexcept { return static_cast<std::size_t>(alpha.size()); }
  std::size_t num_features() const noexcept { return static_cast<std::size_t>(beta.rows()); }
  bool has_batch() const noexcept { return !gamma.empty(); }

  /// Same alpha and beta with all-zero gamma shaped for `collection` (empty when r = 0).
  Coefficients with_zero_batch(const DatasetCollection& collection) const;

  /// Subtracts the mean across categories from alpha and from every row of beta and gamma.
  void center();

  /// Indices of beta rows with nonzero Euclidean norm.
  std::vector<std::size_t> active_rows() const;

  bool all_finite() const;
};

/// Throws `DataError` naming the offending axis when `coeffs` does not fit `collection`.
void check_dimensions(const Coefficients& coeffs, const DatasetCollection& collection);

enum class ProbKind { unconditional, conditional };

/// n x |C| matrix of category probabilities.
struct ProbMatrix {
  Matrix values;
  ProbKind kind = ProbKind::unconditional;
};

/// alpha + x'beta + z'gamma_(k) for every row; `gamma` is ignored when the coefficients have none.
Matrix linear_predictors(const Coefficients& coeffs, const AnnotatedDataset& dataset,
                         std::size_t dataset_index);

/// alpha + x'beta (batch term dropped, as for data from an unseen batch).
Matrix linear_predictors(const Coefficients& coeffs, const Matrix& X);

/// Row-wise stabilized softmax.
ProbMatrix softmax_rows(const Matrix& eta);

ProbMatrix unconditional_probs(const Coefficients& coeffs, const AnnotatedDataset& dataset,
                               std::size_t dataset_index);

/// Softmax renormalized within each row's bin; zero outside; exact indicators for fine labels.
ProbMatrix conditional_probs(const Coefficients& coeffs, const AnnotatedDataset& dataset,
                             std::size_t dataset_index, const BinningSpec& spec);

/// Conditional probabilities from precomputed linear predictors and the labels' bins.
ProbMatrix conditional_probs(const Matrix& eta, const std::vector<const Bin*>& bins);

/// n x |C_k| coarse-label probabilities: bin sums of unconditional probabilities.
Matrix coarse_label_probs(const ProbMatrix& unconditional, const DatasetBinning& binning);

/// (1/N) sum over all rows of -log P(observed label).
double negative_log_likelihood(const Coefficients& coeffs, const DatasetCollection& collection);

struct Gradients {
  Vector alpha;
  Matrix beta;
  std::vector<Matrix> gamma;
};

/// Gradients of the scaled negative log-likelihood, built from P - C residuals.
Gradients gradients(const Coefficients& coeffs, const DatasetCollection& collection);

}  // namespace binmr

#endif  // BINMR_LIKELIHOOD_HPP
