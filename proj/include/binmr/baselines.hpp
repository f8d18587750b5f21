#ifndef BINMR_BASELINES_HPP
#define BINMR_BASELINES_HPP

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "binmr/label_binning.hpp"
#include "binmr/likelihood.hpp"
#include "binmr/tuning_path.hpp"

namespace binmr {

enum class Method { ibmr_int, ibmr_ng, subset, relabel, ibmr_int_orc, gl_orc };

/// Canonical name, e.g. "IBMR-int".
const char* method_name(Method method);

/// Throws `std::invalid_argument` for unknown names.
Method parse_method(std::string_view name);

bool is_oracle(Method method);

/// Every Z_(k) replaced by an all-ones column (a batch-specific intercept).
DatasetCollection make_ibmr_int(const DatasetCollection& collection);

/// Batch covariates removed (r = 0), so the model has no gamma block.
DatasetCollection make_ibmr_ng(const DatasetCollection& collection);

/// Number of rows kept by `make_subset`, per dataset.
std::vector<std::size_t> fine_row_counts(const DatasetCollection& collection);

/**
 * Keeps only rows whose observed label is a fine label, relabels them with the fine category
 * name, gives every dataset the all-fine binning and drops batch covariates.
 * Throws `CoverageError` if some fine category is never retained.
 */
DatasetCollection make_subset(const DatasetCollection& collection);

/// Each row's label replaced by the argmax of its conditional probabilities under
/// `subset_fit` (gamma = 0); all-fine binning; no batch covariates.
DatasetCollection make_relabel(const DatasetCollection& collection, const Coefficients& subset_fit);

/// True fine labels substituted for every observed label. IBMR-int-ORC keeps an all-ones Z,
/// GL-ORC drops the batch block. Throws `std::invalid_argument` for a non-oracle method and
/// `DataError` when the label lists do not match the collection.
DatasetCollection make_oracle(const DatasetCollection& collection,
                              const std::vector<std::vector<std::string>>& fine_labels, Method variant);

struct MethodFitOptions {
  std::size_t n_lambda = 25;
  double lambda_min_ratio = 1e-3;
  std::vector<double> rhos = kDefaultRhos;
  PathOptions path;
};

struct MethodFit {
  Method method = Method::ibmr_int;
  Coefficients coeffs;     ///< selected model
  PathResult path;         ///< final-stage path
  std::optional<PathResult> first_stage;  ///< relabel only: the subset path
  double lambda_max = 0.0;
};

/// Oracle fine labels of training and validation rows, required by the oracle methods.
struct OracleLabels {
  std::vector<std::vector<std::string>> train;
  std::vector<std::vector<std::string>> validation;
};

/**
 * Builds the method's training data, fits its tuning path and returns the selected model.
 * Validation data stays as observed, except for oracle methods where it is oracle-labeled too.
 */
MethodFit fit_method(Method method, const DatasetCollection& train, const DatasetCollection& validation,
                     const MethodFitOptions& options = {}, const OracleLabels* oracle = nullptr);

}  // namespace binmr

#endif  // BINMR_BASELINES_HPP
