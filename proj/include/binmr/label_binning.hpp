#ifndef BINMR_LABEL_BINNING_HPP
#define BINMR_LABEL_BINNING_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "binmr/types.hpp"

/**
 * @file label_binning.hpp
 * @brief Finest-resolution categories, per-dataset label binning and annotated datasets.
 */

namespace binmr {

/**
 * Ordered set of finest-resolution category names.
 * Position in the set is the canonical category index used by every matrix column.
 */
class CategorySet {
 public:
  CategorySet() = default;

  /// Throws `std::invalid_argument` on duplicates, empty names or fewer than two categories.
  explicit CategorySet(std::vector<std::string> names);

  std::size_t size() const noexcept { return names_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  std::optional<std::size_t> find(std::string_view name) const;

  /// Throws `LookupError` when `name` is not a category.
  std::size_t index_of(std::string_view name) const;

  friend bool operator==(const CategorySet& a, const CategorySet& b) { return a.names_ == b.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Sorted fine-category indices making up one observed label.
using Bin = std::vector<std::size_t>;

/**
 * Binning function of one dataset: every fine category maps to exactly one observed label.
 *
 * Observed labels are numbered by first appearance while walking the fine categories
 * in canonical order, so `bin(j)` is never empty and the bins partition the fine set.
 */
class DatasetBinning {
 public:
  DatasetBinning() = default;

  /// `label_of_fine[l]` is the observed label that fine category `l` is recorded as.
  DatasetBinning(std::string id, std::vector<std::string> label_of_fine);

  const std::string& id() const noexcept { return id_; }
  std::size_t num_fine() const noexcept { return fine_to_label_.size(); }
  std::size_t num_labels() const noexcept { return labels_.size(); }
  const std::string& label_name(std::size_t j) const { return labels_.at(j); }
  const std::vector<std::string>& label_names() const noexcept { return labels_; }
  std::optional<std::size_t> find_label(std::string_view label) const;

  /// f_k
  std::size_t label_of_fine(std::size_t l) const { return fine_to_label_.at(l); }

  /// g_k
  const Bin& bin(std::size_t j) const { return bins_.at(j); }

  /// A label is fine when its bin is a singleton.
  bool is_fine_label(std::size_t j) const { return bins_.at(j).size() == 1; }

  friend bool operator==(const DatasetBinning& a, const DatasetBinning& b) {
    return a.id_ == b.id_ && a.fine_to_label_ == b.fine_to_label_ && a.labels_ == b.labels_;
  }

 private:
  std::string id_;
  std::vector<std::string> labels_;
  std::vector<std::size_t> fine_to_label_;
  std::vector<Bin> bins_;
  std::unordered_map<std::string, std::size_t> label_index_;
};

/// The fine category set plus one binning per dataset.
class BinningSpec {
 public:
  BinningSpec() = default;

  /// Throws `std::invalid_argument` if a binning does not cover exactly `fine.size()` categories.
  BinningSpec(CategorySet fine, std::vector<DatasetBinning> datasets);

  /// Every dataset observes every category at finest resolution.
  static BinningSpec all_fine(CategorySet fine, const std::vector<std::string>& dataset_ids);

  const CategorySet& fine() const noexcept { return fine_; }
  std::size_t num_datasets() const noexcept { return datasets_.size(); }
  const DatasetBinning& dataset(std::size_t k) const { return datasets_.at(k); }
  const std::vector<DatasetBinning>& datasets() const noexcept { return datasets_; }
  std::optional<std::size_t> find_dataset(std::string_view id) const;

  /// g_k(label); throws `LookupError` naming the dataset and label when unknown.
  const Bin& unbin(std::size_t k, std::string_view label) const;

  friend bool operator==(const BinningSpec& a, const BinningSpec& b) {
    return a.fine_ == b.fine_ && a.datasets_ == b.datasets_;
  }

 private:
  CategorySet fine_;
  std::vector<DatasetBinning> datasets_;
};

/// One dataset: features, batch covariates (possibly zero columns) and observed labels.
struct AnnotatedDataset {
  Matrix X;
  Matrix Z;
  std::vector<std::string> y;

  std::size_t rows() const noexcept { return y.size(); }
};

/**
 * Datasets paired with their binning.
 *
 * Construction checks shapes and finiteness and throws `DataError` on failure.
 * Label membership and resolution coverage are reported by `validate_binning()`.
 */
class DatasetCollection {
 public:
  static constexpr std::size_t unknown_label = static_cast<std::size_t>(-1);

  DatasetCollection() = default;
  DatasetCollection(std::vector<AnnotatedDataset> datasets, BinningSpec binning);

  std::size_t num_datasets() const noexcept { return datasets_.size(); }
  std::size_t num_features() const noexcept { return p_; }
  std::size_t num_covariates() const noexcept { return r_; }
  std::size_t num_categories() const noexcept { return binning_.fine().size(); }
  std::size_t total_rows() const noexcept { return total_rows_; }

  const AnnotatedDataset& dataset(std::size_t k) const { return datasets_.at(k); }
  const std::vector<AnnotatedDataset>& datasets() const noexcept { return datasets_; }
  const BinningSpec& binning() const noexcept { return binning_; }

  /// Observed label of every row as an index into the dataset's label set.
  std::span<const std::size_t> label_indices(std::size_t k) const { return labels_.at(k); }

  /// Bin of row `i` in dataset `k`; throws `LookupError` if the row's label is unknown.
  const Bin& row_bin(std::size_t k, std::size_t i) const;

  /// True when every row carries a label of its dataset's binning.
  bool labels_resolved() const noexcept { return unresolved_ == 0; }

 private:
  std::vector<AnnotatedDataset> datasets_;
  BinningSpec binning_;
  std::vector<std::vector<std::size_t>> labels_;
  std::size_t p_ = 0;
  std::size_t r_ = 0;
  std::size_t total_rows_ = 0;
  std::size_t unresolved_ = 0;
};

enum class ViolationKind {
  unknown_label,        ///< a row carries a label that is not in its dataset's label set
  empty_bin,            ///< an observed label has no fine categories
  not_partition,        ///< bins overlap or miss a fine category
  not_observed_fine,    ///< a fine category is never observed at finest resolution
};

struct BinningViolation {
  ViolationKind kind;
  std::size_t dataset;  ///< dataset index, or npos for collection-wide violations
  std::string name;     ///< offending label or category
  std::string message;
};

/// Empty result iff every binning invariant and the resolution-coverage condition hold.
std::vector<BinningViolation> validate_binning(const DatasetCollection& collection);

/// Throws `DataError` summarizing the report when it is non-empty.
void require_valid(const DatasetCollection& collection);

}  // namespace binmr

#endif  // BINMR_LABEL_BINNING_HPP
