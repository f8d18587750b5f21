#include "binmr/label_binning.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "binmr/errors.hpp"

namespace binmr {

CategorySet::CategorySet(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.size() < 2) {
    throw std::invalid_argument("a category set needs at least two categories");
  }
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i].empty()) {
      throw std::invalid_argument("category names must be nonempty");
    }
    if (!index_.emplace(names_[i], i).second) {
      throw std::invalid_argument("duplicate category name '" + names_[i] + "'");
    }
  }
}

std::optional<std::size_t> CategorySet::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) {
    return std::nullopt;
  }
  return it->second;
}

std::size_t CategorySet::index_of(std::string_view name) const {
  if (auto i = find(name)) {
    return *i;
  }
  throw LookupError("unknown category '" + std::string(name) + "'");
}

DatasetBinning::DatasetBinning(std::string id, std::vector<std::string> label_of_fine)
    : id_(std::move(id)) {
  fine_to_label_.reserve(label_of_fine.size());
  for (std::size_t l = 0; l < label_of_fine.size(); ++l) {
    const std::string& label = label_of_fine[l];
    if (label.empty()) {
      throw std::invalid_argument("dataset '" + id_ + "': empty label for fine category " +
                                  std::to_string(l));
    }
    auto [it, inserted] = label_index_.emplace(label, labels_.size());
    if (inserted) {
      labels_.push_back(label);
      bins_.emplace_back();
    }
    fine_to_label_.push_back(it->second);
    bins_[it->second].push_back(l);
  }
}

std::optional<std::size_t> DatasetBinning::find_label(std::string_view label) const {
  auto it = label_index_.find(std::string(label));
  if (it == label_index_.end()) {
    return std::nullopt;
  }
  return it->second;
}

BinningSpec::BinningSpec(CategorySet fine, std::vector<DatasetBinning> datasets)
    : fine_(std::move(fine)), datasets_(std::move(datasets)) {
  for (const auto& d : datasets_) {
    if (d.num_fine() != fine_.size()) {
      throw std::invalid_argument("dataset '" + d.id() + "' bins " + std::to_string(d.num_fine()) +
                                  " categories, expected " + std::to_string(fine_.size()));
    }
  }
}

BinningSpec BinningSpec::all_fine(CategorySet fine, const std::vector<std::string>& dataset_ids) {
  std::vector<DatasetBinning> datasets;
  datasets.reserve(dataset_ids.size());
  for (const auto& id : dataset_ids) {
    datasets.emplace_back(id, fine.names());
  }
  return BinningSpec(std::move(fine), std::move(datasets));
}

std::optional<std::size_t> BinningSpec::find_dataset(std::string_view id) const {
  for (std::size_t k = 0; k < datasets_.size(); ++k) {
    if (datasets_[k].id() == id) {
      return k;
    }
  }
  return std::nullopt;
}

const Bin& BinningSpec::unbin(std::size_t k, std::string_view label) const {
  if (k >= datasets_.size()) {
    throw LookupError("unknown dataset index " + std::to_string(k));
  }
  const auto& d = datasets_[k];
  if (auto j = d.find_label(label)) {
    return d.bin(*j);
  }
  throw LookupError("dataset '" + d.id() + "' has no label '" + std::string(label) + "'");
}

namespace {

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace

DatasetCollection::DatasetCollection(std::vector<AnnotatedDataset> datasets, BinningSpec binning)
    : datasets_(std::move(datasets)), binning_(std::move(binning)) {
  if (datasets_.size() != binning_.num_datasets()) {
    throw DataError("collection has " + std::to_string(datasets_.size()) +
                    " datasets but the binning describes " + std::to_string(binning_.num_datasets()));
  }
  if (datasets_.empty()) {
    throw DataError("collection has no datasets");
  }
  p_ = static_cast<std::size_t>(datasets_.front().X.cols());
  r_ = static_cast<std::size_t>(datasets_.front().Z.cols());
  labels_.resize(datasets_.size());
  for (std::size_t k = 0; k < datasets_.size(); ++k) {
    const auto& d = datasets_[k];
    const std::string& id = binning_.dataset(k).id();
    const auto n = static_cast<Eigen::Index>(d.y.size());
    if (d.X.rows() != n) {
      throw DataError("dataset '" + id + "': X has " + std::to_string(d.X.rows()) + " rows, y has " +
                      std::to_string(n));
    }
    if (d.Z.rows() != n && !(d.Z.cols() == 0 && d.Z.rows() == 0)) {
      throw DataError("dataset '" + id + "': Z has " + std::to_string(d.Z.rows()) + " rows, y has " +
                      std::to_string(n));
    }
    if (static_cast<std::size_t>(d.X.cols()) != p_) {
      throw DataError("dataset '" + id + "': feature axis has " + std::to_string(d.X.cols()) +
                      " columns, expected " + std::to_string(p_));
    }
    if (static_cast<std::size_t>(d.Z.cols()) != r_) {
      throw DataError("dataset '" + id + "': covariate axis has " + std::to_string(d.Z.cols()) +
                      " columns, expected " + std::to_string(r_));
    }
    if (!all_finite(d.X) || !all_finite(d.Z)) {
      throw DataError("dataset '" + id + "': non-finite feature or covariate value");
    }
    // r = 0 datasets may carry a 0x0 Z; normalize so Z always has n rows.
    if (d.Z.rows() != n) {
      datasets_[k].Z.resize(n, 0);
    }
    const auto& b = binning_.dataset(k);
    auto& idx = labels_[k];
    idx.reserve(d.y.size());
    for (const auto& label : d.y) {
      auto j = b.find_label(label);
      idx.push_back(j ? *j : unknown_label);
      if (!j) {
        ++unresolved_;
      }
    }
    total_rows_ += d.y.size();
  }
}

const Bin& DatasetCollection::row_bin(std::size_t k, std::size_t i) const {
  const std::size_t j = labels_.at(k).at(i);
  if (j == unknown_label) {
    throw LookupError("dataset '" + binning_.dataset(k).id() + "' row " + std::to_string(i) +
                      ": unknown label '" + datasets_[k].y[i] + "'");
  }
  return binning_.dataset(k).bin(j);
}

std::vector<BinningViolation> validate_binning(const DatasetCollection& collection) {
  std::vector<BinningViolation> report;
  const auto& spec = collection.binning();
  const auto& fine = spec.fine();
  const std::size_t npos = static_cast<std::size_t>(-1);

  // covered[l]: some dataset observes l at finest resolution at least once
  std::vector<bool> covered(fine.size(), false);

  for (std::size_t k = 0; k < collection.num_datasets(); ++k) {
    const auto& b = spec.dataset(k);
    const auto& d = collection.dataset(k);
    const auto labels = collection.label_indices(k);

    std::vector<std::size_t> counts(b.num_labels(), 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == DatasetCollection::unknown_label) {
        report.push_back({ViolationKind::unknown_label, k, d.y[i],
                          "dataset '" + b.id() + "' row " + std::to_string(i) + ": label '" + d.y[i] +
                              "' is not in the dataset's label set"});
      } else {
        ++counts[labels[i]];
      }
    }

    std::vector<std::size_t> hits(fine.size(), 0);
    for (std::size_t j = 0; j < b.num_labels(); ++j) {
      const Bin& bin = b.bin(j);
      if (bin.empty()) {
        report.push_back({ViolationKind::empty_bin, k, b.label_name(j),
                          "dataset '" + b.id() + "': label '" + b.label_name(j) + "' has an empty bin"});
      }
      for (std::size_t l : bin) {
        ++hits[l];
      }
      if (bin.size() == 1 && counts[j] > 0) {
        covered[bin.front()] = true;
      }
    }
    for (std::size_t l = 0; l < fine.size(); ++l) {
      if (hits[l] != 1) {
        report.push_back({ViolationKind::not_partition, k, fine.name(l),
                          "dataset '" + b.id() + "': category '" + fine.name(l) + "' appears in " +
                              std::to_string(hits[l]) + " bins"});
      }
    }
  }

  for (std::size_t l = 0; l < fine.size(); ++l) {
    if (!covered[l]) {
      report.push_back({ViolationKind::not_observed_fine, npos, fine.name(l),
                        "category '" + fine.name(l) +
                            "' is never observed at finest resolution in any dataset"});
    }
  }
  return report;
}

void require_valid(const DatasetCollection& collection) {
  auto report = validate_binning(collection);
  if (report.empty()) {
    return;
  }
  std::ostringstream msg;
  msg << "invalid binning (" << report.size() << " violation" << (report.size() == 1 ? "" : "s") << ")";
  const std::size_t shown = std::min<std::size_t>(report.size(), 5);
  for (std::size_t v = 0; v < shown; ++v) {
    msg << "\n  " << report[v].message;
  }
  if (shown < report.size()) {
    msg << "\n  ...";
  }
  throw DataError(msg.str());
}

}  // namespace binmr
