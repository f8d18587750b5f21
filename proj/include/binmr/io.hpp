#ifndef BINMR_IO_HPP
#define BINMR_IO_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "binmr/label_binning.hpp"
#include "binmr/likelihood.hpp"

/**
 * @file io.hpp
 * @brief Text file formats: datasets, binning tables, model artifacts and generic TSV tables.
 *
 * All numbers are written with 17 significant digits so a reload reproduces every double
 * bit for bit.
 */

namespace binmr {

/// Shortest form that always round-trips: printf "%.17g".
std::string format_double(double value);

/// Strict parse of a whole cell; throws `ParseError` citing `source:line`.
double parse_double(std::string_view cell, const std::string& source, std::size_t line);

/// Splits on tabs, keeping empty cells; strips one trailing '\r'.
std::vector<std::string> split_tabs(std::string_view line);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name; throws `LookupError`.
  std::size_t column(std::string_view name) const;
};

/// Header line plus rectangular rows; ragged rows throw `ParseError`.
Table read_table(std::istream& in, const std::string& source = "table");
void write_table(std::ostream& out, const Table& table);

// ---------------------------------------------------------------------------
// Datasets: a directory holding X.tsv (header = feature names), y.tsv (one label per line)
// and optionally Z.tsv (header = covariate names).

struct LoadedDataset {
  AnnotatedDataset data;
  std::vector<std::string> feature_names;
  std::vector<std::string> covariate_names;
  bool has_covariates = false;  ///< Z.tsv was present
};

LoadedDataset load_dataset(const std::filesystem::path& dir);

void save_dataset(const std::filesystem::path& dir, const AnnotatedDataset& data,
                  const std::vector<std::string>& feature_names = {},
                  const std::vector<std::string>& covariate_names = {});

/// Default feature names f1..fp.
std::vector<std::string> default_names(const std::string& prefix, std::size_t count);

/**
 * Keeps `n` rows drawn without replacement with probability proportional to `weights`
 * (all rows when `n` is at least the row count). Rows keep their original order.
 */
AnnotatedDataset subsample(const AnnotatedDataset& data, std::size_t n, const std::vector<double>& weights,
                           std::uint64_t seed);

/// One nonnegative weight per line.
std::vector<double> read_weights(const std::filesystem::path& file);

// ---------------------------------------------------------------------------
// Binning table: header "dataset<TAB>fine1<TAB>fine2...", one row per dataset with the
// observed label of every fine category.

BinningSpec read_binning(std::istream& in, const std::string& source = "binning");
BinningSpec read_binning(const std::filesystem::path& file);
void write_binning(std::ostream& out, const BinningSpec& spec);

// ---------------------------------------------------------------------------
// Model artifacts

inline constexpr int kModelFormatVersion = 1;

struct ModelArtifact {
  CategorySet categories;
  Coefficients coeffs;
  double lambda = 0.0;
  double rho = 0.0;
  std::string method;
  std::vector<std::string> feature_names;
  Vector feature_sds;
  int version = kModelFormatVersion;
};

/// Throws `DataError` when dimensions disagree with the category and feature counts.
void check_artifact(const ModelArtifact& artifact);

void save_model(std::ostream& out, const ModelArtifact& artifact);
void save_model(const std::filesystem::path& file, const ModelArtifact& artifact);

/// Throws `ParseError` on malformed or truncated input and `DataError` on a version mismatch.
ModelArtifact load_model(std::istream& in, const std::string& source = "model");
ModelArtifact load_model(const std::filesystem::path& file);

/// Column standard deviations pooled over datasets (denominator n - 1).
Vector pooled_feature_sds(const std::vector<AnnotatedDataset>& datasets);

}  // namespace binmr

#endif  // BINMR_IO_HPP
