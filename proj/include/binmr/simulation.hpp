#ifndef BINMR_SIMULATION_HPP
#define BINMR_SIMULATION_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "binmr/label_binning.hpp"
#include "binmr/types.hpp"

/**
 * @file simulation.hpp
 * @brief Synthetic multi-dataset benchmark with binned labels and batch effects.
 *
 * Twelve fine categories A1..F2. Training and validation each consist of six datasets of
 * N/6 rows: datasets 1-4 record the pairs A..E at the pair level and F1/F2 at finest
 * resolution, datasets 5-6 record everything at finest resolution. Features are AR(1)(0.5)
 * Gaussian, shifted by one random batch vector per dataset. The test set is fully fine and
 * batch free.
 */

namespace binmr {

struct SimConfig {
  std::size_t N = 4800;       ///< total training rows, split evenly over 6 datasets
  std::size_t p = 500;        ///< features; 100 rows of beta* are nonzero
  std::size_t s = 40;         ///< nonzero rows shared within each binned pair
  double b = 0.1;             ///< batch-to-signal Frobenius ratio per dataset
  std::uint64_t seed = 1;
  std::size_t test_n = 10000;

  /// Throws `std::invalid_argument` (N % 6 != 0, s > 100, p < 100, b < 0, ...).
  void validate() const;
};

inline constexpr std::size_t kSimCategories = 12;
inline constexpr std::size_t kSimNonzeroRows = 100;
inline constexpr std::size_t kSimDatasets = 6;
inline constexpr double kSimArCorrelation = 0.5;

struct SimTruth {
  Matrix beta_star;  ///< p x 12
  Vector alpha_star;  ///< zeros
  std::vector<std::size_t> nonzero_rows;  ///< sorted, size 100
  std::vector<std::size_t> shared_rows;   ///< sorted subset of nonzero_rows, size s
  Matrix test_probs;                      ///< true category probabilities of every test row
  std::vector<std::vector<std::string>> train_fine_labels;
  std::vector<std::vector<std::string>> validation_fine_labels;
  std::vector<Vector> train_batch_offsets;  ///< row added to every X~ row of dataset k
  std::vector<Vector> validation_batch_offsets;
};

struct SimData {
  DatasetCollection train;
  DatasetCollection validation;
  AnnotatedDataset test;  ///< fine labels, no batch covariates
  SimTruth truth;
};

/// Fine category set A1, A2, ..., F2.
CategorySet sim_categories();

/// The six-dataset binning used for training and validation (ids prefixed by `prefix`).
BinningSpec sim_binning(const std::string& prefix);

/// Generates one replicate. Identical configs give bit-identical output.
SimData simulate(const SimConfig& config);

/// ||U||_F / ||X~||_F where U = X - X~. Throws `DataError` on shape mismatch or zero ||X~||_F.
double empirical_batch_ratio(const Matrix& X, const Matrix& X_tilde);

/// Reads `key = value` lines (N, p, s, b, seed, test_n); '#' starts a comment.
SimConfig read_sim_config(std::istream& in, const std::string& source = "config");

void write_sim_config(std::ostream& out, const SimConfig& config);

}  // namespace binmr

#endif  // BINMR_SIMULATION_HPP
