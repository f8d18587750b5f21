#ifndef BINMR_TUNING_PATH_HPP
#define BINMR_TUNING_PATH_HPP

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "binmr/label_binning.hpp"
#include "binmr/likelihood.hpp"
#include "binmr/solver.hpp"

namespace binmr {

/// Ridge weights used when none are supplied.
inline const std::vector<double> kDefaultRhos = {0.01, 0.1, 1.0, 10.0};

struct TuningGrid {
  std::vector<double> lambdas;  ///< strictly decreasing, lambdas.front() = lambda_max
  std::vector<double> rhos;
  std::size_t n_lambda = 25;
  double lambda_min_ratio = 1e-3;
};

/// Grid point key; ordered by (lambda, rho).
using GridPoint = std::pair<double, double>;

struct PathEntry {
  double lambda = 0.0;
  double rho = 0.0;
  std::optional<FitResult> fit;  ///< empty when the fit failed
  double validation_nll = 0.0;   ///< NaN when the fit failed
  std::string error;
};

struct PathResult {
  std::vector<PathEntry> entries;  ///< per rho slice, lambdas in decreasing order
  GridPoint selected{0.0, 0.0};
  std::size_t selected_index = 0;

  const PathEntry& best() const { return entries.at(selected_index); }
  const PathEntry* find(double lambda, double rho) const;
};

/**
 * Smallest lambda at which beta = 0 satisfies the group-lasso stationarity condition.
 *
 * Fits the beta = 0 submodel (alpha and gamma only) from zero initialization and returns the
 * largest row norm of grad_beta over that solve's iterates, including the final one. A full fit
 * from zero initialization follows the same alpha/gamma iterates while beta stays zero, so beta
 * remains exactly zero at this lambda.
 */
double lambda_max(const DatasetCollection& collection, double rho, const SolverConfig& base = {});

/// Log-spaced lambdas from lambda_max down to lambda_max * lambda_min_ratio.
TuningGrid build_grid(const DatasetCollection& collection, std::size_t n_lambda, double lambda_min_ratio,
                      std::vector<double> rhos = kDefaultRhos, const SolverConfig& base = {});

/// Same spacing from a known lambda_max.
TuningGrid build_grid_from(double lambda_max_value, std::size_t n_lambda, double lambda_min_ratio,
                           std::vector<double> rhos = kDefaultRhos);

/// NLL of validation data using only alpha and beta (batch terms dropped).
double validation_nll(const Coefficients& coeffs, const DatasetCollection& validation);

struct PathOptions {
  SolverConfig solver;    ///< lambda, rho and init are overwritten per grid point
  std::size_t threads = 1;  ///< rho slices fitted concurrently
};

/**
 * Fits every (lambda, rho) with warm starts along decreasing lambda within each rho slice, and
 * selects the point with the smallest validation NLL (ties go to larger lambda, then larger rho).
 * Throws `NumericalError` when every grid point failed.
 */
PathResult fit_path(const DatasetCollection& train, const DatasetCollection& validation,
                    const TuningGrid& grid, const PathOptions& options = {});

/// Tab-delimited report: lambda, rho, objective, validation NLL, active rows, iterations, status.
void write_path_report(std::ostream& out, const PathResult& path);

}  // namespace binmr

#endif  // BINMR_TUNING_PATH_HPP
