#include "binmr/tuning_path.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "binmr/errors.hpp"
#include "binmr/io.hpp"

namespace binmr {

const PathEntry* PathResult::find(double lambda, double rho) const {
  for (const auto& e : entries) {
    if (e.lambda == lambda && e.rho == rho) {
      return &e;
    }
  }
  return nullptr;
}

double lambda_max(const DatasetCollection& collection, double rho, const SolverConfig& base) {
  SolverConfig config = base;
  config.lambda = 0.0;
  config.rho = rho;
  config.freeze_beta = true;
  config.init.reset();
  BlockwiseSolver solver(collection, config);
  const FitResult sub = solver.run();
  // Pad by a few ulps so ||s g_j|| <= s lambda_max survives rounding inside the prox.
  return sub.max_beta_gradient_norm * (1.0 + 1e-12);
}

TuningGrid build_grid_from(double lambda_max_value, std::size_t n_lambda, double lambda_min_ratio,
                           std::vector<double> rhos) {
  if (n_lambda < 2) {
    throw std::invalid_argument("n_lambda must be at least 2");
  }
  if (!(lambda_min_ratio > 0.0 && lambda_min_ratio < 1.0)) {
    throw std::invalid_argument("lambda_min_ratio must lie in (0, 1)");
  }
  if (!(lambda_max_value > 0.0) || !std::isfinite(lambda_max_value)) {
    throw std::invalid_argument("lambda_max must be positive and finite");
  }
  if (rhos.empty()) {
    throw std::invalid_argument("at least one rho is required");
  }
  for (double r : rhos) {
    if (!(r >= 0.0)) {
      throw std::invalid_argument("rho values must be nonnegative");
    }
  }
  TuningGrid grid;
  grid.n_lambda = n_lambda;
  grid.lambda_min_ratio = lambda_min_ratio;
  grid.rhos = std::move(rhos);
  grid.lambdas.resize(n_lambda);
  const double log_ratio = std::log(lambda_min_ratio);
  for (std::size_t i = 0; i < n_lambda; ++i) {
    const double frac = static_cast<double>(i) / static_cast<double>(n_lambda - 1);
    grid.lambdas[i] = lambda_max_value * std::exp(frac * log_ratio);
  }
  grid.lambdas.front() = lambda_max_value;
  grid.lambdas.back() = lambda_max_value * lambda_min_ratio;
  return grid;
}

TuningGrid build_grid(const DatasetCollection& collection, std::size_t n_lambda, double lambda_min_ratio,
                      std::vector<double> rhos, const SolverConfig& base) {
  if (rhos.empty()) {
    throw std::invalid_argument("at least one rho is required");
  }
  const double smallest_rho = *std::min_element(rhos.begin(), rhos.end());
  const double lmax = lambda_max(collection, smallest_rho, base);
  return build_grid_from(lmax, n_lambda, lambda_min_ratio, std::move(rhos));
}

double validation_nll(const Coefficients& coeffs, const DatasetCollection& validation) {
  return negative_log_likelihood(coeffs.with_zero_batch(validation), validation);
}

namespace {

std::vector<PathEntry> fit_slice(const DatasetCollection& train, const DatasetCollection& validation,
                                 const TuningGrid& grid, double rho, const SolverConfig& base) {
  std::vector<PathEntry> slice;
  std::optional<Coefficients> warm;
  for (double lambda : grid.lambdas) {
    PathEntry entry;
    entry.lambda = lambda;
    entry.rho = rho;
    entry.validation_nll = std::numeric_limits<double>::quiet_NaN();
    SolverConfig config = base;
    config.lambda = lambda;
    config.rho = rho;
    config.init = warm;
    config.freeze_beta = false;
    try {
      FitResult result = fit(train, config);
      entry.validation_nll = validation_nll(result.coeffs, validation);
      warm = result.coeffs;
      entry.fit = std::move(result);
    } catch (const NumericalError& e) {
      entry.error = e.what();
    } catch (const DataError& e) {
      entry.error = e.what();
    }
    slice.push_back(std::move(entry));
  }
  return slice;
}

}  // namespace

PathResult fit_path(const DatasetCollection& train, const DatasetCollection& validation,
                    const TuningGrid& grid, const PathOptions& options) {
  if (!(train.binning().fine() == validation.binning().fine())) {
    throw DataError("training and validation data use different fine category sets");
  }
  if (train.num_features() != validation.num_features()) {
    throw DataError("feature axis: training has " + std::to_string(train.num_features()) +
                    " features, validation has " + std::to_string(validation.num_features()));
  }
  if (grid.lambdas.empty() || grid.rhos.empty()) {
    throw std::invalid_argument("empty tuning grid");
  }

  const std::size_t n_rho = grid.rhos.size();
  std::vector<std::vector<PathEntry>> slices(n_rho);

  if (train.num_covariates() == 0) {
    // No batch block: rho does not enter the objective, so one slice serves all.
    slices[0] = fit_slice(train, validation, grid, grid.rhos[0], options.solver);
    for (std::size_t r = 1; r < n_rho; ++r) {
      slices[r] = slices[0];
      for (auto& e : slices[r]) {
        e.rho = grid.rhos[r];
      }
    }
  } else {
    const std::size_t workers = std::max<std::size_t>(1, std::min(options.threads, n_rho));
    if (workers == 1) {
      for (std::size_t r = 0; r < n_rho; ++r) {
        slices[r] = fit_slice(train, validation, grid, grid.rhos[r], options.solver);
      }
    } else {
      std::atomic<std::size_t> next{0};
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          for (std::size_t r = next++; r < n_rho; r = next++) {
            slices[r] = fit_slice(train, validation, grid, grid.rhos[r], options.solver);
          }
        });
      }
      for (auto& t : pool) {
        t.join();
      }
    }
  }

  PathResult path;
  for (auto& s : slices) {
    for (auto& e : s) {
      path.entries.push_back(std::move(e));
    }
  }

  bool found = false;
  for (std::size_t i = 0; i < path.entries.size(); ++i) {
    const auto& e = path.entries[i];
    if (!e.fit || !std::isfinite(e.validation_nll)) {
      continue;
    }
    if (!found) {
      found = true;
      path.selected_index = i;
      continue;
    }
    const auto& b = path.entries[path.selected_index];
    const bool better = e.validation_nll < b.validation_nll ||
                        (e.validation_nll == b.validation_nll &&
                         (e.lambda > b.lambda || (e.lambda == b.lambda && e.rho > b.rho)));
    if (better) {
      path.selected_index = i;
    }
  }
  if (!found) {
    throw NumericalError("every grid point of the tuning path failed");
  }
  path.selected = {path.entries[path.selected_index].lambda, path.entries[path.selected_index].rho};
  return path;
}

namespace {

const char* status_name(FitStatus s) {
  switch (s) {
    case FitStatus::converged:
      return "converged";
    case FitStatus::max_iterations:
      return "max_iterations";
    case FitStatus::line_search_failed:
      return "line_search_failed";
  }
  return "unknown";
}

}  // namespace

void write_path_report(std::ostream& out, const PathResult& path) {
  out << "lambda\trho\tobjective\tvalidation_nll\tactive_rows\titerations\tstatus\tselected\n";
  for (std::size_t i = 0; i < path.entries.size(); ++i) {
    const auto& e = path.entries[i];
    out << format_double(e.lambda) << '\t' << format_double(e.rho) << '\t';
    if (e.fit) {
      out << format_double(e.fit->objective_trace.back()) << '\t' << format_double(e.validation_nll) << '\t'
          << e.fit->active_rows.size() << '\t' << e.fit->iterations << '\t' << status_name(e.fit->status);
    } else {
      out << "nan\tnan\t0\t0\tfailed";
    }
    out << '\t' << (i == path.selected_index ? 1 : 0) << '\n';
  }
}

}  // namespace binmr
