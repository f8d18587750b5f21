#ifndef BINMR_SOLVER_HPP
#define BINMR_SOLVER_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "binmr/label_binning.hpp"
#include "binmr/likelihood.hpp"
#include "binmr/types.hpp"

/**
 * @file solver.hpp
 * @brief Blockwise proximal gradient descent for the group-lasso / ridge penalized
 * binned multinomial likelihood.
 *
 * Each iteration updates beta (group soft-thresholding), then every gamma_(k)
 * (ridge shrinkage after a gradient step), then alpha (plain gradient step).
 * Every block step size is chosen by backtracking until the quadratic majorizer
 * of the loss dominates the loss at the candidate, which makes the penalized
 * objective nonincreasing.
 */

namespace binmr {

/// Each search starts at twice the block's last accepted step (the first at `initial_step`),
/// capped at `max_step`, and halves on every failed majorization test.
struct LineSearchOptions {
  double initial_step = 1.0;
  double shrink = 0.5;
  int max_backtracks = 50;
  double max_step = 1e6;
};

struct SolverConfig {
  double lambda = 0.0;  ///< group-lasso weight on rows of beta
  double rho = 0.0;     ///< ridge weight on every gamma_(k)
  int max_iters = 2000;
  double tol = 1e-8;  ///< relative objective change |F_t - F_{t+1}| / (1 + |F_t|)
  LineSearchOptions line_search;
  std::optional<Coefficients> init;  ///< zeros when empty
  bool freeze_beta = false;          ///< keep beta fixed at its initial value

  /// Throws `std::invalid_argument` on negative weights, tol <= 0 or shrink outside (0, 1).
  void validate() const;
};

enum class FitStatus { converged, max_iterations, line_search_failed };

struct FitResult {
  Coefficients coeffs;
  std::vector<double> objective_trace;  ///< F at the initial point, then after each iteration
  bool converged = false;
  int iterations = 0;
  std::vector<std::size_t> active_rows;
  FitStatus status = FitStatus::max_iterations;
  std::string message;
  /// With `freeze_beta`: largest row norm of grad_beta seen at any iterate.
  double max_beta_gradient_norm = 0.0;
};

/// Row-wise group soft-thresholding: row j becomes max(1 - threshold/||nu_j||, 0) nu_j.
Matrix prox_group_rows(const Matrix& nu, double threshold);

/// L + lambda sum_j ||beta_j||_2 + rho/2 sum_k ||gamma_(k)||_F^2
double penalized_objective(const Coefficients& coeffs, const DatasetCollection& collection,
                           double lambda, double rho);

double group_norm(const Matrix& beta);

/**
 * Iteration state of the blockwise solver.
 *
 * Caches X_(k) beta and Z_(k) gamma_(k) per dataset together with the current loss and
 * P - C residuals, so block updates only recompute what they change.
 */
class BlockwiseSolver {
 public:
  /// `collection` must outlive the solver. Throws `DataError` if it is invalid.
  BlockwiseSolver(const DatasetCollection& collection, SolverConfig config);

  const Coefficients& coefficients() const noexcept { return coeffs_; }
  const SolverConfig& config() const noexcept { return config_; }

  /// Scaled negative log-likelihood at the current iterate.
  double loss() const noexcept { return loss_; }

  /// Penalized objective at the current iterate.
  double objective() const;

  Gradients current_gradients() const;

  /// prox(beta - s grad_beta, s lambda) at the current iterate.
  Matrix beta_candidate(double step) const;

  /// (1 + s rho)^-1 (gamma_(k) - s grad_gamma_(k)) at the current iterate.
  Matrix gamma_candidate(std::size_t k, double step) const;

  /// alpha - s grad_alpha at the current iterate.
  Vector alpha_candidate(double step) const;

  /// Backtracking block updates; each returns the accepted step, or nullopt when the
  /// majorization test never passed (the block is then left unchanged).
  std::optional<double> update_beta();
  std::optional<double> update_gamma(std::size_t k);
  std::optional<double> update_alpha();

  /// One full pass beta -> gamma -> alpha. Returns false when a line search failed.
  bool iterate();

  /// Iterates to convergence and returns the centered result.
  FitResult run();

 private:
  void refresh_dataset(std::size_t k);
  double dataset_loss(std::size_t k, const Matrix& eta, Matrix* residual) const;
  Matrix beta_gradient() const;
  double max_row_norm(const Matrix& g) const;

  const DatasetCollection& data_;
  SolverConfig config_;
  Coefficients coeffs_;
  double inv_n_ = 0.0;

  std::vector<Matrix> xb_;        // X_(k) beta
  std::vector<Matrix> zg_;        // Z_(k) gamma_(k)
  std::vector<Matrix> residual_;  // P_(k) - C_(k)
  std::vector<double> loss_k_;    // per-dataset loss contribution (already scaled by 1/N)
  double loss_ = 0.0;

  double step_beta_;
  std::vector<double> step_gamma_;
  double step_alpha_;
};

/// Runs the blockwise proximal gradient descent to convergence.
FitResult fit(const DatasetCollection& collection, const SolverConfig& config);

}  // namespace binmr

#endif  // BINMR_SOLVER_HPP
