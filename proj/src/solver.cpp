#include "binmr/solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "binmr/detail/row_kernels.hpp"
#include "binmr/errors.hpp"

namespace binmr {

namespace {

// Rounding allowance in the majorization test, relative to the loss scale.
constexpr double kMajorizationSlack = 1e-13;

Matrix multiply_active_rows(const Matrix& X, const Matrix& beta) {
  std::vector<Eigen::Index> active;
  active.reserve(static_cast<std::size_t>(beta.rows()));
  for (Eigen::Index j = 0; j < beta.rows(); ++j) {
    if (beta.row(j).squaredNorm() > 0.0) {
      active.push_back(j);
    }
  }
  if (active.empty()) {
    return Matrix::Zero(X.rows(), beta.cols());
  }
  if (static_cast<double>(active.size()) > 0.7 * static_cast<double>(beta.rows())) {
    return X * beta;
  }
  const Matrix xs = X(Eigen::all, active);
  const Matrix bs = beta(active, Eigen::all);
  return xs * bs;
}

}  // namespace

void SolverConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("lambda must be a finite nonnegative number");
  }
  if (!(rho >= 0.0) || !std::isfinite(rho)) {
    throw std::invalid_argument("rho must be a finite nonnegative number");
  }
  if (max_iters <= 0) {
    throw std::invalid_argument("max_iters must be positive");
  }
  if (!(tol > 0.0)) {
    throw std::invalid_argument("tol must be positive");
  }
  if (!(line_search.shrink > 0.0 && line_search.shrink < 1.0)) {
    throw std::invalid_argument("line-search shrink factor must lie in (0, 1)");
  }
  if (!(line_search.initial_step > 0.0) || line_search.max_backtracks < 0) {
    throw std::invalid_argument("line-search initial step must be positive");
  }
  if (!(line_search.max_step >= line_search.initial_step)) {
    throw std::invalid_argument("line-search max_step must be at least the initial step");
  }
}

Matrix prox_group_rows(const Matrix& nu, double threshold) {
  if (!(threshold >= 0.0)) {
    throw std::invalid_argument("prox threshold must be nonnegative");
  }
  Matrix out(nu.rows(), nu.cols());
  for (Eigen::Index j = 0; j < nu.rows(); ++j) {
    const double norm = nu.row(j).norm();
    if (norm <= threshold) {
      out.row(j).setZero();
    } else {
      out.row(j) = (1.0 - threshold / norm) * nu.row(j);
    }
  }
  return out;
}

double group_norm(const Matrix& beta) {
  double total = 0.0;
  for (Eigen::Index j = 0; j < beta.rows(); ++j) {
    total += beta.row(j).norm();
  }
  return total;
}

namespace {

double ridge_norm(const std::vector<Matrix>& gamma) {
  double total = 0.0;
  for (const auto& g : gamma) {
    total += g.squaredNorm();
  }
  return total;
}

}  // namespace

double penalized_objective(const Coefficients& coeffs, const DatasetCollection& collection,
                           double lambda, double rho) {
  return negative_log_likelihood(coeffs, collection) + lambda * group_norm(coeffs.beta) +
         0.5 * rho * ridge_norm(coeffs.gamma);
}

BlockwiseSolver::BlockwiseSolver(const DatasetCollection& collection, SolverConfig config)
    : data_(collection), config_(std::move(config)) {
  config_.validate();
  require_valid(data_);
  if (data_.total_rows() == 0) {
    throw DataError("cannot fit a model to zero observations");
  }
  if (config_.init) {
    coeffs_ = *config_.init;
    config_.init.reset();
  } else {
    coeffs_ = Coefficients::zeros_for(data_);
  }
  check_dimensions(coeffs_, data_);
  if (!coeffs_.all_finite()) {
    throw DataError("initial coefficients contain non-finite values");
  }
  inv_n_ = 1.0 / static_cast<double>(data_.total_rows());

  const std::size_t K = data_.num_datasets();
  xb_.resize(K);
  zg_.resize(K);
  residual_.resize(K);
  loss_k_.assign(K, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    const auto& d = data_.dataset(k);
    xb_[k] = multiply_active_rows(d.X, coeffs_.beta);
    if (coeffs_.has_batch()) {
      zg_[k] = d.Z * coeffs_.gamma[k];
    } else {
      zg_[k] = Matrix::Zero(d.X.rows(), coeffs_.beta.cols());
    }
    refresh_dataset(k);
  }
  loss_ = 0.0;
  for (double v : loss_k_) {
    loss_ += v;
  }

  // Doubled before the first search, which therefore starts at initial_step.
  const double first = 0.5 * config_.line_search.initial_step;
  step_beta_ = first;
  step_gamma_.assign(K, first);
  step_alpha_ = first;
}

double BlockwiseSolver::dataset_loss(std::size_t k, const Matrix& eta, Matrix* residual) const {
  return inv_n_ * detail::dataset_nll(eta, data_, k, residual);
}

void BlockwiseSolver::refresh_dataset(std::size_t k) {
  Matrix eta = xb_[k] + zg_[k];
  eta.rowwise() += coeffs_.alpha.transpose();
  loss_k_[k] = dataset_loss(k, eta, &residual_[k]);
}

double BlockwiseSolver::objective() const {
  return loss_ + config_.lambda * group_norm(coeffs_.beta) + 0.5 * config_.rho * ridge_norm(coeffs_.gamma);
}

Matrix BlockwiseSolver::beta_gradient() const {
  Matrix g = Matrix::Zero(coeffs_.beta.rows(), coeffs_.beta.cols());
  for (std::size_t k = 0; k < data_.num_datasets(); ++k) {
    g.noalias() += data_.dataset(k).X.transpose() * residual_[k];
  }
  return inv_n_ * g;
}

Gradients BlockwiseSolver::current_gradients() const {
  Gradients g;
  g.beta = beta_gradient();
  g.alpha = Vector::Zero(coeffs_.alpha.size());
  for (std::size_t k = 0; k < data_.num_datasets(); ++k) {
    g.alpha += residual_[k].colwise().sum().transpose();
    if (coeffs_.has_batch()) {
      g.gamma.push_back(inv_n_ * (data_.dataset(k).Z.transpose() * residual_[k]));
    }
  }
  g.alpha *= inv_n_;
  return g;
}

double BlockwiseSolver::max_row_norm(const Matrix& g) const {
  double m = 0.0;
  for (Eigen::Index j = 0; j < g.rows(); ++j) {
    m = std::max(m, g.row(j).norm());
  }
  return m;
}

Matrix BlockwiseSolver::beta_candidate(double step) const {
  const Matrix nu = coeffs_.beta - step * beta_gradient();
  return prox_group_rows(nu, step * config_.lambda);
}

Matrix BlockwiseSolver::gamma_candidate(std::size_t k, double step) const {
  const Matrix grad = inv_n_ * (data_.dataset(k).Z.transpose() * residual_[k]);
  return (coeffs_.gamma.at(k) - step * grad) / (1.0 + step * config_.rho);
}

Vector BlockwiseSolver::alpha_candidate(double step) const {
  Vector grad = Vector::Zero(coeffs_.alpha.size());
  for (std::size_t k = 0; k < data_.num_datasets(); ++k) {
    grad += residual_[k].colwise().sum().transpose();
  }
  return coeffs_.alpha - step * (inv_n_ * grad);
}

namespace {

// Steps tried by one backtracking search: the warm step, its shrinks, then the Lipschitz ceiling.
std::vector<double> step_schedule(const LineSearchOptions& ls, double warm, double ceiling) {
  std::vector<double> steps;
  double s = std::min(ls.max_step, warm);
  for (int b = 0; b <= ls.max_backtracks; ++b) {
    steps.push_back(s);
    s *= ls.shrink;
  }
  if (ceiling > 0.0 && std::isfinite(ceiling) && ceiling < steps.front()) {
    steps.push_back(ceiling);
  }
  return steps;
}

}  // namespace

std::optional<double> BlockwiseSolver::update_beta() {
  const std::size_t K = data_.num_datasets();
  const Matrix grad = beta_gradient();

  double frob = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    frob += data_.dataset(k).X.squaredNorm();
  }
  const double ceiling =
      frob > 0.0 ? static_cast<double>(data_.total_rows()) /
                       (std::sqrt(static_cast<double>(coeffs_.beta.cols())) * frob)
                 : 0.0;

  std::vector<Matrix> trial_xb(K);
  std::vector<Matrix> trial_res(K);
  std::vector<double> trial_loss(K);
  const double slack = kMajorizationSlack * (1.0 + std::abs(loss_));

  for (double s : step_schedule(config_.line_search, 2.0 * step_beta_, ceiling)) {
    const Matrix cand = prox_group_rows(coeffs_.beta - s * grad, s * config_.lambda);
    const Matrix delta = cand - coeffs_.beta;
    const double bound = loss_ + (grad.array() * delta.array()).sum() + delta.squaredNorm() / (2.0 * s);
    double trial = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      trial_xb[k] = multiply_active_rows(data_.dataset(k).X, cand);
      Matrix eta = trial_xb[k] + zg_[k];
      eta.rowwise() += coeffs_.alpha.transpose();
      trial_loss[k] = dataset_loss(k, eta, &trial_res[k]);
      trial += trial_loss[k];
    }
    if (trial <= bound + slack) {
      coeffs_.beta = cand;
      xb_.swap(trial_xb);
      residual_.swap(trial_res);
      loss_k_ = trial_loss;
      loss_ = trial;
      step_beta_ = s;
      return s;
    }
  }
  return std::nullopt;
}

std::optional<double> BlockwiseSolver::update_gamma(std::size_t k) {
  const auto& d = data_.dataset(k);
  const Matrix grad = inv_n_ * (d.Z.transpose() * residual_[k]);
  const double ceiling = 0.0;
  const double slack = kMajorizationSlack * (1.0 + std::abs(loss_));
  Matrix trial_res;
  for (double s : step_schedule(config_.line_search, 2.0 * step_gamma_[k], ceiling)) {
    const Matrix cand = (coeffs_.gamma[k] - s * grad) / (1.0 + s * config_.rho);
    const Matrix delta = cand - coeffs_.gamma[k];
    const double bound =
        loss_k_[k] + (grad.array() * delta.array()).sum() + delta.squaredNorm() / (2.0 * s);
    Matrix zg = d.Z * cand;
    Matrix eta = xb_[k] + zg;
    eta.rowwise() += coeffs_.alpha.transpose();
    const double trial = dataset_loss(k, eta, &trial_res);
    if (trial <= bound + slack) {
      coeffs_.gamma[k] = cand;
      zg_[k] = std::move(zg);
      residual_[k].swap(trial_res);
      loss_ += trial - loss_k_[k];
      loss_k_[k] = trial;
      step_gamma_[k] = s;
      return s;
    }
  }
  return std::nullopt;
}

std::optional<double> BlockwiseSolver::update_alpha() {
  const std::size_t K = data_.num_datasets();
  Vector grad = Vector::Zero(coeffs_.alpha.size());
  for (std::size_t k = 0; k < K; ++k) {
    grad += residual_[k].colwise().sum().transpose();
  }
  grad *= inv_n_;
  std::vector<Matrix> trial_res(K);
  std::vector<double> trial_loss(K);
  const double slack = kMajorizationSlack * (1.0 + std::abs(loss_));
  for (double s : step_schedule(config_.line_search, 2.0 * step_alpha_, 0.0)) {
    const Vector cand = coeffs_.alpha - s * grad;
    const Vector delta = cand - coeffs_.alpha;
    const double bound = loss_ + grad.dot(delta) + delta.squaredNorm() / (2.0 * s);
    double trial = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      Matrix eta = xb_[k] + zg_[k];
      eta.rowwise() += cand.transpose();
      trial_loss[k] = dataset_loss(k, eta, &trial_res[k]);
      trial += trial_loss[k];
    }
    if (trial <= bound + slack) {
      coeffs_.alpha = cand;
      residual_.swap(trial_res);
      loss_k_ = trial_loss;
      loss_ = trial;
      step_alpha_ = s;
      return s;
    }
  }
  return std::nullopt;
}

bool BlockwiseSolver::iterate() {
  if (coeffs_.beta.rows() > 0 && !config_.freeze_beta) {
    if (!update_beta()) {
      return false;
    }
  }
  if (coeffs_.has_batch() && data_.num_covariates() > 0) {
    for (std::size_t k = 0; k < data_.num_datasets(); ++k) {
      if (!update_gamma(k)) {
        return false;
      }
    }
  }
  return update_alpha().has_value();
}

namespace {

std::string iterate_dump(int iteration, const Coefficients& c, double loss) {
  std::ostringstream os;
  os << "non-finite objective at iteration " << iteration << " (loss " << loss << ", |alpha| "
     << c.alpha.norm() << ", |beta|_F " << c.beta.norm();
  for (std::size_t k = 0; k < c.gamma.size(); ++k) {
    os << ", |gamma_" << k << "|_F " << c.gamma[k].norm();
  }
  os << ")";
  return os.str();
}

}  // namespace

FitResult BlockwiseSolver::run() {
  FitResult result;
  double prev = objective();
  if (!std::isfinite(prev)) {
    throw NumericalError(iterate_dump(0, coeffs_, loss_));
  }
  result.objective_trace.push_back(prev);
  if (config_.freeze_beta) {
    result.max_beta_gradient_norm = max_row_norm(beta_gradient());
  }

  for (int t = 1; t <= config_.max_iters; ++t) {
    const bool ok = iterate();
    const double current = objective();
    if (!std::isfinite(current)) {
      throw NumericalError(iterate_dump(t, coeffs_, loss_));
    }
    result.objective_trace.push_back(current);
    result.iterations = t;
    if (config_.freeze_beta) {
      result.max_beta_gradient_norm = std::max(result.max_beta_gradient_norm, max_row_norm(beta_gradient()));
    }
    if (!ok) {
      result.status = FitStatus::line_search_failed;
      result.message = "line search exhausted its backtracks at iteration " + std::to_string(t);
      break;
    }
    if (std::abs(prev - current) / (1.0 + std::abs(prev)) < config_.tol) {
      result.status = FitStatus::converged;
      result.converged = true;
      break;
    }
    prev = current;
  }
  if (result.status == FitStatus::max_iterations) {
    result.message = "reached max_iters = " + std::to_string(config_.max_iters);
  }

  result.coeffs = coeffs_;
  result.coeffs.center();
  result.active_rows = result.coeffs.active_rows();
  return result;
}

FitResult fit(const DatasetCollection& collection, const SolverConfig& config) {
  BlockwiseSolver solver(collection, config);
  return solver.run();
}

}  // namespace binmr
