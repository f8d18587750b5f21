#ifndef BINMR_DETAIL_ROW_KERNELS_HPP
#define BINMR_DETAIL_ROW_KERNELS_HPP

#include <cfloat>
#include <cmath>
#include <cstddef>

#include "binmr/label_binning.hpp"
#include "binmr/types.hpp"

namespace binmr::detail {

/// Stabilized softmax of one row of linear predictors into `out`; returns log of the normalizer.
template <typename In, typename Out>
double softmax_row(const In& eta, Out&& out) {
  const Eigen::Index c = eta.size();
  double m = eta(0);
  for (Eigen::Index l = 1; l < c; ++l) {
    m = std::max(m, eta(l));
  }
  double sum = 0.0;
  for (Eigen::Index l = 0; l < c; ++l) {
    const double e = std::exp(eta(l) - m);
    out(l) = e;
    sum += e;
  }
  for (Eigen::Index l = 0; l < c; ++l) {
    out(l) /= sum;
  }
  return m + std::log(sum);
}

/// Sum of unconditional probabilities over a bin (coarse-label probability).
template <typename Row>
double bin_mass(const Row& probs, const Bin& bin) {
  double q = 0.0;
  for (std::size_t l : bin) {
    q += probs(static_cast<Eigen::Index>(l));
  }
  return q;
}

/// log sum_{l in bin} exp(eta_l), shifted by the bin maximum.
template <typename Row>
double bin_log_sum_exp(const Row& eta, const Bin& bin) {
  double m = eta(static_cast<Eigen::Index>(bin.front()));
  for (std::size_t l : bin) {
    m = std::max(m, eta(static_cast<Eigen::Index>(l)));
  }
  double sum = 0.0;
  for (std::size_t l : bin) {
    sum += std::exp(eta(static_cast<Eigen::Index>(l)) - m);
  }
  return m + std::log(sum);
}

/// Softmax restricted to a bin, written into `out` (zero outside). Singleton bins give exact indicators.
template <typename In, typename Out>
void conditional_row(const In& eta, const Bin& bin, Out&& out) {
  out.setZero();
  if (bin.size() == 1) {
    out(static_cast<Eigen::Index>(bin.front())) = 1.0;
    return;
  }
  double m = eta(static_cast<Eigen::Index>(bin.front()));
  for (std::size_t l : bin) {
    m = std::max(m, eta(static_cast<Eigen::Index>(l)));
  }
  double sum = 0.0;
  for (std::size_t l : bin) {
    const double e = std::exp(eta(static_cast<Eigen::Index>(l)) - m);
    out(static_cast<Eigen::Index>(l)) = e;
    sum += e;
  }
  for (std::size_t l : bin) {
    out(static_cast<Eigen::Index>(l)) /= sum;
  }
}

/**
 * Negative log coarse-label probability of one row given its unconditional probabilities.
 *
 * Uses the bin sum of `probs` whenever that sum is a normal double; otherwise falls back
 * to the log domain so extreme linear predictors still give a finite value.
 */
template <typename EtaRow, typename ProbRow>
double row_nll(const EtaRow& eta, const ProbRow& probs, double log_normalizer, const Bin& bin) {
  const double q = bin_mass(probs, bin);
  if (q >= DBL_MIN) {
    return -std::log(q);
  }
  return log_normalizer - bin_log_sum_exp(eta, bin);
}

/**
 * Sum over rows of the negative log coarse-label probability for one dataset.
 * When `residual` is non-null it receives P - C (unconditional minus conditional).
 */
inline double dataset_nll(const Matrix& eta, const DatasetCollection& collection, std::size_t k,
                          Matrix* residual) {
  const Eigen::Index n = eta.rows();
  const Eigen::Index c = eta.cols();
  Vector probs(c);
  Vector cond(c);
  double total = 0.0;
  if (residual != nullptr) {
    residual->resize(n, c);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = eta.row(i);
    const Bin& bin = collection.row_bin(k, static_cast<std::size_t>(i));
    const double lse = softmax_row(row, probs);
    total += row_nll(row, probs, lse, bin);
    if (residual != nullptr) {
      conditional_row(row, bin, cond);
      residual->row(i) = (probs - cond).transpose();
    }
  }
  return total;
}

}  // namespace binmr::detail

#endif  // BINMR_DETAIL_ROW_KERNELS_HPP
