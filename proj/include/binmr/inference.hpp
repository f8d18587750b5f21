#ifndef BINMR_INFERENCE_HPP
#define BINMR_INFERENCE_HPP

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "binmr/label_binning.hpp"
#include "binmr/likelihood.hpp"
#include "binmr/types.hpp"

namespace binmr {

enum class PredictionMode { fine, conditional, coarse };

const char* mode_name(PredictionMode mode);

/// Predicted labels with the probability rows behind each argmax.
struct PredictionSet {
  PredictionMode mode = PredictionMode::fine;
  std::vector<std::string> labels;
  std::vector<std::size_t> indices;  ///< positions in `support`
  Matrix probs;                      ///< n x |support|
  std::vector<std::string> support;
};

/// Labels of a test dataset that are carried by at least one observation.
class ObservedTestLabelSet {
 public:
  /// Collects the labels present in `y`, ordered as in the dataset's label set.
  /// Throws `LookupError` for labels outside the binning.
  static ObservedTestLabelSet from_data(const DatasetBinning& binning, const std::vector<std::string>& y);

  /// Explicit label list (deduplicated, reordered as in the binning).
  static ObservedTestLabelSet from_labels(const DatasetBinning& binning,
                                          const std::vector<std::string>& labels);

  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::vector<std::size_t>& label_indices() const noexcept { return indices_; }
  bool empty() const noexcept { return labels_.empty(); }

 private:
  ObservedTestLabelSet() = default;

  std::vector<std::string> labels_;
  std::vector<std::size_t> indices_;
};

/// argmax over all fine categories of softmax(alpha + x'beta); ties go to the lowest index.
PredictionSet predict_fine(const Coefficients& coeffs, const Matrix& X, const CategorySet& fine);

/// argmax within each observation's bin; fine-labeled observations keep their label.
PredictionSet predict_conditional(const Coefficients& coeffs, const Matrix& X,
                                  const std::vector<std::string>& y_observed, const BinningSpec& spec,
                                  std::size_t dataset_index);

/// argmax over the observed test labels of bin-summed probabilities renormalized over that set.
PredictionSet predict_coarse(const Coefficients& coeffs, const Matrix& X, const BinningSpec& spec,
                             std::size_t dataset_index, const ObservedTestLabelSet& observed);

/// Fraction of predictions that differ from `y_observed`.
double error_rate(const PredictionSet& predictions, const std::vector<std::string>& y_observed);

/// Probability floor applied to estimates inside the KL logarithm.
inline constexpr double kProbabilityClamp = 1e-12;

/// Mean over rows of sum_l p_l log(p_l / q_l) with 0 log 0 = 0 and q clamped at 1e-12.
double kl_divergence(const Matrix& true_probs, const Matrix& est_probs);

/// Mean over rows of sqrt(1 - sum_l sqrt(p_l q_l)).
double hellinger_distance(const Matrix& true_probs, const Matrix& est_probs);

struct RankedFeature {
  std::size_t feature;
  double score;  ///< |beta_jl| * sd_j
};

/// Per category, features ordered by |beta_jl| * sd_j descending (stable in feature index), top_n each.
std::vector<std::vector<RankedFeature>> standardized_coefficient_ranking(const Coefficients& coeffs,
                                                                         const Vector& feature_sds,
                                                                         std::size_t top_n);

/// Tab-delimited: id, mode, label, then one probability column per support label (17 digits).
void write_predictions(std::ostream& out, const PredictionSet& predictions,
                       const std::vector<std::string>& ids = {});

/// Percentages of each observed label falling into each predicted label.
struct ConfusionMatrix {
  std::vector<std::string> observed;
  std::vector<std::string> predicted;
  Matrix percent;  ///< rows observed, columns predicted, rows sum to 100
};

ConfusionMatrix confusion_matrix(const PredictionSet& predictions, const std::vector<std::string>& y_observed);

void write_confusion(std::ostream& out, const ConfusionMatrix& confusion);

}  // namespace binmr

#endif  // BINMR_INFERENCE_HPP
