#pragma once

// Regularized adaptive prediction sets for classification, with an optional
// head-gradient term (weight delta). delta = 0 is plain RAPS.

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace ffcp::raps {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct RapsConfig {
  double alpha = 0.1;
  double lambda = 0.01;
  int k_reg = 1;
  double delta = 0.0;
  /// Take tau_hat as the ceil((1-alpha)(n+1))-th *largest* calibration score
  /// instead of the smallest. Kept only to compare against that reading;
  /// it breaks coverage.
  bool largest_rank = false;

  void validate() const;
};

struct SortedProbs {
  VectorXd probs;                  // descending
  std::vector<int> permutation;    // permutation[j] = class at rank j
};

/// Max-subtracted softmax, then a stable descending sort (ties keep class order).
SortedProbs softmax_sorted(const VectorXd& logits);

struct PredictionSet {
  std::vector<int> classes;  // descending probability
  double tau_hat = 0.0;

  std::size_t size() const { return classes.size(); }
};

/// Generalized inverse-quantile score of `label`:
/// sum of sorted probabilities up to the label's rank + delta * grad_norm
/// + lambda * (rank - k_reg)^+, with 1-based rank.
double raps_score(const VectorXd& logits, int label, double grad_norm, const RapsConfig& config);

/// tau_hat = the conformal (1 - alpha) quantile of the calibration scores;
/// +inf when the rank exceeds n. Rows of cal_logits are samples.
double raps_calibrate(const MatrixXd& cal_logits, const std::vector<int>& cal_labels,
                      const VectorXd& grad_norms, const RapsConfig& config);

/// L = |{ j : cumsum_j + delta * grad_norm + lambda * (j - k_reg)^+ <= tau_hat }| + 1,
/// clamped to K.
PredictionSet raps_predict(const VectorXd& logits, double grad_norm, double tau_hat,
                           const RapsConfig& config);

}  // namespace ffcp::raps
