#pragma once

// Prediction bands for the regression methods. Infinite quantiles produce
// explicit -inf / +inf endpoints.

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ffcp::bands {

using Eigen::VectorXd;

struct PredictionBand {
  VectorXd lower;
  VectorXd upper;
  VectorXd center;
  std::string method;

  Eigen::Index dim() const { return lower.size(); }
  bool finite() const { return lower.allFinite() && upper.allFinite(); }
};

PredictionBand band_vanilla(const VectorXd& yhat, double q);
PredictionBand band_ffcp(const VectorXd& yhat, const VectorXd& grad_norms, double q);
PredictionBand band_ffcqr(double lo, double hi, double gnorm_lo, double gnorm_hi, double q);
/// Same shape as band_ffcp; q is the per-test-point localized quantile.
PredictionBand band_fflcp(const VectorXd& yhat, const VectorXd& grad_norms, double q_local);
PredictionBand band_interval(double lower, double upper, const std::string& method);

/// Closed-interval membership per coordinate.
std::vector<bool> contains(const PredictionBand& band, const VectorXd& y);
/// Conjunction over all coordinates.
bool contains_all(const PredictionBand& band, const VectorXd& y);

}  // namespace ffcp::bands
