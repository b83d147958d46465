#pragma once

// Finite-sample conformal quantiles: the (1 - alpha) quantile of an empirical
// score distribution augmented with a point mass at +infinity, unweighted and
// localizer-weighted.

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace ffcp::calib {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct ConformalQuantile {
  double alpha = 0.1;
  std::size_t n = 0;
  std::size_t k = 0;  // rank ceil((1 - alpha)(n + 1)); value is +inf when k > n
  double value = kInfinity;

  bool finite() const { return value != kInfinity; }
};

/// Rank ceil((1 - alpha)(n + 1)), robust to the floating error in the product.
std::size_t conformal_rank(std::size_t n, double alpha);

/// Smallest t with #{s <= t} / (n + 1) >= 1 - alpha, or +inf.
/// Scores may be negative (CQR-style scores are signed); NaN is rejected.
ConformalQuantile conformal_quantile(std::span<const double> scores, double alpha);

struct LocalizerWeights {
  std::vector<double> raw;         // D_i >= 0
  std::vector<double> normalized;  // raw / sum(raw)
};

/// Validates and normalizes raw weights. Throws on negative, non-finite or
/// all-zero input.
LocalizerWeights make_localizer_weights(std::vector<double> raw);

/// Weighted quantile of sum_i w_i delta_{s_i} + w_inf delta_inf with the
/// calibration atoms scaled to total mass n / (n + 1) and the infinity atom
/// carrying 1 / (n + 1). Uniform weights reproduce conformal_quantile.
ConformalQuantile weighted_conformal_quantile(std::span<const double> scores,
                                              const LocalizerWeights& weights, double alpha);

/// Same as above for scores already sorted ascending with `order` mapping
/// sorted position -> original index. Used when one calibration set serves
/// many test points.
double weighted_quantile_sorted(std::span<const double> sorted_scores,
                                std::span<const std::size_t> order,
                                std::span<const double> normalized_weights, double alpha);

enum class LocalizerSpace { input, feature };

/// Gaussian kernel weights exp(-|q - x_i|^2 / (2 h^2)). Without a bandwidth
/// the median pairwise distance among calibration rows is used.
LocalizerWeights localizer_weights(const Eigen::VectorXd& query, const Eigen::MatrixXd& cal,
                                   std::optional<double> bandwidth = std::nullopt);

/// Median of all pairwise Euclidean distances between rows. For large sets
/// only the first `max_rows` rows are used.
double median_pairwise_distance(const Eigen::MatrixXd& points, std::size_t max_rows = 2000);

}  // namespace ffcp::calib
