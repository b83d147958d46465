#include "ffcp/calib.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace ffcp::calib {

namespace {

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("alpha must lie in (0, 1), got " + std::to_string(alpha));
  }
}

void check_scores(std::span<const double> scores) {
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) {
      throw std::invalid_argument("score " + std::to_string(i) + " is NaN");
    }
  }
}

}  // namespace

std::size_t conformal_rank(std::size_t n, double alpha) {
  check_alpha(alpha);
  const double target = (1.0 - alpha) * double(n + 1);
  // (1 - 0.1) * 11 evaluates to 9.900000000000002; snap values within a few
  // ulps of an integer before taking the ceiling.
  const double nearest = std::round(target);
  const double snapped = std::abs(target - nearest) <= 1e-9 * std::max(1.0, target) ? nearest : target;
  return static_cast<std::size_t>(std::ceil(snapped));
}

ConformalQuantile conformal_quantile(std::span<const double> scores, double alpha) {
  check_scores(scores);
  ConformalQuantile q;
  q.alpha = alpha;
  q.n = scores.size();
  q.k = conformal_rank(q.n, alpha);
  if (q.k == 0) q.k = 1;
  if (q.k > q.n) {
    q.value = kInfinity;
    return q;
  }
  std::vector<double> sorted(scores.begin(), scores.end());
  std::nth_element(sorted.begin(), sorted.begin() + std::ptrdiff_t(q.k - 1), sorted.end());
  q.value = sorted[q.k - 1];
  return q;
}

LocalizerWeights make_localizer_weights(std::vector<double> raw) {
  if (raw.empty()) throw std::invalid_argument("localizer weights: empty calibration set");
  double total = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!std::isfinite(raw[i]) || raw[i] < 0.0) {
      throw std::invalid_argument("localizer weights: weight " + std::to_string(i) +
                                  " is negative or non-finite");
    }
    total += raw[i];
  }
  if (!(total > 0.0)) throw std::invalid_argument("localizer weights: all raw weights are zero");
  LocalizerWeights w;
  w.normalized.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) w.normalized[i] = raw[i] / total;
  w.raw = std::move(raw);
  return w;
}

double weighted_quantile_sorted(std::span<const double> sorted_scores,
                                std::span<const std::size_t> order,
                                std::span<const double> normalized_weights, double alpha) {
  check_alpha(alpha);
  const std::size_t n = sorted_scores.size();
  if (n == 0) return kInfinity;
  const double scale = double(n) / double(n + 1);
  const double target = 1.0 - alpha;
  // Same snapping tolerance as conformal_rank, so uniform weights select
  // exactly the unweighted rank.
  double cum = 0.0;
  for (std::size_t pos = 0; pos < n; ++pos) {
    cum += normalized_weights[order[pos]];
    // Only the last atom of a tie block decides.
    if (pos + 1 < n && sorted_scores[pos + 1] == sorted_scores[pos]) continue;
    if (cum * scale >= target * (1.0 - 1e-9)) return sorted_scores[pos];
  }
  return kInfinity;
}

ConformalQuantile weighted_conformal_quantile(std::span<const double> scores,
                                              const LocalizerWeights& weights, double alpha) {
  check_alpha(alpha);
  check_scores(scores);
  if (weights.normalized.size() != scores.size()) {
    throw std::invalid_argument("weighted_conformal_quantile: weight/score size mismatch");
  }
  for (double w : weights.raw) {
    if (w < 0.0) throw std::invalid_argument("weighted_conformal_quantile: negative weight");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<double> sorted(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) sorted[i] = scores[order[i]];

  ConformalQuantile q;
  q.alpha = alpha;
  q.n = scores.size();
  q.k = conformal_rank(q.n, alpha);
  q.value = weighted_quantile_sorted(sorted, order, weights.normalized, alpha);
  return q;
}

double median_pairwise_distance(const Eigen::MatrixXd& points, std::size_t max_rows) {
  const auto n = std::min<Eigen::Index>(points.rows(), Eigen::Index(max_rows));
  if (n < 2) return 1.0;
  std::vector<double> d;
  d.reserve(std::size_t(n) * std::size_t(n - 1) / 2);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d.push_back((points.row(i) - points.row(j)).norm());
  auto mid = d.begin() + std::ptrdiff_t(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid > 0.0 ? *mid : 1.0;
}

LocalizerWeights localizer_weights(const Eigen::VectorXd& query, const Eigen::MatrixXd& cal,
                                   std::optional<double> bandwidth) {
  if (cal.rows() == 0) throw std::invalid_argument("localizer_weights: empty calibration set");
  if (cal.cols() != query.size()) throw std::invalid_argument("localizer_weights: dimension mismatch");
  const double h = bandwidth ? *bandwidth : median_pairwise_distance(cal);
  if (!(h > 0.0)) throw std::invalid_argument("localizer_weights: bandwidth must be > 0");
  std::vector<double> raw(std::size_t(cal.rows()));
  for (Eigen::Index i = 0; i < cal.rows(); ++i) {
    const double d2 = (cal.row(i).transpose() - query).squaredNorm();
    raw[std::size_t(i)] = std::exp(-d2 / (2.0 * h * h));
  }
  // Far queries can underflow every kernel value; fall back to the nearest point.
  double total = 0.0;
  for (double r : raw) total += r;
  if (total == 0.0) {
    Eigen::Index best = 0;
    (cal.rowwise() - query.transpose()).rowwise().squaredNorm().minCoeff(&best);
    raw[std::size_t(best)] = 1.0;
  }
  return make_localizer_weights(std::move(raw));
}

}  // namespace ffcp::calib
