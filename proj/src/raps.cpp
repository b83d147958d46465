#include "ffcp/raps.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ffcp/calib.hpp"

namespace ffcp::raps {

void RapsConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("RapsConfig: alpha must lie in (0, 1)");
  if (lambda < 0.0) throw std::invalid_argument("RapsConfig: lambda must be >= 0");
  if (k_reg < 0) throw std::invalid_argument("RapsConfig: k_reg must be >= 0");
  if (delta < 0.0) throw std::invalid_argument("RapsConfig: delta must be >= 0");
}

SortedProbs softmax_sorted(const VectorXd& logits) {
  if (logits.size() == 0) throw std::invalid_argument("softmax_sorted: empty logits");
  if (!logits.allFinite()) throw std::invalid_argument("softmax_sorted: non-finite logits");
  const VectorXd e = (logits.array() - logits.maxCoeff()).exp();
  const VectorXd p = e / e.sum();
  SortedProbs out;
  out.permutation.resize(std::size_t(p.size()));
  std::iota(out.permutation.begin(), out.permutation.end(), 0);
  std::stable_sort(out.permutation.begin(), out.permutation.end(),
                   [&](int a, int b) { return p[a] > p[b]; });
  out.probs.resize(p.size());
  for (Eigen::Index j = 0; j < p.size(); ++j) out.probs[j] = p[out.permutation[std::size_t(j)]];
  return out;
}

namespace {

double penalty(const RapsConfig& c, int rank) {
  return c.lambda * double(std::max(0, rank - c.k_reg));
}

}  // namespace

double raps_score(const VectorXd& logits, int label, double grad_norm, const RapsConfig& config) {
  if (label < 0 || label >= logits.size()) throw std::invalid_argument("raps_score: label out of range");
  if (grad_norm < 0.0) throw std::invalid_argument("raps_score: negative gradient norm");
  const SortedProbs sp = softmax_sorted(logits);
  double cum = 0.0;
  int rank = 0;
  for (std::size_t j = 0; j < sp.permutation.size(); ++j) {
    cum += sp.probs[Eigen::Index(j)];
    if (sp.permutation[j] == label) {
      rank = int(j) + 1;
      break;
    }
  }
  return cum + grad_norm * config.delta + penalty(config, rank);
}

double raps_calibrate(const MatrixXd& cal_logits, const std::vector<int>& cal_labels,
                      const VectorXd& grad_norms, const RapsConfig& config) {
  config.validate();
  const auto n = std::size_t(cal_logits.rows());
  if (cal_labels.size() != n || std::size_t(grad_norms.size()) != n) {
    throw std::invalid_argument("raps_calibrate: size mismatch");
  }
  std::vector<double> e(n);
  for (std::size_t i = 0; i < n; ++i) {
    e[i] = raps_score(cal_logits.row(Eigen::Index(i)).transpose(), cal_labels[i],
                      grad_norms[Eigen::Index(i)], config);
  }
  if (!config.largest_rank) return calib::conformal_quantile(e, config.alpha).value;
  const std::size_t k = calib::conformal_rank(n, config.alpha);
  if (k > n) return calib::kInfinity;
  std::sort(e.begin(), e.end(), std::greater<>());
  return e[k - 1];
}

PredictionSet raps_predict(const VectorXd& logits, double grad_norm, double tau_hat,
                           const RapsConfig& config) {
  const SortedProbs sp = softmax_sorted(logits);
  const auto k = std::size_t(logits.size());
  std::size_t qualifying = 0;
  double cum = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    cum += sp.probs[Eigen::Index(j)];
    if (cum + grad_norm * config.delta + penalty(config, int(j) + 1) <= tau_hat) ++qualifying;
  }
  const std::size_t size = std::min(k, qualifying + 1);
  PredictionSet out;
  out.tau_hat = tau_hat;
  out.classes.assign(sp.permutation.begin(), sp.permutation.begin() + std::ptrdiff_t(size));
  return out;
}

}  // namespace ffcp::raps
