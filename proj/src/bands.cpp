#include "ffcp/bands.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ffcp::bands {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// yhat +/- scale * q, with an infinite quantile giving (-inf, +inf) even
// where scale is zero.
PredictionBand symmetric(const VectorXd& yhat, const VectorXd& scale, double q, const char* method) {
  PredictionBand b;
  b.method = method;
  b.center = yhat;
  b.lower.resize(yhat.size());
  b.upper.resize(yhat.size());
  for (Eigen::Index j = 0; j < yhat.size(); ++j) {
    if (q == kInf) {
      b.lower[j] = -kInf;
      b.upper[j] = kInf;
    } else {
      const double half = scale[j] * q;
      b.lower[j] = yhat[j] - half;
      b.upper[j] = yhat[j] + half;
    }
  }
  return b;
}

}  // namespace

PredictionBand band_vanilla(const VectorXd& yhat, double q) {
  return symmetric(yhat, VectorXd::Ones(yhat.size()), q, "vanilla");
}

PredictionBand band_ffcp(const VectorXd& yhat, const VectorXd& grad_norms, double q) {
  if (grad_norms.size() != yhat.size()) throw std::invalid_argument("band_ffcp: shape mismatch");
  if ((grad_norms.array() < 0.0).any()) throw std::invalid_argument("band_ffcp: negative gradient norm");
  return symmetric(yhat, grad_norms, q, "ffcp");
}

PredictionBand band_fflcp(const VectorXd& yhat, const VectorXd& grad_norms, double q_local) {
  PredictionBand b = band_ffcp(yhat, grad_norms, q_local);
  b.method = "fflcp";
  return b;
}

PredictionBand band_ffcqr(double lo, double hi, double gnorm_lo, double gnorm_hi, double q) {
  PredictionBand b;
  b.method = "ffcqr";
  b.lower.resize(1);
  b.upper.resize(1);
  b.center.resize(1);
  b.center[0] = 0.5 * (lo + hi);
  if (q == kInf) {
    b.lower[0] = -kInf;
    b.upper[0] = kInf;
  } else {
    b.lower[0] = lo - gnorm_lo * q;
    b.upper[0] = hi + gnorm_hi * q;
  }
  return b;
}

PredictionBand band_interval(double lower, double upper, const std::string& method) {
  PredictionBand b;
  b.method = method;
  b.lower = VectorXd::Constant(1, lower);
  b.upper = VectorXd::Constant(1, upper);
  b.center = VectorXd::Constant(1, 0.5 * (lower + upper));
  return b;
}

std::vector<bool> contains(const PredictionBand& band, const VectorXd& y) {
  if (y.size() != band.dim()) throw std::invalid_argument("contains: shape mismatch");
  std::vector<bool> out(std::size_t(y.size()));
  for (Eigen::Index j = 0; j < y.size(); ++j) out[std::size_t(j)] = band.lower[j] <= y[j] && y[j] <= band.upper[j];
  return out;
}

bool contains_all(const PredictionBand& band, const VectorXd& y) {
  for (bool c : contains(band, y)) {
    if (!c) return false;
  }
  return true;
}

}  // namespace ffcp::bands
