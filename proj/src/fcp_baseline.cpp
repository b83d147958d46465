#include "ffcp/fcp_baseline.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <stdexcept>

namespace ffcp::fcp {

Interval estimate_band_ibp(const nn::MlpModel& model, const VectorXd& v_hat, double q) {
  if (!(q >= 0.0) || !std::isfinite(q)) throw std::invalid_argument("estimate_band_ibp: radius must be finite and >= 0");
  if (v_hat.size() != model.feature_dim()) throw std::invalid_argument("estimate_band_ibp: feature length mismatch");
  if (model.output_dim() != 1) throw std::invalid_argument("estimate_band_ibp: scalar head required");

  VectorXd lo = v_hat.array() - q;
  VectorXd hi = v_hat.array() + q;
  for (std::size_t l = model.split_index(); l < model.num_layers(); ++l) {
    const auto& layer = model.layers()[l];
    const MatrixXd w_pos = layer.weight.cwiseMax(0.0);
    const MatrixXd w_neg = layer.weight.cwiseMin(0.0);
    VectorXd new_lo = w_pos * lo + w_neg * hi + layer.bias;
    VectorXd new_hi = w_pos * hi + w_neg * lo + layer.bias;
    if (layer.activation == nn::Activation::relu) {
      new_lo = new_lo.cwiseMax(0.0);
      new_hi = new_hi.cwiseMax(0.0);
    }
    lo = std::move(new_lo);
    hi = std::move(new_hi);
  }
  return {lo[0], hi[0]};
}

namespace {

// Maximizes sign * g over the ball |v - v_hat| <= q with normalized projected
// gradient steps. Returns the best value of sign * g seen.
double climb(const nn::MlpModel& model, const VectorXd& v_hat, double q, VectorXd v, double best,
             double sign, int steps) {
  double step = 0.25 * q;
  for (int t = 0; t < steps && step > 1e-6 * q; ++t) {
    const VectorXd grad = sign * nn::head_jacobian_at_feature(model, v).rows.row(0).transpose();
    const double gn = grad.norm();
    if (gn == 0.0) break;
    VectorXd cand = v + (step / gn) * grad;
    const VectorXd off = cand - v_hat;
    const double r = off.norm();
    if (r > q) cand = v_hat + (q / r) * off;
    const double val = sign * nn::head_forward(model, cand)[0];
    if (val > best) {
      best = val;
      v = std::move(cand);
    } else {
      step *= 0.5;
    }
  }
  return best;
}

}  // namespace

Interval estimate_band_sampling(const nn::MlpModel& model, const VectorXd& v_hat, double q,
                                const SamplingConfig& config) {
  if (!(q >= 0.0) || !std::isfinite(q)) throw std::invalid_argument("estimate_band_sampling: radius must be finite and >= 0");
  if (config.n_samples < 1) throw std::invalid_argument("estimate_band_sampling: n_samples must be >= 1");
  if (model.output_dim() != 1) throw std::invalid_argument("estimate_band_sampling: scalar head required");
  const Eigen::Index d = v_hat.size();
  if (d != model.feature_dim()) throw std::invalid_argument("estimate_band_sampling: feature length mismatch");

  const std::size_t extra = config.include_gradient_extremes ? 3 : 1;
  MatrixXd points(Eigen::Index(config.n_samples + extra), d);
  points.row(0) = v_hat.transpose();
  if (config.include_gradient_extremes) {
    const VectorXd grad = nn::head_jacobian_at_feature(model, v_hat).rows.row(0).transpose();
    const double gn = grad.norm();
    const VectorXd dir = gn > 0.0 ? VectorXd(grad / gn) : VectorXd::Zero(d);
    points.row(1) = (v_hat + q * dir).transpose();
    points.row(2) = (v_hat - q * dir).transpose();
  }

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  VectorXd z(d);
  for (std::size_t s = 0; s < config.n_samples; ++s) {
    for (Eigen::Index k = 0; k < d; ++k) z[k] = normal(rng);
    double radius = q;
    if (s % 2 == 1) radius = q * std::pow(unif(rng), 1.0 / double(d));
    const double zn = z.norm();
    const Eigen::Index row = Eigen::Index(extra + s);
    if (zn > 0.0) {
      points.row(row) = (v_hat + (radius / zn) * z).transpose();
    } else {
      points.row(row) = v_hat.transpose();
    }
  }

  const MatrixXd out = nn::head_predict(model, points);
  Eigen::Index arg_lo = 0, arg_hi = 0;
  Interval band{out.col(0).minCoeff(&arg_lo), out.col(0).maxCoeff(&arg_hi)};
  if (config.ascent_steps > 0 && q > 0.0) {
    band.upper = climb(model, v_hat, q, points.row(arg_hi).transpose(), band.upper, +1.0, config.ascent_steps);
    band.lower = -climb(model, v_hat, q, points.row(arg_lo).transpose(), -band.lower, -1.0, config.ascent_steps);
  }
  return band;
}

PipelineResult fcp_pipeline(const nn::MlpModel& model, const MatrixXd& x_cal, const MatrixXd& y_cal,
                            const MatrixXd& x_test, const PipelineConfig& config) {
  if (x_cal.rows() == 0) throw std::invalid_argument("fcp_pipeline: empty calibration fold");
  PipelineResult res;
  const auto t0 = std::chrono::steady_clock::now();

  res.scores = scores::fcp_scores(model, x_cal, y_cal, config.search, &res.unconverged);
  const auto col = res.scores.scores.col(0);
  res.quantile = calib::conformal_quantile(std::span<const double>(col.data(), std::size_t(col.size())), config.alpha);

  const MatrixXd v_test = nn::features(model, x_test);
  res.estimates.reserve(std::size_t(x_test.rows()));
  res.sampled_bands.reserve(std::size_t(x_test.rows()));
  res.sound_bands.reserve(std::size_t(x_test.rows()));
  for (Eigen::Index i = 0; i < x_test.rows(); ++i) {
    const VectorXd v_hat = v_test.row(i).transpose();
    BandEstimate est;
    est.radius = res.quantile.value;
    est.n_samples = config.sampling.n_samples;
    if (res.quantile.finite()) {
      SamplingConfig sc = config.sampling;
      sc.seed = config.sampling.seed + std::uint64_t(i);
      est.sound = estimate_band_ibp(model, v_hat, res.quantile.value);
      est.sampled = estimate_band_sampling(model, v_hat, res.quantile.value, sc);
      const double tol = 1e-9 * (1.0 + std::abs(est.sound.lower) + std::abs(est.sound.upper));
      if (!est.sound.contains(est.sampled, tol)) ++res.containment_violations;
    } else {
      est.sound = est.sampled = {-calib::kInfinity, calib::kInfinity};
    }
    res.sampled_bands.push_back(bands::band_interval(est.sampled.lower, est.sampled.upper, "fcp"));
    res.sound_bands.push_back(bands::band_interval(est.sound.lower, est.sound.upper, "fcp-ibp"));
    res.estimates.push_back(est);
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace ffcp::fcp
