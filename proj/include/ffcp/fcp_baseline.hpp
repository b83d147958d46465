#pragma once

// Feature-space conformal baseline. Calibration scores come from the
// feature-space search in scores.hpp; the calibrated feature ball
// { v : |v - v_hat| <= Q } is mapped to an output interval two ways:
//
//  * interval bound propagation over the enclosing box v_hat +/- Q, a sound
//    outer bound;
//  * sampling the ball and then climbing from the best samples with
//    projected gradient steps, an inner estimate whose extremes are
//    attained by g. This is the band whose length gets reported.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "ffcp/bands.hpp"
#include "ffcp/calib.hpp"
#include "ffcp/nnkit.hpp"
#include "ffcp/scores.hpp"

namespace ffcp::fcp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Interval {
  double lower = 0.0;
  double upper = 0.0;

  double length() const { return upper - lower; }
  bool contains(const Interval& inner, double tol = 0.0) const {
    return lower <= inner.lower + tol && inner.upper <= upper + tol;
  }
};

struct BandEstimate {
  Interval sound;    // interval bound propagation
  Interval sampled;  // ball sampling
  std::size_t n_samples = 0;
  double radius = 0.0;
};

/// Sound bound of g over the box v_hat +/- q (which encloses the L2 ball).
/// Scalar-output heads only; q must be finite and >= 0.
Interval estimate_band_ibp(const nn::MlpModel& model, const VectorXd& v_hat, double q);

struct SamplingConfig {
  std::size_t n_samples = 1024;
  std::uint64_t seed = 0;
  /// Also evaluate v_hat +/- q * grad / |grad|, the exact extremes for an
  /// affine head.
  bool include_gradient_extremes = true;
  /// Projected gradient ascent (and descent) steps on the ball, started
  /// from the best sampled point. 0 disables refinement.
  int ascent_steps = 20;
};

/// min / max of g over v_hat and sampled points: even draws on the radius-q
/// sphere, odd draws uniform in the ball. The draw sequence for n samples is
/// a prefix of the one for any larger n under the same seed. The extremes
/// are then pushed outward by projected gradient steps, accepting only
/// improvements, so every reported endpoint is a value g attains in the ball.
Interval estimate_band_sampling(const nn::MlpModel& model, const VectorXd& v_hat, double q,
                                const SamplingConfig& config = {});

struct PipelineConfig {
  double alpha = 0.1;
  scores::FcpSearchConfig search;
  SamplingConfig sampling;
};

struct PipelineResult {
  scores::ScoreSet scores;
  calib::ConformalQuantile quantile;
  std::vector<BandEstimate> estimates;      // one per test point
  std::vector<bands::PredictionBand> sampled_bands;
  std::vector<bands::PredictionBand> sound_bands;
  std::size_t unconverged = 0;              // calibration searches that stopped short
  std::size_t containment_violations = 0;   // sampled not inside sound
  double seconds = 0.0;                     // scores + quantile + band estimation
};

PipelineResult fcp_pipeline(const nn::MlpModel& model, const MatrixXd& x_cal, const MatrixXd& y_cal,
                            const MatrixXd& x_test, const PipelineConfig& config = {});

}  // namespace ffcp::fcp
