#pragma once

// End-to-end method runs over a train / calibration / test split. Every run
// times exactly the phase from the first calibration score to the last
// returned test band; model training and data preparation sit outside it.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ffcp/bands.hpp"
#include "ffcp/bench.hpp"
#include "ffcp/calib.hpp"
#include "ffcp/data.hpp"
#include "ffcp/fcp_baseline.hpp"
#include "ffcp/nnkit.hpp"
#include "ffcp/raps.hpp"
#include "ffcp/scores.hpp"

namespace ffcp::experiment {

using Eigen::MatrixXd;

struct Folds {
  MatrixXd x_train, y_train;
  MatrixXd x_cal, y_cal;
  MatrixXd x_test, y_test;
};

/// Splits, then standardizes with train-fold statistics.
Folds make_folds(const data::Dataset& d, std::array<double, 3> ratios, std::uint64_t seed,
                 bool scale_targets = true, data::Standardizer* transform = nullptr);

struct ModelSpec {
  std::vector<int> hidden = {64, 64, 64, 64};
  std::size_t split_index = 2;
  nn::TrainConfig train;
};

/// Builds and trains a model for the given folds. `kind` selects the output
/// layer: regression (d_y outputs), quantile_pair (2 outputs, pinball loss)
/// or logits (n_classes outputs, cross-entropy).
nn::MlpModel fit_model(const Folds& folds, const ModelSpec& spec, nn::OutputKind kind,
                       int n_classes = 0);

struct LocalizerConfig {
  calib::LocalizerSpace space = calib::LocalizerSpace::feature;
  std::optional<double> bandwidth;  // median heuristic when empty; +inf gives uniform weights
};

struct MethodRun {
  std::string method;
  std::vector<bands::PredictionBand> bands;
  std::vector<bool> covered;
  double coverage = 0.0;
  bench::LengthStats length;
  double seconds = 0.0;
  calib::ConformalQuantile quantile;   // global quantile (unused for localized runs)
  scores::ScoreSet cal_scores;
  std::size_t floor_activations = 0;
  // FCP only.
  std::optional<double> sound_length;
  std::size_t unconverged = 0;
  std::size_t containment_violations = 0;
};

MethodRun run_vanilla(const nn::MlpModel& model, const Folds& f, double alpha);
MethodRun run_ffcp(const nn::MlpModel& model, const Folds& f, double alpha);
MethodRun run_cqr(const nn::MlpModel& qmodel, const Folds& f, double alpha);
MethodRun run_ffcqr(const nn::MlpModel& qmodel, const Folds& f, double alpha);
MethodRun run_lcp(const nn::MlpModel& model, const Folds& f, double alpha, const LocalizerConfig& loc = {});
MethodRun run_fflcp(const nn::MlpModel& model, const Folds& f, double alpha, const LocalizerConfig& loc = {});
MethodRun run_fcp(const nn::MlpModel& model, const Folds& f, const fcp::PipelineConfig& config);

struct ClassificationRun {
  std::string method;
  std::vector<raps::PredictionSet> sets;
  double coverage = 0.0;
  double mean_set_size = 0.0;
  double tau_hat = 0.0;
  double seconds = 0.0;
};

enum class ClassGradient { top_logit, frobenius };

/// RAPS when config.delta == 0, the gradient-augmented variant otherwise.
ClassificationRun run_raps(const nn::MlpModel& model, const Folds& f, const raps::RapsConfig& config,
                           ClassGradient gradient = ClassGradient::top_logit);

/// Head-gradient norm used by the classification score: the top-1 logit's
/// Jacobian row, or the Frobenius norm of the whole head Jacobian.
Eigen::VectorXd class_gradient_norms(const nn::MlpModel& model, const MatrixXd& x, ClassGradient g);

/// Converts a run into a report row (group coverage is computed for scalar targets).
bench::BenchReport to_report(const MethodRun& run, const Folds& f, const std::string& dataset,
                             std::uint64_t seed, int split_index);

/// Classification row: mean_length and set_size hold the mean set size,
/// group_coverage_min the smallest per-class coverage.
bench::BenchReport to_report(const ClassificationRun& run, const Folds& f, const std::string& dataset,
                             std::uint64_t seed, int split_index);

}  // namespace ffcp::experiment
