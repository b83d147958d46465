#pragma once

// Non-conformity scores: absolute residual, gradient-normalized residual,
// quantile-regression scores and the feature-space search score.

#include <cstddef>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "ffcp/nnkit.hpp"

namespace ffcp::scores {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Method { vanilla, ffcp, cqr, ffcqr, fcp, lcp, fflcp };

std::string to_string(Method m);
Method method_from_string(const std::string& s);
/// True for methods whose scores are divided by a head gradient norm.
bool uses_gradient(Method m);

/// Floor applied to gradient norms before division.
inline constexpr double kGradFloor = 1e-12;

/// Counts how many divisions hit kGradFloor.
struct FloorCounter {
  std::size_t activations = 0;
};

struct ScoreSet {
  Method method = Method::vanilla;
  MatrixXd scores;                       // n x d_y (n x 1 for cqr-style)
  std::optional<MatrixXd> grad_norms;    // present iff the method normalizes by a gradient
  std::size_t split_index = 0;
  std::size_t floor_activations = 0;

  /// Throws if any score is non-finite, or negative for an absolute-residual method.
  void validate() const;
};

VectorXd score_vanilla(const VectorXd& y, const VectorXd& yhat);
VectorXd score_ffcp(const VectorXd& y, const VectorXd& yhat, const VectorXd& grad_norms,
                    FloorCounter* counter = nullptr);
double score_cqr(double y, double lo, double hi);
double score_ffcqr(double y, double lo, double hi, double gnorm_lo, double gnorm_hi,
                   FloorCounter* counter = nullptr);

struct FcpSearchConfig {
  int max_iters = 200;
  double step_size = 1.0;
  // Stop when |g(v) - y| <= residual_tol * (1 + |y|).
  double residual_tol = 1e-4;
  int restarts = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct FcpScore {
  double score = 0.0;
  VectorXd v_star;
  double residual = 0.0;  // |g(v_star) - y|
  int iterations = 0;
  bool converged = false;
};

/// Feature-space score inf { |v - v_hat| : g(v) = y } for a scalar head,
/// approximated by a damped minimum-norm Newton search for a root of
/// g(v) - y started at v_hat. If the search stops short of the tolerance
/// the remaining residual is charged at the local first-order rate, so the
/// returned score never under-reports the distance to the level set of the
/// local linearization.
FcpScore score_fcp(const nn::MlpModel& model, const VectorXd& x, double y,
                   const FcpSearchConfig& config = {});
FcpScore score_fcp_from_feature(const nn::MlpModel& model, const VectorXd& v_hat, double y,
                                const FcpSearchConfig& config = {});

// Batched score sets over a fold (rows are samples).
ScoreSet vanilla_scores(const nn::MlpModel& model, const MatrixXd& x, const MatrixXd& y);
ScoreSet ffcp_scores(const nn::MlpModel& model, const MatrixXd& x, const MatrixXd& y);
/// Quantile-pair model; output column 0 is lo, 1 is hi.
ScoreSet cqr_scores(const nn::MlpModel& model, const MatrixXd& x, const MatrixXd& y);
ScoreSet ffcqr_scores(const nn::MlpModel& model, const MatrixXd& x, const MatrixXd& y);
ScoreSet fcp_scores(const nn::MlpModel& model, const MatrixXd& x, const MatrixXd& y,
                    const FcpSearchConfig& config = {}, std::size_t* unconverged = nullptr);

}  // namespace ffcp::scores
