#include "ffcp/scores.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace ffcp::scores {

std::string to_string(Method m) {
  switch (m) {
    case Method::vanilla: return "vanilla";
    case Method::ffcp: return "ffcp";
    case Method::cqr: return "cqr";
    case Method::ffcqr: return "ffcqr";
    case Method::fcp: return "fcp";
    case Method::lcp: return "lcp";
    case Method::fflcp: return "fflcp";
  }
  return "vanilla";
}

Method method_from_string(const std::string& s) {
  for (Method m : {Method::vanilla, Method::ffcp, Method::cqr, Method::ffcqr, Method::fcp,
                   Method::lcp, Method::fflcp}) {
    if (to_string(m) == s) return m;
  }
  throw std::invalid_argument("unknown score method '" + s + "'");
}

bool uses_gradient(Method m) {
  return m == Method::ffcp || m == Method::ffcqr || m == Method::fflcp;
}

void ScoreSet::validate() const {
  const bool signed_scores = method == Method::cqr || method == Method::ffcqr;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const double s = scores.data()[i];
    if (!std::isfinite(s)) throw std::runtime_error("ScoreSet: non-finite score");
    if (!signed_scores && s < 0.0) throw std::runtime_error("ScoreSet: negative score");
  }
  if (grad_norms.has_value() != uses_gradient(method)) {
    throw std::runtime_error("ScoreSet: grad_norms presence does not match method");
  }
}

namespace {

void check_finite(const VectorXd& v, const char* what) {
  if (!v.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite input");
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + ": non-finite input");
}

double floored(double g, FloorCounter* counter) {
  if (g < kGradFloor) {
    if (counter) ++counter->activations;
    return kGradFloor;
  }
  return g;
}

}  // namespace

VectorXd score_vanilla(const VectorXd& y, const VectorXd& yhat) {
  if (y.size() != yhat.size()) throw std::invalid_argument("score_vanilla: shape mismatch");
  check_finite(y, "score_vanilla");
  check_finite(yhat, "score_vanilla");
  return (y - yhat).cwiseAbs();
}

VectorXd score_ffcp(const VectorXd& y, const VectorXd& yhat, const VectorXd& grad_norms,
                    FloorCounter* counter) {
  if (y.size() != yhat.size() || y.size() != grad_norms.size()) {
    throw std::invalid_argument("score_ffcp: shape mismatch");
  }
  check_finite(y, "score_ffcp");
  check_finite(yhat, "score_ffcp");
  check_finite(grad_norms, "score_ffcp");
  VectorXd out(y.size());
  for (Eigen::Index j = 0; j < y.size(); ++j) {
    if (grad_norms[j] < 0.0) throw std::invalid_argument("score_ffcp: negative gradient norm");
    const double r = std::abs(y[j] - yhat[j]);
    out[j] = r == 0.0 ? 0.0 : r / floored(grad_norms[j], counter);
  }
  return out;
}

double score_cqr(double y, double lo, double hi) {
  check_finite(y, "score_cqr");
  check_finite(lo, "score_cqr");
  check_finite(hi, "score_cqr");
  return std::max(lo - y, y - hi);
}

double score_ffcqr(double y, double lo, double hi, double gnorm_lo, double gnorm_hi,
                   FloorCounter* counter) {
  check_finite(y, "score_ffcqr");
  check_finite(lo, "score_ffcqr");
  check_finite(hi, "score_ffcqr");
  check_finite(gnorm_lo, "score_ffcqr");
  check_finite(gnorm_hi, "score_ffcqr");
  if (gnorm_lo < 0.0 || gnorm_hi < 0.0) throw std::invalid_argument("score_ffcqr: negative gradient norm");
  const double r_lo = lo - y;
  const double r_hi = y - hi;
  const double s_lo = r_lo == 0.0 ? 0.0 : r_lo / floored(gnorm_lo, counter);
  const double s_hi = r_hi == 0.0 ? 0.0 : r_hi / floored(gnorm_hi, counter);
  return std::max(s_lo, s_hi);
}

// ---------------------------------------------------------------------------
// Feature-space search

void FcpSearchConfig::validate() const {
  if (max_iters < 1) throw std::invalid_argument("FcpSearchConfig: max_iters must be >= 1");
  if (!(step_size > 0.0)) throw std::invalid_argument("FcpSearchConfig: step_size must be > 0");
  if (!(residual_tol > 0.0)) throw std::invalid_argument("FcpSearchConfig: residual_tol must be > 0");
  if (restarts < 1) throw std::invalid_argument("FcpSearchConfig: restarts must be >= 1");
}

namespace {

struct HeadEval {
  double value;
  VectorXd grad;
};

HeadEval eval_head(const nn::MlpModel& model, const VectorXd& v) {
  const VectorXd out = nn::head_forward(model, v);
  const nn::HeadJacobian jac = nn::head_jacobian_at_feature(model, v);
  return {out[0], jac.rows.row(0).transpose()};
}

// Newton projection of v onto {g = y} along minimum-norm steps, with step
// halving whenever the residual fails to shrink.
bool project_to_level(const nn::MlpModel& model, VectorXd& v, HeadEval& at, double y, double tol,
                      double step_size, int& budget) {
  while (budget > 0) {
    const double r = at.value - y;
    if (std::abs(r) <= tol) return true;
    const double g2 = at.grad.squaredNorm();
    if (g2 < kGradFloor * kGradFloor) return false;
    double scale = step_size;
    bool moved = false;
    for (int halving = 0; halving < 30 && budget > 0; ++halving, scale *= 0.5) {
      --budget;
      VectorXd cand = v - (scale * r / g2) * at.grad;
      HeadEval ce = eval_head(model, cand);
      if (std::abs(ce.value - y) < std::abs(r)) {
        v = std::move(cand);
        at = std::move(ce);
        moved = true;
        break;
      }
    }
    if (!moved) return false;
  }
  return std::abs(at.value - y) <= tol;
}

FcpScore search_from(const nn::MlpModel& model, const VectorXd& v_hat, const VectorXd& start,
                     double y, const FcpSearchConfig& cfg) {
  const double tol = cfg.residual_tol * (1.0 + std::abs(y));
  int budget = cfg.max_iters;
  VectorXd v = start;
  HeadEval at = eval_head(model, v);
  FcpScore best;
  bool feasible = project_to_level(model, v, at, y, tol, cfg.step_size, budget);

  if (feasible) {
    best.v_star = v;
    best.residual = std::abs(at.value - y);
    best.score = (v - v_hat).norm();
    best.converged = true;
    // Slide along the level set towards v_hat: drop the tangential part of
    // the offset, then project back. Keep only strict improvements.
    while (budget > 0) {
      const VectorXd d = v - v_hat;
      const double g2 = at.grad.squaredNorm();
      if (g2 < kGradFloor * kGradFloor) break;
      const VectorXd tangent = d - (d.dot(at.grad) / g2) * at.grad;
      if (tangent.norm() <= 1e-9 * (1.0 + d.norm())) break;
      VectorXd cand = v - tangent;
      HeadEval ce = eval_head(model, cand);
      --budget;
      if (!project_to_level(model, cand, ce, y, tol, cfg.step_size, budget)) break;
      const double dist = (cand - v_hat).norm();
      if (dist >= best.score * (1.0 - 1e-12)) break;
      v = std::move(cand);
      at = std::move(ce);
      best.v_star = v;
      best.residual = std::abs(at.value - y);
      best.score = dist;
    }
  } else {
    best.v_star = v;
    best.residual = std::abs(at.value - y);
    best.score = (v - v_hat).norm() + best.residual / std::max(at.grad.norm(), kGradFloor);
    best.converged = false;
  }
  best.iterations = cfg.max_iters - budget;
  return best;
}

}  // namespace

FcpScore score_fcp_from_feature(const nn::MlpModel& model, const VectorXd& v_hat, double y,
                                const FcpSearchConfig& config) {
  config.validate();
  if (model.output_dim() != 1) throw std::invalid_argument("score_fcp: scalar output head required");
  check_finite(y, "score_fcp");
  FcpScore best = search_from(model, v_hat, v_hat, y, config);
  if (config.restarts > 1) {
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double radius = std::max(best.score, 1e-3);
    for (int r = 1; r < config.restarts; ++r) {
      VectorXd start = v_hat;
      for (Eigen::Index k = 0; k < start.size(); ++k) start[k] += radius * normal(rng) / std::sqrt(double(start.size()));
      FcpScore cand = search_from(model, v_hat, start, y, config);
      if ((cand.converged && !best.converged) ||
          (cand.converged == best.converged && cand.score < best.score)) {
        cand.iterations += best.iterations;
        best = std::move(cand);
      } else {
        best.iterations += cand.iterations;
      }
    }
  }
  return best;
}

FcpScore score_fcp(const nn::MlpModel& model, const VectorXd& x, double y,
                   const FcpSearchConfig& config) {
  return score_fcp_from_feature(model, nn::forward(model, x).feature, y, config);
}

// ---------------------------------------------------------------------------
// Batched score sets

ScoreSet vanilla_scores(const nn::MlpModel& model, const MatrixXd& x, const MatrixXd& y) {
  const MatrixXd pred = nn::predict(model, x);
  if (pred.cols() != y.cols() || pred.rows() != y.rows()) throw std::invalid_argument("vanilla_scores: shape mismatch");
  ScoreSet s;
  s.method = Method::vanilla;
  s.split_index = model.split_index();
  s.scores = (y - pred).cwiseAbs();
  return s;
}

ScoreSet ffcp_scores(const nn::MlpModel& model, const MatrixXd& x, const MatrixXd& y) {
  const MatrixXd v = nn::features(model, x);
  const MatrixXd pred = nn::head_predict(model, v);
  if (pred.cols() != y.cols() || pred.rows() != y.rows()) throw std::invalid_argument("ffcp_scores: shape mismatch");
  ScoreSet s;
  s.method = Method::ffcp;
  s.split_index = model.split_index();
  s.scores.resize(y.rows(), y.cols());
  MatrixXd norms(y.rows(), y.cols());
  FloorCounter counter;
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const VectorXd gn = nn::head_jacobian_at_feature(model, v.row(i).transpose()).row_norms;
    norms.row(i) = gn.transpose();
    s.scores.row(i) = score_ffcp(y.row(i).transpose(), pred.row(i).transpose(), gn, &counter).transpose();
  }
  s.grad_norms = std::move(norms);
  s.floor_activations = counter.activations;
  return s;
}

ScoreSet cqr_scores(const nn::MlpModel& model, const MatrixXd& x, const MatrixXd& y) {
  const MatrixXd pred = nn::predict(model, x);
  if (pred.cols() != 2 || y.cols() != 1) throw std::invalid_argument("cqr_scores: need a 2-output model and scalar targets");
  ScoreSet s;
  s.method = Method::cqr;
  s.split_index = model.split_index();
  s.scores.resize(y.rows(), 1);
  for (Eigen::Index i = 0; i < y.rows(); ++i) s.scores(i, 0) = score_cqr(y(i, 0), pred(i, 0), pred(i, 1));
  return s;
}

ScoreSet ffcqr_scores(const nn::MlpModel& model, const MatrixXd& x, const MatrixXd& y) {
  const MatrixXd v = nn::features(model, x);
  const MatrixXd pred = nn::head_predict(model, v);
  if (pred.cols() != 2 || y.cols() != 1) throw std::invalid_argument("ffcqr_scores: need a 2-output model and scalar targets");
  ScoreSet s;
  s.method = Method::ffcqr;
  s.split_index = model.split_index();
  s.scores.resize(y.rows(), 1);
  MatrixXd norms(y.rows(), 2);
  FloorCounter counter;
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const VectorXd gn = nn::head_jacobian_at_feature(model, v.row(i).transpose()).row_norms;
    norms.row(i) = gn.transpose();
    s.scores(i, 0) = score_ffcqr(y(i, 0), pred(i, 0), pred(i, 1), gn[0], gn[1], &counter);
  }
  s.grad_norms = std::move(norms);
  s.floor_activations = counter.activations;
  return s;
}

ScoreSet fcp_scores(const nn::MlpModel& model, const MatrixXd& x, const MatrixXd& y,
                    const FcpSearchConfig& config, std::size_t* unconverged) {
  if (y.cols() != 1) throw std::invalid_argument("fcp_scores: scalar targets required");
  const MatrixXd v = nn::features(model, x);
  ScoreSet s;
  s.method = Method::fcp;
  s.split_index = model.split_index();
  s.scores.resize(y.rows(), 1);
  std::size_t misses = 0;
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const FcpScore r = score_fcp_from_feature(model, v.row(i).transpose(), y(i, 0), config);
    s.scores(i, 0) = r.score;
    if (!r.converged) ++misses;
  }
  if (unconverged) *unconverged = misses;
  return s;
}

}  // namespace ffcp::scores
