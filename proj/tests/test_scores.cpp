#include <doctest.h>

#include <cmath>
#include <random>

#include "ffcp/scores.hpp"

using namespace ffcp;
using namespace ffcp::scores;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(Eigen::Index(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

nn::Layer layer(MatrixXd w, VectorXd b, nn::Activation a) {
  nn::Layer l;
  l.weight = std::move(w);
  l.bias = std::move(b);
  l.activation = a;
  return l;
}

// x -> v = x (identity extractor) -> w.v + b
nn::MlpModel affine_head(const VectorXd& w, double b) {
  const auto d = w.size();
  return nn::MlpModel({layer(MatrixXd::Identity(d, d), VectorXd::Zero(d), nn::Activation::identity),
                       layer(w.transpose(), VectorXd::Constant(1, b), nn::Activation::identity)},
                      1, nn::OutputKind::regression);
}

}  // namespace

TEST_CASE("vanilla and ffcp scores") {
  CHECK(score_vanilla(vec({3}), vec({7}))[0] == 4.0);
  CHECK(score_vanilla(vec({1, 2}), vec({0, 5})).isApprox(vec({1, 3})));
  CHECK(score_vanilla(vec({2}), vec({2}))[0] == 0.0);
  CHECK(score_ffcp(vec({12}), vec({7}), vec({5}))[0] == 1.0);
  CHECK(score_ffcp(vec({1, 2}), vec({0, 5}), vec({1, 1})).isApprox(vec({1, 3})));
  FloorCounter fc;
  const auto z = score_ffcp(vec({7}), vec({7}), vec({0}), &fc);
  CHECK(z[0] == 0.0);
  const auto big = score_ffcp(vec({8}), vec({7}), vec({0}), &fc);
  CHECK(big[0] == doctest::Approx(1.0 / kGradFloor));
  CHECK(fc.activations >= 1);
}

TEST_CASE("cqr scores") {
  CHECK(score_cqr(5, 4, 6) == -1.0);
  CHECK(score_cqr(6, 4, 6) == 0.0);
  CHECK(score_cqr(9, 7, 7) == 2.0);
  CHECK(score_cqr(3, 7, 7) == 4.0);
  CHECK(score_ffcqr(5, 4, 6, 1, 1) == score_cqr(5, 4, 6));
  CHECK(score_ffcqr(8, 4, 6, 1, 2) == 1.0);
  // midway: branches are -1 and -1
  CHECK(score_ffcqr(5, 4, 6, 2, 2) == doctest::Approx(-0.5));
}

TEST_CASE("fcp score on an affine head equals the projection distance") {
  const auto m = affine_head(vec({3, 4}), 0.0);
  const auto s = score_fcp(m, vec({1, 1}), 12.0);
  CHECK(s.score == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(s.converged);
  CHECK(s.residual < 1e-3);
  const auto feasible = score_fcp(m, vec({1, 1}), 7.0);
  CHECK(feasible.score == 0.0);
  CHECK(feasible.v_star.isApprox(vec({1, 1})));
}

TEST_CASE("fcp score on a piecewise linear head matches a grid search") {
  // g(v) = 2 relu(v), v_hat = 1, y = 4
  nn::MlpModel m({layer(MatrixXd::Identity(1, 1), VectorXd::Zero(1), nn::Activation::identity),
                  layer(MatrixXd::Identity(1, 1), VectorXd::Zero(1), nn::Activation::relu),
                  layer(MatrixXd::Constant(1, 1, 2.0), VectorXd::Zero(1), nn::Activation::identity)},
                 1, nn::OutputKind::regression);
  double best = INFINITY;
  for (int i = -50000; i <= 50000; ++i) {
    const double v = i * 1e-4;
    if (std::abs(2 * std::max(v, 0.0) - 4.0) < 1e-4) best = std::min(best, std::abs(v - 1.0));
  }
  const auto s = score_fcp(m, vec({1}), 4.0);
  CHECK(s.score == doctest::Approx(best).epsilon(1e-3));
  CHECK(s.v_star[0] == doctest::Approx(2.0).epsilon(1e-4));
}

TEST_CASE("fcp equals ffcp for affine heads on random instances") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd(0, 1);
  for (int t = 0; t < 100; ++t) {
    VectorXd w = VectorXd::NullaryExpr(4, [&] { return nd(rng); });
    const auto m = affine_head(w, nd(rng));
    VectorXd x = VectorXd::NullaryExpr(4, [&] { return nd(rng); });
    const double yhat = nn::predict(m, x.transpose())(0, 0);
    const double y = yhat + 3 * nd(rng);
    const double ffcp = score_ffcp(vec({y}), vec({yhat}), vec({w.norm()}))[0];
    CHECK(std::abs(score_fcp(m, x, y).score - ffcp) < 1e-4);
  }
}

TEST_CASE("scores scale with the target") {
  // Scaling the last layer and y by c scales vanilla scores by c and leaves
  // ffcp scores unchanged.
  auto m = nn::mlp_init({3, 8, 1}, nn::Activation::relu, 1, nn::OutputKind::regression, 4);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd(0, 1);
  MatrixXd x = MatrixXd::NullaryExpr(20, 3, [&] { return nd(rng); });
  MatrixXd y = MatrixXd::NullaryExpr(20, 1, [&] { return nd(rng); });
  const auto v0 = vanilla_scores(m, x, y);
  const auto f0 = ffcp_scores(m, x, y);
  auto scaled = m;
  scaled.mutable_layers().back().weight *= 2.5;
  scaled.mutable_layers().back().bias *= 2.5;
  const MatrixXd y2 = y * 2.5;
  CHECK(vanilla_scores(scaled, x, y2).scores.isApprox(v0.scores * 2.5));
  CHECK(ffcp_scores(scaled, x, y2).scores.isApprox(f0.scores));
  CHECK(f0.grad_norms.has_value());
  CHECK_FALSE(v0.grad_norms.has_value());
}

TEST_CASE("score set validation") {
  ScoreSet s;
  s.method = Method::vanilla;
  s.scores = MatrixXd::Constant(2, 1, -1.0);
  CHECK_THROWS(s.validate());
  s.method = Method::cqr;
  CHECK_NOTHROW(s.validate());
  s.scores(0, 0) = NAN;
  CHECK_THROWS(s.validate());
  CHECK(method_from_string("fflcp") == Method::fflcp);
  CHECK_THROWS(method_from_string("nope"));
  CHECK(uses_gradient(Method::ffcqr));
  CHECK_FALSE(uses_gradient(Method::lcp));
}
