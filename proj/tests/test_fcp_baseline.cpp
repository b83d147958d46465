#include <doctest.h>

#include <cmath>
#include <random>

#include "ffcp/calib.hpp"
#include "ffcp/fcp_baseline.hpp"
#include "ffcp/scores.hpp"

using namespace ffcp;
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

// Model whose head (split 1) is the affine map w.v + b.
nn::MlpModel affine_head(const VectorXd& w, double b) {
  const auto d = w.size();
  return nn::MlpModel({layer(MatrixXd::Identity(d, d), VectorXd::Zero(d), nn::Activation::identity),
                       layer(w.transpose(), VectorXd::Constant(1, b), nn::Activation::identity)},
                      1, nn::OutputKind::regression);
}

}  // namespace

TEST_CASE("interval bound propagation") {
  const auto m = affine_head(vec({3, -4}), 0.0);
  auto iv = fcp::estimate_band_ibp(m, vec({0, 0}), 1.0);
  CHECK(iv.lower == doctest::Approx(-7));
  CHECK(iv.upper == doctest::Approx(7));
  iv = fcp::estimate_band_ibp(m, vec({1, 1}), 0.0);
  CHECK(iv.lower == doctest::Approx(-1));
  CHECK(iv.upper == doctest::Approx(-1));
  const nn::MlpModel id({layer(MatrixXd::Identity(1, 1), VectorXd::Zero(1), nn::Activation::identity)}, 1,
                      nn::OutputKind::regression);
  iv = fcp::estimate_band_ibp(id, vec({3}), 1.0);
  CHECK(iv.lower == 2.0);
  CHECK(iv.upper == 4.0);
  CHECK_THROWS(fcp::estimate_band_ibp(m, vec({0, 0}), INFINITY));
}

TEST_CASE("sampling estimate on an affine head is exact") {
  const auto m = affine_head(vec({3, 4}), 1.0);
  const auto iv = fcp::estimate_band_sampling(m, vec({1, 1}), 1.0);
  CHECK(iv.lower == doctest::Approx(8 - 5));
  CHECK(iv.upper == doctest::Approx(8 + 5));
  const auto sound = fcp::estimate_band_ibp(m, vec({1, 1}), 1.0);
  CHECK(sound.contains(iv, 1e-12));
  const auto point = fcp::estimate_band_sampling(m, vec({1, 1}), 0.0);
  CHECK(point.lower == 8.0);
  CHECK(point.upper == 8.0);
}

TEST_CASE("pure sampling converges on an affine head and is monotone in n") {
  const auto m = affine_head(vec({3, 4}), 0.0);
  fcp::SamplingConfig c;
  c.include_gradient_extremes = false;
  c.ascent_steps = 0;
  c.seed = 17;
  double prev = 0.0;
  for (std::size_t n : {8, 64, 512, 4096}) {
    c.n_samples = n;
    const auto iv = fcp::estimate_band_sampling(m, vec({0, 0}), 1.0, c);
    CHECK(iv.length() >= prev);
    prev = iv.length();
  }
  CHECK(prev == doctest::Approx(10.0).epsilon(1e-3));
}

TEST_CASE("sampled band lies inside the sound band on a random relu head") {
  auto m = nn::mlp_init({3, 16, 16, 1}, nn::Activation::relu, 1, nn::OutputKind::regression, 8);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd(0, 1);
  for (int t = 0; t < 20; ++t) {
    VectorXd v = VectorXd::NullaryExpr(16, [&] { return std::abs(nd(rng)); });
    fcp::SamplingConfig c;
    c.n_samples = 64;
    c.seed = std::uint64_t(t);
    const auto inner = fcp::estimate_band_sampling(m, v, 0.5, c);
    const auto outer = fcp::estimate_band_ibp(m, v, 0.5);
    CHECK(outer.contains(inner, 1e-9));
    const double g = nn::head_forward(m, v)[0];
    CHECK(inner.lower <= g);
    CHECK(inner.upper >= g);
  }
}

TEST_CASE("pipeline on an affine head matches the ffcp band") {
  const VectorXd w = vec({0.5, -1.5, 2.0});
  const auto m = affine_head(w, 0.3);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd(0, 1);
  MatrixXd xc = MatrixXd::NullaryExpr(99, 3, [&] { return nd(rng); });
  MatrixXd yc = nn::predict(m, xc) + MatrixXd::NullaryExpr(99, 1, [&] { return nd(rng); });
  MatrixXd xt = MatrixXd::NullaryExpr(10, 3, [&] { return nd(rng); });
  const auto res = fcp::fcp_pipeline(m, xc, yc, xt);
  CHECK(res.containment_violations == 0);
  CHECK(res.unconverged == 0);
  CHECK(res.seconds >= 0.0);
  const auto ff = scores::ffcp_scores(m, xc, yc);
  const auto col = ff.scores.col(0);
  const auto q = calib::conformal_quantile(std::span<const double>(col.data(), std::size_t(col.size())), 0.1);
  CHECK(std::abs(res.quantile.value - q.value) <= 1e-4);
  const MatrixXd pt = nn::predict(m, xt);
  for (int i = 0; i < 10; ++i) {
    const auto b = bands::band_ffcp(pt.row(i).transpose(), vec({w.norm()}), q.value);
    CHECK(res.sampled_bands[std::size_t(i)].lower[0] == doctest::Approx(b.lower[0]).epsilon(1e-3));
    CHECK(res.sampled_bands[std::size_t(i)].upper[0] == doctest::Approx(b.upper[0]).epsilon(1e-3));
  }
}

TEST_CASE("identity head reduces to the vanilla band") {
  auto m = nn::mlp_init({2, 4, 1}, nn::Activation::relu, 2, nn::OutputKind::regression, 1);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd(0, 1);
  MatrixXd xc = MatrixXd::NullaryExpr(19, 2, [&] { return nd(rng); });
  MatrixXd yc = MatrixXd::NullaryExpr(19, 1, [&] { return nd(rng); });
  MatrixXd xt = MatrixXd::NullaryExpr(5, 2, [&] { return nd(rng); });
  const auto res = fcp::fcp_pipeline(m, xc, yc, xt);
  const auto v = scores::vanilla_scores(m, xc, yc);
  const auto col = v.scores.col(0);
  const auto q = calib::conformal_quantile(std::span<const double>(col.data(), std::size_t(col.size())), 0.1);
  CHECK(res.quantile.value == doctest::Approx(q.value).epsilon(1e-9));
  const MatrixXd pt = nn::predict(m, xt);
  for (int i = 0; i < 5; ++i) {
    CHECK(res.sampled_bands[std::size_t(i)].lower[0] == doctest::Approx(pt(i, 0) - q.value));
    CHECK(res.sound_bands[std::size_t(i)].upper[0] == doctest::Approx(pt(i, 0) + q.value));
  }
}

TEST_CASE("infinite quantile gives unbounded bands") {
  const auto m = affine_head(vec({1.0}), 0.0);
  MatrixXd xc = MatrixXd::Ones(3, 1);
  MatrixXd yc = MatrixXd::Zero(3, 1);
  const auto res = fcp::fcp_pipeline(m, xc, yc, MatrixXd::Ones(2, 1));
  CHECK_FALSE(res.quantile.finite());
  CHECK_FALSE(res.sampled_bands[0].finite());
}
