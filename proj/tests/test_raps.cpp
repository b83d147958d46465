#include <doctest.h>

#include <cmath>
#include <random>

#include "ffcp/calib.hpp"
#include "ffcp/raps.hpp"

using namespace ffcp::raps;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {
VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(Eigen::Index(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}
}  // namespace

TEST_CASE("softmax sort") {
  auto s = softmax_sorted(vec({0, 0, 0}));
  CHECK(s.probs[0] == doctest::Approx(1.0 / 3));
  CHECK(s.permutation == std::vector<int>{0, 1, 2});
  s = softmax_sorted(vec({0, std::log(2.0)}));
  CHECK(s.probs[0] == doctest::Approx(2.0 / 3));
  CHECK(s.permutation == std::vector<int>{1, 0});
  s = softmax_sorted(vec({1000, 999, -5}));
  CHECK(std::abs(s.probs.sum() - 1.0) < 1e-12);
  CHECK_THROWS(softmax_sorted(vec({0, NAN})));
}

TEST_CASE("prediction rule") {
  RapsConfig c;
  c.lambda = 0;
  c.k_reg = 0;
  // logits chosen so sorted probs are (0.6, 0.3, 0.1)
  const VectorXd l = vec({std::log(0.1), std::log(0.6), std::log(0.3)});
  auto set = raps_predict(l, 0.0, 0.7, c);
  CHECK(set.size() == 2);
  CHECK(set.classes == std::vector<int>{1, 2});
  CHECK(raps_predict(l, 0.0, 0.0, c).size() == 1);
  CHECK(raps_predict(l, 0.0, ffcp::calib::kInfinity, c).size() == 3);
}

TEST_CASE("score and calibration") {
  RapsConfig c;
  c.lambda = 0;
  c.k_reg = 0;
  c.alpha = 0.5;
  const VectorXd l = vec({std::log(0.1), std::log(0.6), std::log(0.3)});
  CHECK(raps_score(l, 1, 0.0, c) == doctest::Approx(0.6));
  CHECK(raps_score(l, 0, 0.0, c) == doctest::Approx(1.0));
  c.lambda = 0.5;
  c.k_reg = 1;
  CHECK(raps_score(l, 0, 0.0, c) == doctest::Approx(1.0 + 0.5 * 2));
  c.delta = 0.25;
  CHECK(raps_score(l, 1, 2.0, c) == doctest::Approx(0.6 + 0.5));
  CHECK_THROWS(raps_score(l, 3, 0.0, c));

  // single calibration point, alpha 0.5: rank 1, tau = E_1
  RapsConfig one;
  one.alpha = 0.5;
  MatrixXd cl = l.transpose();
  CHECK(raps_calibrate(cl, {2}, VectorXd::Ones(1), one) == doctest::Approx(raps_score(l, 2, 1.0, one)));
}

TEST_CASE("calibration reduces to the conformal quantile of top probabilities") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd(0, 1);
  MatrixXd logits = MatrixXd::NullaryExpr(50, 4, [&] { return nd(rng); });
  std::vector<int> labels(50);
  std::vector<double> top(50);
  for (int i = 0; i < 50; ++i) {
    logits.row(i).maxCoeff(&labels[std::size_t(i)]);
    top[std::size_t(i)] = softmax_sorted(logits.row(i).transpose()).probs[0];
  }
  RapsConfig c;
  c.lambda = 0;
  c.k_reg = 0;
  CHECK(raps_calibrate(logits, labels, VectorXd::Zero(50), c) == ffcp::calib::conformal_quantile(top, 0.1).value);
  // tau is affine in lambda once every rank exceeds k_reg
  std::vector<int> last(50);
  for (int i = 0; i < 50; ++i) logits.row(i).minCoeff(&last[std::size_t(i)]);
  c.k_reg = 1;
  c.lambda = 1;
  const double t1 = raps_calibrate(logits, last, VectorXd::Zero(50), c);
  c.lambda = 2;
  const double t2 = raps_calibrate(logits, last, VectorXd::Zero(50), c);
  c.lambda = 3;
  const double t3 = raps_calibrate(logits, last, VectorXd::Zero(50), c);
  CHECK(t3 - t2 == doctest::Approx(t2 - t1));
  CHECK(t2 - t1 == doctest::Approx(3.0));
}

TEST_CASE("sets are nested in tau and bounded in size") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd(0, 1);
  RapsConfig c;
  c.delta = 0.1;
  for (int t = 0; t < 200; ++t) {
    const VectorXd l = VectorXd::NullaryExpr(10, [&] { return 2 * nd(rng); });
    std::size_t prev = 0;
    for (double tau : {-1.0, 0.2, 0.5, 0.9, 1.1, 2.0, 50.0}) {
      const auto s = raps_predict(l, std::abs(nd(rng)) * 0 + 1.0, tau, c);
      CHECK(s.size() >= 1);
      CHECK(s.size() <= 10);
      CHECK(s.size() >= prev);
      prev = s.size();
    }
  }
}

TEST_CASE("largest rank reading is available") {
  MatrixXd logits(4, 2);
  logits << 0, 1, 0, 2, 0, 3, 0, 4;
  RapsConfig c;
  c.lambda = 0;
  c.alpha = 0.5;
  const std::vector<int> labels{1, 1, 1, 1};
  const double small = raps_calibrate(logits, labels, VectorXd::Zero(4), c);
  c.largest_rank = true;
  const double large = raps_calibrate(logits, labels, VectorXd::Zero(4), c);
  CHECK(large < small);
}
