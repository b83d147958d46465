#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "ffcp/nnkit.hpp"

using namespace ffcp::nn;

namespace {

Layer make_layer(Matrix w, Vector b, Activation a) {
  Layer l;
  l.weight = std::move(w);
  l.bias = std::move(b);
  l.activation = a;
  return l;
}

// Random net whose pre-activations at x are all at least `margin` away from
// zero, so central differences with a small step never cross a kink.
bool kink_free(const MlpModel& m, const Vector& x, double margin) {
  Vector a = x;
  for (const auto& l : m.layers()) {
    Vector z = l.weight * a + l.bias;
    if (l.activation == Activation::relu && (z.array().abs() < margin).any()) return false;
    a = l.activation == Activation::relu ? Vector(z.cwiseMax(0.0)) : z;
  }
  return true;
}

}  // namespace

TEST_CASE("forward on a hand-built net") {
  Matrix w1(2, 2);
  w1 << 1, -1, 2, 0.5;
  Matrix w2(1, 2);
  w2 << 3, -2;
  MlpModel m({make_layer(w1, Vector::Constant(2, 0.5), Activation::relu),
              make_layer(w2, Vector::Constant(1, 1.0), Activation::identity)},
             1, OutputKind::regression);
  Vector x(2);
  x << 1.0, 2.0;
  const auto fv = forward(m, x);
  // z1 = (1 - 2 + 0.5, 2 + 1 + 0.5) = (-0.5, 3.5) -> relu (0, 3.5)
  CHECK(fv.feature[0] == doctest::Approx(0.0));
  CHECK(fv.feature[1] == doctest::Approx(3.5));
  CHECK(fv.prediction[0] == doctest::Approx(1.0 - 7.0));
  const auto j = head_jacobian(m, x);
  CHECK(j.rows(0, 0) == doctest::Approx(3.0));
  CHECK(j.rows(0, 1) == doctest::Approx(-2.0));
  CHECK(j.row_norms[0] == doctest::Approx(std::sqrt(13.0)));
}

TEST_CASE("split at the last layer gives an identity head") {
  const auto m = mlp_init({4, 8, 3}, Activation::relu, 2, OutputKind::regression, 3);
  Vector x = Vector::LinSpaced(4, -1, 1);
  const auto fv = forward(m, x);
  CHECK(fv.feature.isApprox(fv.prediction));
  const auto j = head_jacobian(m, x);
  CHECK(j.rows.isApprox(Matrix::Identity(3, 3)));
  CHECK(j.row_norms.isApprox(Vector::Ones(3)));
}

TEST_CASE("relu subgradient at zero is zero") {
  Matrix w1 = Matrix::Identity(1, 1);
  Matrix w2 = Matrix::Constant(1, 1, 5.0);
  MlpModel m({make_layer(w1, Vector::Zero(1), Activation::relu),
              make_layer(w2, Vector::Zero(1), Activation::identity)},
             0, OutputKind::regression);
  const auto j = head_jacobian(m, Vector::Zero(1));
  CHECK(j.rows(0, 0) == 0.0);
}

TEST_CASE("head jacobian matches central differences on kink-free cases") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> width(1, 6), depth(1, 4);
  int checked = 0;
  for (int trial = 0; checked < 200 && trial < 5000; ++trial) {
    std::vector<int> dims{width(rng)};
    const int L = depth(rng);
    for (int l = 0; l < L; ++l) dims.push_back(width(rng));
    std::uniform_int_distribution<std::size_t> sp(0, std::size_t(L));
    auto m = mlp_init(dims, Activation::relu, sp(rng), OutputKind::regression, rng());
    std::normal_distribution<double> nd(0, 1);
    for (auto& l : m.mutable_layers()) l.bias = Vector::NullaryExpr(l.bias.size(), [&] { return 0.3 * nd(rng); });
    Vector x = Vector::NullaryExpr(dims[0], [&] { return nd(rng); });
    if (!kink_free(m, x, 1e-3)) continue;
    const Vector v = forward(m, x).feature;
    const auto j = head_jacobian(m, x);
    const double h = 1e-6;
    Matrix fd(m.output_dim(), v.size());
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      Vector vp = v, vm = v;
      vp[k] += h;
      vm[k] -= h;
      fd.col(k) = (head_forward(m, vp) - head_forward(m, vm)) / (2 * h);
    }
    const double err = (fd - j.rows).norm() / std::max(1.0, j.rows.norm());
    CHECK(err < 1e-4);
    ++checked;
  }
  CHECK(checked == 200);
}

TEST_CASE("init is deterministic and validates shapes") {
  const auto a = mlp_init({5, 7, 1}, Activation::relu, 1, OutputKind::regression, 42);
  const auto b = mlp_init({5, 7, 1}, Activation::relu, 1, OutputKind::regression, 42);
  const auto c = mlp_init({5, 7, 1}, Activation::relu, 1, OutputKind::regression, 43);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  CHECK(a.feature_dim() == 7);
  CHECK_THROWS(mlp_init({5, 7, 1}, Activation::relu, 3, OutputKind::regression, 0));
  CHECK_THROWS(mlp_init({5, 7, 3}, Activation::relu, 1, OutputKind::quantile_pair, 0));
  CHECK_THROWS(a.with_split(5));
}

TEST_CASE("serialization round-trips bit-exactly") {
  auto m = mlp_init({3, 6, 6, 2}, Activation::relu, 2, OutputKind::quantile_pair, 9);
  m.mutable_layers()[1].bias[0] = 1.0 / 3.0;
  std::stringstream ss;
  save_model(m, ss);
  const auto back = load_model(ss);
  CHECK(back == m);
  CHECK(back.split_index() == 2);
  CHECK(back.output_kind() == OutputKind::quantile_pair);

  const auto path = (std::filesystem::temp_directory_path() / "ffcp_test_model.txt").string();
  save_model(m, path);
  CHECK(load_model(path) == m);
  std::filesystem::remove(path);

  std::stringstream bad("ffcp-mlp 2\n");
  CHECK_THROWS(load_model(bad));
  std::stringstream truncated("ffcp-mlp 1\nkind regression\nsplit 0\nlayers 1\nlayer 1 2 identity\n0.5\n");
  CHECK_THROWS(load_model(truncated));
}

TEST_CASE("training reduces squared error") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd(0, 1);
  Matrix x = Matrix::NullaryExpr(400, 3, [&] { return nd(rng); });
  Matrix y = (x.col(0) * 2.0 - x.col(1)).eval();
  const auto m0 = mlp_init({3, 16, 1}, Activation::relu, 1, OutputKind::regression, 1);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.learning_rate = 1e-2;
  std::vector<double> hist;
  const auto m1 = train(m0, x, y, cfg, &hist);
  REQUIRE(hist.size() == 51);
  CHECK(hist.back() < 0.1 * hist.front());
  CHECK(evaluate_loss(m1, x, y, cfg) == doctest::Approx(hist.back()));

  cfg.epochs = 0;
  CHECK(train(m0, x, y, cfg) == m0);
}

TEST_CASE("pinball training orders the quantile pair") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> nd(0, 1);
  Matrix x = Matrix::NullaryExpr(1000, 2, [&] { return nd(rng); });
  Matrix y(1000, 1);
  for (int i = 0; i < 1000; ++i) y(i, 0) = x(i, 0) + nd(rng);
  const auto m0 = mlp_init({2, 16, 2}, Activation::relu, 1, OutputKind::quantile_pair, 2);
  TrainConfig cfg;
  cfg.loss = Loss::pinball;
  cfg.epochs = 60;
  cfg.learning_rate = 1e-2;
  const auto m = train(m0, x, y, cfg);
  const Matrix p = predict(m, x);
  const double frac = ((p.col(0).array() < p.col(1).array()).cast<double>()).mean();
  CHECK(frac > 0.95);
  const double below_lo = ((y.col(0).array() < p.col(0).array()).cast<double>()).mean();
  const double below_hi = ((y.col(0).array() < p.col(1).array()).cast<double>()).mean();
  CHECK(below_lo == doctest::Approx(0.1).epsilon(0.5));
  CHECK(below_hi == doctest::Approx(0.9).epsilon(0.1));
}

TEST_CASE("divergent training reports the epoch") {
  Matrix x = Matrix::Constant(8, 1, 1.0);
  Matrix y = Matrix::Constant(8, 1, 1e200);
  const auto m0 = mlp_init({1, 4, 1}, Activation::relu, 1, OutputKind::regression, 1);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.learning_rate = 1.0;
  cfg.optimizer = Optimizer::sgd;
  try {
    train(m0, x, y, cfg);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(e.epoch() == 1);
  }
  CHECK_THROWS(train(m0, Matrix(0, 1), Matrix(0, 1), cfg));
}
