#include <doctest.h>

#include <chrono>
#include <thread>

#include "ffcp/experiment.hpp"

using namespace ffcp;
using namespace ffcp::experiment;

namespace {

struct Fixture {
  Folds folds;
  nn::MlpModel model;
  Fixture() {
    data::SyntheticOptions o;
    o.d_x = 10;
    const auto d = data::gen_synthetic(800, 2, o);
    folds = make_folds(d, {0.5, 0.25, 0.25}, 2);
    ModelSpec spec;
    spec.hidden = {16, 16};
    spec.split_index = 1;
    spec.train.epochs = 20;
    spec.train.learning_rate = 1e-2;
    model = fit_model(folds, spec, nn::OutputKind::regression);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

}  // namespace

TEST_CASE("fold shapes") {
  const auto& f = fixture().folds;
  CHECK(f.x_train.rows() == 400);
  CHECK(f.x_cal.rows() == 200);
  CHECK(f.x_test.rows() == 200);
  CHECK(f.y_cal.cols() == 1);
}

TEST_CASE("split at the last layer reproduces vanilla per test point") {
  const auto& fx = fixture();
  const auto m = fx.model.with_split(fx.model.num_layers());
  const auto v = run_vanilla(m, fx.folds, 0.1);
  const auto f = run_ffcp(m, fx.folds, 0.1);
  CHECK(v.covered == f.covered);
  CHECK(v.length.mean == doctest::Approx(f.length.mean).epsilon(1e-12));
}

TEST_CASE("uniform localizer reproduces ffcp") {
  const auto& fx = fixture();
  LocalizerConfig loc;
  loc.bandwidth = calib::kInfinity;
  const auto a = run_fflcp(fx.model, fx.folds, 0.1, loc);
  const auto b = run_ffcp(fx.model, fx.folds, 0.1);
  CHECK(a.covered == b.covered);
  for (std::size_t i = 0; i < a.bands.size(); ++i) {
    CHECK(a.bands[i].lower[0] == doctest::Approx(b.bands[i].lower[0]).epsilon(1e-12));
    CHECK(a.bands[i].upper[0] == doctest::Approx(b.bands[i].upper[0]).epsilon(1e-12));
  }
  const auto c = run_lcp(fx.model, fx.folds, 0.1, loc);
  const auto d = run_vanilla(fx.model, fx.folds, 0.1);
  CHECK(c.covered == d.covered);
}

TEST_CASE("localized runs produce point-specific widths") {
  const auto& fx = fixture();
  const auto a = run_lcp(fx.model, fx.folds, 0.1);
  double lo = 1e300, hi = 0;
  for (const auto& b : a.bands) {
    if (!b.finite()) continue;
    lo = std::min(lo, b.upper[0] - b.lower[0]);
    hi = std::max(hi, b.upper[0] - b.lower[0]);
  }
  CHECK(hi > lo);
}

TEST_CASE("quantile regression runs") {
  const auto& fx = fixture();
  ModelSpec spec;
  spec.hidden = {16, 16};
  spec.split_index = 1;
  spec.train.epochs = 20;
  spec.train.learning_rate = 1e-2;
  const auto q = fit_model(fx.folds, spec, nn::OutputKind::quantile_pair);
  CHECK(q.output_dim() == 2);
  const auto c = run_cqr(q, fx.folds, 0.1);
  const auto f = run_ffcqr(q, fx.folds, 0.1);
  CHECK(c.coverage > 0.8);
  CHECK(f.coverage > 0.8);
  CHECK(f.cal_scores.grad_norms.has_value());
}

TEST_CASE("timing excludes training") {
  const auto& fx = fixture();
  const auto slow_train = [&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(300));
    return fx.model;
  };
  const auto m = slow_train();
  const auto r = run_ffcp(m, fx.folds, 0.1);
  CHECK(r.seconds < 0.3);
  CHECK(r.seconds > 0.0);
}

TEST_CASE("fcp run and report") {
  const auto& fx = fixture();
  fcp::PipelineConfig cfg;
  cfg.sampling.n_samples = 32;
  const auto r = run_fcp(fx.model, fx.folds, cfg);
  CHECK(r.sound_length.has_value());
  CHECK(*r.sound_length >= r.length.mean);
  const auto rep = to_report(r, fx.folds, "synthetic", 2, 1);
  CHECK(rep.method == "fcp");
  CHECK(rep.sound_length.has_value());
  CHECK(rep.coverage == r.coverage);
  CHECK_NOTHROW(rep.validate());
}

TEST_CASE("classification run") {
  const auto d = data::gen_classification(600, 4, 5, 3.0, 1);
  const auto f = make_folds(d, {0.5, 0.25, 0.25}, 1, false);
  ModelSpec spec;
  spec.hidden = {16, 16};
  spec.split_index = 1;
  spec.train.epochs = 20;
  spec.train.learning_rate = 1e-2;
  const auto m = fit_model(f, spec, nn::OutputKind::logits, 4);
  raps::RapsConfig rc;
  const auto a = run_raps(m, f, rc);
  rc.delta = 0.0;
  const auto b = run_raps(m, f, rc, ClassGradient::frobenius);
  CHECK(a.coverage == b.coverage);
  CHECK(a.tau_hat == b.tau_hat);
  for (const auto& s : a.sets) {
    CHECK(s.size() >= 1);
    CHECK(s.size() <= 4);
  }
  const auto g1 = class_gradient_norms(m, f.x_cal, ClassGradient::top_logit);
  const auto g2 = class_gradient_norms(m, f.x_cal, ClassGradient::frobenius);
  CHECK((g2.array() >= g1.array() - 1e-12).all());
}
