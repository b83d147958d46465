#include "ffcp/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace ffcp::experiment {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::span<const double> col_span(const Eigen::MatrixXd& m, Eigen::Index c) {
  return {m.data() + c * m.rows(), std::size_t(m.rows())};
}

void finish(MethodRun& run, const Folds& f) {
  run.covered = bench::covered(run.bands, f.y_test);
  run.coverage = double(std::count(run.covered.begin(), run.covered.end(), true)) /
                 double(std::max<std::size_t>(run.covered.size(), 1));
  run.length = bench::mean_band_length(run.bands);
}

// One global quantile per output coordinate; the bands here are built
// coordinate-wise, so each column is calibrated on its own.
std::vector<double> column_quantiles(const Eigen::MatrixXd& s, double alpha,
                                     calib::ConformalQuantile* first) {
  std::vector<double> q(std::size_t(s.cols()));
  for (Eigen::Index c = 0; c < s.cols(); ++c) {
    const auto cq = calib::conformal_quantile(col_span(s, c), alpha);
    q[std::size_t(c)] = cq.value;
    if (c == 0 && first) *first = cq;
  }
  return q;
}

// Coordinate j gets center_j +/- scale_j * q_j, each through the scalar band
// constructor so infinite quantiles are handled per coordinate.
bands::PredictionBand coordinate_band(const Eigen::VectorXd& center, const Eigen::VectorXd& scale,
                                      const std::vector<double>& q, const char* method) {
  bands::PredictionBand b;
  b.method = method;
  b.center = center;
  b.lower.resize(center.size());
  b.upper.resize(center.size());
  for (Eigen::Index j = 0; j < center.size(); ++j) {
    const auto bj = bands::band_ffcp(Eigen::VectorXd::Constant(1, center[j]),
                                     Eigen::VectorXd::Constant(1, scale[j]), q[std::size_t(j)]);
    b.lower[j] = bj.lower[0];
    b.upper[j] = bj.upper[0];
  }
  return b;
}

Eigen::MatrixXd localizer_points(const nn::MlpModel& model, const Eigen::MatrixXd& x,
                                 calib::LocalizerSpace space) {
  return space == calib::LocalizerSpace::input ? x : nn::features(model, x);
}

// Per-test-point localized quantile of the (scalar) calibration scores.
std::vector<double> localized_quantiles(const nn::MlpModel& model, const Folds& f,
                                        const Eigen::VectorXd& cal_scores, double alpha,
                                        const LocalizerConfig& loc) {
  const Eigen::MatrixXd pc = localizer_points(model, f.x_cal, loc.space);
  const Eigen::MatrixXd pt = localizer_points(model, f.x_test, loc.space);
  const double h = loc.bandwidth ? *loc.bandwidth : calib::median_pairwise_distance(pc);
  if (!(h > 0.0)) throw std::invalid_argument("localizer bandwidth must be > 0");

  const auto n = std::size_t(cal_scores.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return cal_scores[Eigen::Index(a)] < cal_scores[Eigen::Index(b)]; });
  std::vector<double> sorted(n);
  for (std::size_t i = 0; i < n; ++i) sorted[i] = cal_scores[Eigen::Index(order[i])];

  const Eigen::VectorXd cal_sq = pc.rowwise().squaredNorm();
  std::vector<double> out(std::size_t(pt.rows()));
  std::vector<double> raw(n);
  for (Eigen::Index t = 0; t < pt.rows(); ++t) {
    const Eigen::VectorXd cross = pc * pt.row(t).transpose();
    const double tsq = pt.row(t).squaredNorm();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d2 = std::max(0.0, cal_sq[Eigen::Index(i)] + tsq - 2.0 * cross[Eigen::Index(i)]);
      raw[i] = std::isinf(h) ? 1.0 : std::exp(-d2 / (2.0 * h * h));
      total += raw[i];
    }
    if (total == 0.0) {
      // Every kernel value underflowed: fall back to the nearest neighbour.
      Eigen::Index best = 0;
      (cal_sq.array() - 2.0 * cross.array()).minCoeff(&best);
      raw[std::size_t(best)] = 1.0;
      total = 1.0;
    }
    for (auto& r : raw) r /= total;
    out[std::size_t(t)] = calib::weighted_quantile_sorted(sorted, order, raw, alpha);
  }
  return out;
}

}  // namespace

Folds make_folds(const data::Dataset& d, std::array<double, 3> ratios, std::uint64_t seed,
                 bool scale_targets, data::Standardizer* transform) {
  d.validate();
  const auto split = data::split(std::size_t(d.size()), ratios, seed);
  const auto st = data::standardize(d, split, scale_targets);
  if (transform) *transform = st.transform;
  Folds f;
  const auto tr = st.data.subset(split.train_idx);
  const auto ca = st.data.subset(split.cal_idx);
  const auto te = st.data.subset(split.test_idx);
  f.x_train = tr.features; f.y_train = tr.targets;
  f.x_cal = ca.features;   f.y_cal = ca.targets;
  f.x_test = te.features;  f.y_test = te.targets;
  return f;
}

nn::MlpModel fit_model(const Folds& folds, const ModelSpec& spec, nn::OutputKind kind, int n_classes) {
  std::vector<int> dims;
  dims.push_back(int(folds.x_train.cols()));
  dims.insert(dims.end(), spec.hidden.begin(), spec.hidden.end());
  nn::TrainConfig cfg = spec.train;
  switch (kind) {
    case nn::OutputKind::regression:
      dims.push_back(int(folds.y_train.cols()));
      cfg.loss = nn::Loss::squared_error;
      break;
    case nn::OutputKind::quantile_pair:
      dims.push_back(2);
      cfg.loss = nn::Loss::pinball;
      break;
    case nn::OutputKind::logits:
      if (n_classes < 2) throw std::invalid_argument("fit_model: logits need n_classes >= 2");
      dims.push_back(n_classes);
      cfg.loss = nn::Loss::cross_entropy;
      break;
  }
  const auto init = nn::mlp_init(dims, nn::Activation::relu, spec.split_index, kind, cfg.seed);
  return nn::train(init, folds.x_train, folds.y_train, cfg);
}

MethodRun run_vanilla(const nn::MlpModel& model, const Folds& f, double alpha) {
  MethodRun run;
  run.method = "vanilla";
  const auto t0 = Clock::now();
  run.cal_scores = scores::vanilla_scores(model, f.x_cal, f.y_cal);
  const auto q = column_quantiles(run.cal_scores.scores, alpha, &run.quantile);
  const Eigen::MatrixXd pred = nn::predict(model, f.x_test);
  run.bands.reserve(std::size_t(pred.rows()));
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    if (q.size() == 1) {
      run.bands.push_back(bands::band_vanilla(pred.row(i).transpose(), q[0]));
    } else {
      run.bands.push_back(coordinate_band(pred.row(i).transpose(), Eigen::VectorXd::Ones(pred.cols()), q, "vanilla"));
    }
  }
  run.seconds = since(t0);
  finish(run, f);
  return run;
}

MethodRun run_ffcp(const nn::MlpModel& model, const Folds& f, double alpha) {
  MethodRun run;
  run.method = "ffcp";
  const auto t0 = Clock::now();
  run.cal_scores = scores::ffcp_scores(model, f.x_cal, f.y_cal);
  const auto q = column_quantiles(run.cal_scores.scores, alpha, &run.quantile);
  const Eigen::MatrixXd v = nn::features(model, f.x_test);
  const Eigen::MatrixXd pred = nn::head_predict(model, v);
  run.bands.reserve(std::size_t(pred.rows()));
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    const auto jac = nn::head_jacobian_at_feature(model, v.row(i).transpose());
    if (q.size() == 1) {
      run.bands.push_back(bands::band_ffcp(pred.row(i).transpose(), jac.row_norms, q[0]));
    } else {
      run.bands.push_back(coordinate_band(pred.row(i).transpose(), jac.row_norms, q, "ffcp"));
    }
  }
  run.seconds = since(t0);
  run.floor_activations = run.cal_scores.floor_activations;
  finish(run, f);
  return run;
}

MethodRun run_cqr(const nn::MlpModel& qmodel, const Folds& f, double alpha) {
  MethodRun run;
  run.method = "cqr";
  const auto t0 = Clock::now();
  run.cal_scores = scores::cqr_scores(qmodel, f.x_cal, f.y_cal);
  run.quantile = calib::conformal_quantile(col_span(run.cal_scores.scores, 0), alpha);
  const Eigen::MatrixXd pred = nn::predict(qmodel, f.x_test);
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    auto b = bands::band_ffcqr(pred(i, 0), pred(i, 1), 1.0, 1.0, run.quantile.value);
    b.method = "cqr";
    run.bands.push_back(std::move(b));
  }
  run.seconds = since(t0);
  finish(run, f);
  return run;
}

MethodRun run_ffcqr(const nn::MlpModel& qmodel, const Folds& f, double alpha) {
  MethodRun run;
  run.method = "ffcqr";
  const auto t0 = Clock::now();
  run.cal_scores = scores::ffcqr_scores(qmodel, f.x_cal, f.y_cal);
  run.quantile = calib::conformal_quantile(col_span(run.cal_scores.scores, 0), alpha);
  const Eigen::MatrixXd v = nn::features(qmodel, f.x_test);
  const Eigen::MatrixXd pred = nn::head_predict(qmodel, v);
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    const auto jac = nn::head_jacobian_at_feature(qmodel, v.row(i).transpose());
    run.bands.push_back(bands::band_ffcqr(pred(i, 0), pred(i, 1), jac.row_norms[0], jac.row_norms[1],
                                          run.quantile.value));
  }
  run.seconds = since(t0);
  run.floor_activations = run.cal_scores.floor_activations;
  finish(run, f);
  return run;
}

MethodRun run_lcp(const nn::MlpModel& model, const Folds& f, double alpha, const LocalizerConfig& loc) {
  if (f.y_cal.cols() != 1) throw std::invalid_argument("run_lcp: scalar targets required");
  MethodRun run;
  run.method = "lcp";
  const auto t0 = Clock::now();
  run.cal_scores = scores::vanilla_scores(model, f.x_cal, f.y_cal);
  run.cal_scores.method = scores::Method::lcp;
  const auto q = localized_quantiles(model, f, run.cal_scores.scores.col(0), alpha, loc);
  const Eigen::MatrixXd pred = nn::predict(model, f.x_test);
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    auto b = bands::band_vanilla(pred.row(i).transpose(), q[std::size_t(i)]);
    b.method = "lcp";
    run.bands.push_back(std::move(b));
  }
  run.seconds = since(t0);
  finish(run, f);
  return run;
}

MethodRun run_fflcp(const nn::MlpModel& model, const Folds& f, double alpha, const LocalizerConfig& loc) {
  if (f.y_cal.cols() != 1) throw std::invalid_argument("run_fflcp: scalar targets required");
  MethodRun run;
  run.method = "fflcp";
  const auto t0 = Clock::now();
  run.cal_scores = scores::ffcp_scores(model, f.x_cal, f.y_cal);
  run.cal_scores.method = scores::Method::fflcp;
  const auto q = localized_quantiles(model, f, run.cal_scores.scores.col(0), alpha, loc);
  const Eigen::MatrixXd v = nn::features(model, f.x_test);
  const Eigen::MatrixXd pred = nn::head_predict(model, v);
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    const auto jac = nn::head_jacobian_at_feature(model, v.row(i).transpose());
    run.bands.push_back(bands::band_fflcp(pred.row(i).transpose(), jac.row_norms, q[std::size_t(i)]));
  }
  run.seconds = since(t0);
  run.floor_activations = run.cal_scores.floor_activations;
  finish(run, f);
  return run;
}

MethodRun run_fcp(const nn::MlpModel& model, const Folds& f, const fcp::PipelineConfig& config) {
  MethodRun run;
  run.method = "fcp";
  auto res = fcp::fcp_pipeline(model, f.x_cal, f.y_cal, f.x_test, config);
  run.seconds = res.seconds;
  run.bands = std::move(res.sampled_bands);
  run.cal_scores = std::move(res.scores);
  run.quantile = res.quantile;
  run.unconverged = res.unconverged;
  run.containment_violations = res.containment_violations;
  finish(run, f);
  if (res.quantile.finite()) run.sound_length = bench::mean_band_length(res.sound_bands).mean;
  return run;
}

Eigen::VectorXd class_gradient_norms(const nn::MlpModel& model, const MatrixXd& x, ClassGradient g) {
  const MatrixXd v = nn::features(model, x);
  const MatrixXd logits = nn::head_predict(model, v);
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto jac = nn::head_jacobian_at_feature(model, v.row(i).transpose());
    if (g == ClassGradient::frobenius) {
      out[i] = jac.rows.norm();
    } else {
      Eigen::Index top = 0;
      logits.row(i).maxCoeff(&top);
      out[i] = jac.row_norms[top];
    }
  }
  return out;
}

ClassificationRun run_raps(const nn::MlpModel& model, const Folds& f, const raps::RapsConfig& config,
                           ClassGradient gradient) {
  ClassificationRun run;
  run.method = config.delta == 0.0 ? "raps" : "ffraps";
  const auto t0 = Clock::now();
  const MatrixXd cal_logits = nn::predict(model, f.x_cal);
  std::vector<int> labels(std::size_t(f.y_cal.rows()));
  for (Eigen::Index i = 0; i < f.y_cal.rows(); ++i) labels[std::size_t(i)] = int(f.y_cal(i, 0));
  const bool need_grad = config.delta != 0.0;
  const Eigen::VectorXd cal_g = need_grad ? class_gradient_norms(model, f.x_cal, gradient)
                                          : Eigen::VectorXd::Zero(f.x_cal.rows());
  run.tau_hat = raps::raps_calibrate(cal_logits, labels, cal_g, config);
  const MatrixXd test_logits = nn::predict(model, f.x_test);
  const Eigen::VectorXd test_g = need_grad ? class_gradient_norms(model, f.x_test, gradient)
                                           : Eigen::VectorXd::Zero(f.x_test.rows());
  for (Eigen::Index i = 0; i < test_logits.rows(); ++i) {
    run.sets.push_back(raps::raps_predict(test_logits.row(i).transpose(), test_g[i], run.tau_hat, config));
  }
  run.seconds = since(t0);
  std::size_t hits = 0, total = 0;
  for (std::size_t i = 0; i < run.sets.size(); ++i) {
    const int label = int(f.y_test(Eigen::Index(i), 0));
    const auto& cls = run.sets[i].classes;
    if (std::find(cls.begin(), cls.end(), label) != cls.end()) ++hits;
    total += cls.size();
  }
  run.coverage = double(hits) / double(std::max<std::size_t>(run.sets.size(), 1));
  run.mean_set_size = double(total) / double(std::max<std::size_t>(run.sets.size(), 1));
  return run;
}

bench::BenchReport to_report(const MethodRun& run, const Folds& f, const std::string& dataset,
                             std::uint64_t seed, int split_index) {
  bench::BenchReport r;
  r.method = run.method;
  r.dataset = dataset;
  r.seed = seed;
  r.split_index = split_index;
  r.coverage = run.coverage;
  r.mean_length = run.length.mean;
  r.infinite_band_count = run.length.infinite_count;
  r.runtime_seconds = run.seconds;
  r.sound_length = run.sound_length;
  r.floor_activations = run.floor_activations;
  if (f.y_test.cols() == 1 && f.y_test.rows() >= 3) {
    r.group_coverage_min = bench::group_coverage(run.bands, f.y_test).min;
  } else {
    r.group_coverage_min = run.coverage;
  }
  return r;
}

bench::BenchReport to_report(const ClassificationRun& run, const Folds& f, const std::string& dataset,
                             std::uint64_t seed, int split_index) {
  bench::BenchReport r;
  r.method = run.method;
  r.dataset = dataset;
  r.seed = seed;
  r.split_index = split_index;
  r.coverage = run.coverage;
  r.mean_length = run.mean_set_size;
  r.set_size = run.mean_set_size;
  r.runtime_seconds = run.seconds;
  std::map<int, std::pair<std::size_t, std::size_t>> per_class;  // hits, count
  for (std::size_t i = 0; i < run.sets.size(); ++i) {
    const int label = int(f.y_test(Eigen::Index(i), 0));
    const auto& cls = run.sets[i].classes;
    auto& [hits, count] = per_class[label];
    ++count;
    if (std::find(cls.begin(), cls.end(), label) != cls.end()) ++hits;
  }
  r.group_coverage_min = 1.0;
  for (const auto& [label, hc] : per_class) {
    r.group_coverage_min = std::min(r.group_coverage_min, double(hc.first) / double(hc.second));
  }
  return r;
}

}  // namespace ffcp::experiment
