#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ffcp/bench.hpp"
#include "ffcp/calib.hpp"
#include "ffcp/data.hpp"
#include "ffcp/experiment.hpp"
#include "ffcp/nnkit.hpp"
#include "ffcp/raps.hpp"
#include "ffcp/scores.hpp"

namespace py = pybind11;
using namespace ffcp;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

py::tuple as_xy(const data::Dataset& d) { return py::make_tuple(d.features, d.targets); }

experiment::Folds folds_of(const MatrixXd& x_cal, const MatrixXd& y_cal, const MatrixXd& x_test,
                           const MatrixXd& y_test) {
  experiment::Folds f;
  f.x_cal = x_cal;
  f.y_cal = y_cal;
  f.x_test = x_test;
  f.y_test = y_test;
  return f;
}

py::dict run_dict(const experiment::MethodRun& r) {
  MatrixXd lower(Eigen::Index(r.bands.size()), r.bands.empty() ? 0 : r.bands[0].dim());
  MatrixXd upper(lower.rows(), lower.cols());
  for (std::size_t i = 0; i < r.bands.size(); ++i) {
    lower.row(Eigen::Index(i)) = r.bands[i].lower.transpose();
    upper.row(Eigen::Index(i)) = r.bands[i].upper.transpose();
  }
  py::dict d;
  d["method"] = r.method;
  d["coverage"] = r.coverage;
  d["mean_length"] = r.length.mean;
  d["infinite_bands"] = r.length.infinite_count;
  d["seconds"] = r.seconds;
  d["quantile"] = r.quantile.value;
  d["lower"] = lower;
  d["upper"] = upper;
  d["covered"] = r.covered;
  d["cal_scores"] = r.cal_scores.scores;
  if (r.sound_length) d["sound_length"] = *r.sound_length;
  return d;
}

nn::OutputKind kind_of(const std::string& s) { return nn::output_kind_from_string(s); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Fast feature conformal prediction: C++ core";

  m.def("gen_synthetic", [](std::size_t n, std::uint64_t seed, int d_x, double noise) {
    return as_xy(data::gen_synthetic(n, seed, {d_x, noise}));
  }, py::arg("n"), py::arg("seed") = 0, py::arg("d_x") = 100, py::arg("noise_scale") = 1.0);
  m.def("gen_synthetic_hetero", [](std::size_t n, std::uint64_t seed, int d_x, double noise) {
    data::HeteroOptions o;
    o.d_x = d_x;
    o.noise_scale = noise;
    return as_xy(data::gen_synthetic_hetero(n, seed, o));
  }, py::arg("n"), py::arg("seed") = 0, py::arg("d_x") = 100, py::arg("noise_scale") = 1.0);
  m.def("gen_classification", [](std::size_t n, int k, int d_x, double spread, std::uint64_t seed) {
    return as_xy(data::gen_classification(n, k, d_x, spread, seed));
  }, py::arg("n"), py::arg("n_classes") = 10, py::arg("d_x") = 20, py::arg("spread") = 0.6, py::arg("seed") = 0);

  py::class_<nn::MlpModel>(m, "MlpModel")
      .def(py::init([](const std::vector<int>& dims, std::size_t split, const std::string& kind, std::uint64_t seed) {
             return nn::mlp_init(dims, nn::Activation::relu, split, kind_of(kind), seed);
           }),
           py::arg("layer_dims"), py::arg("split_index"), py::arg("kind") = "regression", py::arg("seed") = 0)
      .def_property_readonly("split_index", &nn::MlpModel::split_index)
      .def_property_readonly("num_layers", &nn::MlpModel::num_layers)
      .def_property_readonly("input_dim", &nn::MlpModel::input_dim)
      .def_property_readonly("feature_dim", &nn::MlpModel::feature_dim)
      .def_property_readonly("output_dim", &nn::MlpModel::output_dim)
      .def_property_readonly("kind", [](const nn::MlpModel& mm) { return nn::to_string(mm.output_kind()); })
      .def("with_split", &nn::MlpModel::with_split)
      .def("predict", [](const nn::MlpModel& mm, const MatrixXd& x) { return nn::predict(mm, x); })
      .def("features", [](const nn::MlpModel& mm, const MatrixXd& x) { return nn::features(mm, x); })
      .def("head_gradient_norms", [](const nn::MlpModel& mm, const MatrixXd& x) { return nn::head_gradient_norms(mm, x); })
      .def("head_jacobian", [](const nn::MlpModel& mm, const VectorXd& x) { return nn::head_jacobian(mm, x).rows; })
      .def("fit", [](const nn::MlpModel& mm, const MatrixXd& x, const MatrixXd& y, int epochs, double lr,
                     int batch_size, std::uint64_t seed) {
             nn::TrainConfig cfg;
             cfg.loss = mm.output_kind() == nn::OutputKind::quantile_pair ? nn::Loss::pinball
                        : mm.output_kind() == nn::OutputKind::logits      ? nn::Loss::cross_entropy
                                                                          : nn::Loss::squared_error;
             cfg.epochs = epochs;
             cfg.learning_rate = lr;
             cfg.batch_size = batch_size;
             cfg.seed = seed;
             std::vector<double> history;
             auto trained = nn::train(mm, x, y, cfg, &history);
             return py::make_tuple(std::move(trained), history);
           },
           py::arg("x"), py::arg("y"), py::arg("epochs") = 100, py::arg("learning_rate") = 1e-3,
           py::arg("batch_size") = 128, py::arg("seed") = 0,
           "Returns (trained model, loss history); the model itself is unchanged.")
      .def("save", [](const nn::MlpModel& mm, const std::string& path) { nn::save_model(mm, path); })
      .def_static("load", [](const std::string& path) { return nn::load_model(path); })
      .def("__eq__", &nn::MlpModel::operator==);

  m.def("conformal_quantile", [](const std::vector<double>& s, double alpha) {
    return calib::conformal_quantile(s, alpha).value;
  }, py::arg("scores"), py::arg("alpha"));
  m.def("weighted_conformal_quantile", [](const std::vector<double>& s, std::vector<double> w, double alpha) {
    return calib::weighted_conformal_quantile(s, calib::make_localizer_weights(std::move(w)), alpha).value;
  }, py::arg("scores"), py::arg("weights"), py::arg("alpha"));

  m.def("vanilla_scores", [](const nn::MlpModel& mm, const MatrixXd& x, const MatrixXd& y) {
    return scores::vanilla_scores(mm, x, y).scores;
  });
  m.def("ffcp_scores", [](const nn::MlpModel& mm, const MatrixXd& x, const MatrixXd& y) {
    return scores::ffcp_scores(mm, x, y).scores;
  });
  m.def("fcp_scores", [](const nn::MlpModel& mm, const MatrixXd& x, const MatrixXd& y) {
    return scores::fcp_scores(mm, x, y).scores;
  });

  m.def("run_method", [](const std::string& method, const nn::MlpModel& mm, const MatrixXd& x_cal,
                         const MatrixXd& y_cal, const MatrixXd& x_test, const MatrixXd& y_test, double alpha,
                         std::size_t n_samples) {
    const auto f = folds_of(x_cal, y_cal, x_test, y_test);
    if (method == "vanilla") return run_dict(experiment::run_vanilla(mm, f, alpha));
    if (method == "ffcp") return run_dict(experiment::run_ffcp(mm, f, alpha));
    if (method == "cqr") return run_dict(experiment::run_cqr(mm, f, alpha));
    if (method == "ffcqr") return run_dict(experiment::run_ffcqr(mm, f, alpha));
    if (method == "lcp") return run_dict(experiment::run_lcp(mm, f, alpha));
    if (method == "fflcp") return run_dict(experiment::run_fflcp(mm, f, alpha));
    if (method == "fcp") {
      fcp::PipelineConfig pc;
      pc.alpha = alpha;
      pc.sampling.n_samples = n_samples;
      return run_dict(experiment::run_fcp(mm, f, pc));
    }
    throw std::invalid_argument("run_method: unknown method '" + method + "'");
  }, py::arg("method"), py::arg("model"), py::arg("x_cal"), py::arg("y_cal"), py::arg("x_test"), py::arg("y_test"),
     py::arg("alpha") = 0.1, py::arg("n_samples") = 1024);

  m.def("raps", [](const nn::MlpModel& mm, const MatrixXd& x_cal, const MatrixXd& y_cal, const MatrixXd& x_test,
                   const MatrixXd& y_test, double alpha, double lambda, int k_reg, double delta) {
    raps::RapsConfig rc;
    rc.alpha = alpha;
    rc.lambda = lambda;
    rc.k_reg = k_reg;
    rc.delta = delta;
    const auto run = experiment::run_raps(mm, folds_of(x_cal, y_cal, x_test, y_test), rc);
    std::vector<std::vector<int>> sets;
    for (const auto& s : run.sets) sets.push_back(s.classes);
    py::dict d;
    d["method"] = run.method;
    d["coverage"] = run.coverage;
    d["mean_set_size"] = run.mean_set_size;
    d["tau_hat"] = run.tau_hat;
    d["seconds"] = run.seconds;
    d["sets"] = sets;
    return d;
  }, py::arg("model"), py::arg("x_cal"), py::arg("y_cal"), py::arg("x_test"), py::arg("y_test"),
     py::arg("alpha") = 0.1, py::arg("lam") = 0.01, py::arg("k_reg") = 1, py::arg("delta") = 0.0);

  m.def("pearson", &bench::pearson);
}
