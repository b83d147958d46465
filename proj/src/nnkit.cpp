#include "ffcp/nnkit.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace ffcp::nn {

namespace {

void apply_activation(Activation a, Vector& z) {
  if (a == Activation::relu) z = z.cwiseMax(0.0);
}

void apply_activation(Activation a, Matrix& z) {
  if (a == Activation::relu) z = z.cwiseMax(0.0);
}

Vector layer_forward(const Layer& layer, const Vector& in) {
  Vector z = layer.weight * in + layer.bias;
  apply_activation(layer.activation, z);
  return z;
}

// Rows of `in` are samples.
Matrix layer_forward(const Layer& layer, const Matrix& in) {
  Matrix z = in * layer.weight.transpose();
  z.rowwise() += layer.bias.transpose();
  apply_activation(layer.activation, z);
  return z;
}

void check_finite(const Vector& x, const char* what) {
  if (!x.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite value");
}

void check_length(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) {
    throw std::invalid_argument(std::string(what) + ": length " + std::to_string(got) +
                                ", expected " + std::to_string(want));
  }
}

}  // namespace

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "identity"; }

std::string to_string(OutputKind k) {
  switch (k) {
    case OutputKind::regression: return "regression";
    case OutputKind::quantile_pair: return "quantile_pair";
    case OutputKind::logits: return "logits";
  }
  return "regression";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "identity") return Activation::identity;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

OutputKind output_kind_from_string(const std::string& s) {
  if (s == "regression") return OutputKind::regression;
  if (s == "quantile_pair") return OutputKind::quantile_pair;
  if (s == "logits") return OutputKind::logits;
  throw std::invalid_argument("unknown output kind '" + s + "'");
}

MlpModel::MlpModel(std::vector<Layer> layers, std::size_t split_index, OutputKind kind)
    : layers_(std::move(layers)), split_index_(split_index), kind_(kind) {
  if (layers_.empty()) throw std::invalid_argument("MlpModel: no layers");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.bias.size() != layer.out_dim()) {
      throw std::invalid_argument("MlpModel: bias size mismatch in layer " + std::to_string(l));
    }
    if (l > 0 && layers_[l - 1].out_dim() != layer.in_dim()) {
      throw std::invalid_argument("MlpModel: dimension mismatch between layers " +
                                  std::to_string(l - 1) + " and " + std::to_string(l));
    }
  }
  if (layers_.back().activation != Activation::identity) {
    throw std::invalid_argument("MlpModel: final layer must use identity activation");
  }
  if (split_index_ > layers_.size()) {
    throw std::invalid_argument("MlpModel: split_index " + std::to_string(split_index_) +
                                " out of range [0, " + std::to_string(layers_.size()) + "]");
  }
  if (kind_ == OutputKind::quantile_pair && output_dim() != 2) {
    throw std::invalid_argument("MlpModel: quantile_pair models need exactly 2 outputs");
  }
}

Eigen::Index MlpModel::input_dim() const { return layers_.front().in_dim(); }

Eigen::Index MlpModel::feature_dim() const {
  return split_index_ == 0 ? input_dim() : layers_[split_index_ - 1].out_dim();
}

Eigen::Index MlpModel::output_dim() const { return layers_.back().out_dim(); }

MlpModel MlpModel::with_split(std::size_t split_index) const {
  return MlpModel(layers_, split_index, kind_);
}

bool MlpModel::operator==(const MlpModel& other) const {
  if (split_index_ != other.split_index_ || kind_ != other.kind_ ||
      layers_.size() != other.layers_.size()) {
    return false;
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& a = layers_[l];
    const auto& b = other.layers_[l];
    if (a.activation != b.activation || a.weight.rows() != b.weight.rows() ||
        a.weight.cols() != b.weight.cols() || a.weight != b.weight || a.bias != b.bias) {
      return false;
    }
  }
  return true;
}

MlpModel mlp_init(const std::vector<int>& layer_dims, Activation hidden,
                  std::size_t split_index, OutputKind kind, std::uint64_t seed) {
  if (layer_dims.size() < 2) throw std::invalid_argument("mlp_init: need at least 2 dims");
  for (int d : layer_dims) {
    if (d <= 0) throw std::invalid_argument("mlp_init: non-positive layer dimension");
  }
  const std::size_t n_layers = layer_dims.size() - 1;
  if (split_index > n_layers) {
    throw std::invalid_argument("mlp_init: split_index " + std::to_string(split_index) +
                                " out of range [0, " + std::to_string(n_layers) + "]");
  }
  std::mt19937_64 rng(seed);
  std::vector<Layer> layers;
  layers.reserve(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    const int fan_in = layer_dims[l];
    const int fan_out = layer_dims[l + 1];
    const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Layer layer;
    layer.weight.resize(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) layer.weight(r, c) = dist(rng);
    layer.bias = Vector::Zero(fan_out);
    layer.activation = (l + 1 == n_layers) ? Activation::identity : hidden;
    layers.push_back(std::move(layer));
  }
  return MlpModel(std::move(layers), split_index, kind);
}

FeatureView forward(const MlpModel& model, const Vector& x) {
  check_length(x.size(), model.input_dim(), "forward");
  check_finite(x, "forward");
  FeatureView view;
  view.input = x;
  view.activations.reserve(model.num_layers());
  Vector a = x;
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    if (l == model.split_index()) view.feature = a;
    a = layer_forward(model.layers()[l], a);
    view.activations.push_back(a);
  }
  if (model.split_index() == model.num_layers()) view.feature = a;
  view.prediction = a;
  return view;
}

Vector head_forward(const MlpModel& model, const Vector& v) {
  check_length(v.size(), model.feature_dim(), "head_forward");
  Vector a = v;
  for (std::size_t l = model.split_index(); l < model.num_layers(); ++l) {
    a = layer_forward(model.layers()[l], a);
  }
  return a;
}

HeadJacobian head_jacobian_at_feature(const MlpModel& model, const Vector& v) {
  check_length(v.size(), model.feature_dim(), "head_jacobian");
  const std::size_t first = model.split_index();
  const std::size_t n = model.num_layers();

  // Pre-activations of the head layers.
  std::vector<Vector> pre;
  pre.reserve(n - first);
  Vector a = v;
  for (std::size_t l = first; l < n; ++l) {
    const auto& layer = model.layers()[l];
    Vector z = layer.weight * a + layer.bias;
    pre.push_back(z);
    a = z;
    apply_activation(layer.activation, a);
  }

  Matrix jac = Matrix::Identity(model.output_dim(), model.output_dim());
  for (std::size_t l = n; l-- > first;) {
    const auto& layer = model.layers()[l];
    if (layer.activation == Activation::relu) {
      const Vector& z = pre[l - first];
      for (Eigen::Index k = 0; k < z.size(); ++k) {
        if (!(z[k] > 0.0)) jac.col(k).setZero();
      }
    }
    jac = jac * layer.weight;
  }

  HeadJacobian out;
  out.row_norms = jac.rowwise().norm();
  out.rows = std::move(jac);
  return out;
}

HeadJacobian head_jacobian(const MlpModel& model, const Vector& x) {
  return head_jacobian_at_feature(model, forward(model, x).feature);
}

Matrix features(const MlpModel& model, const Matrix& x) {
  check_length(x.cols(), model.input_dim(), "features");
  Matrix a = x;
  for (std::size_t l = 0; l < model.split_index(); ++l) a = layer_forward(model.layers()[l], a);
  return a;
}

Matrix head_predict(const MlpModel& model, const Matrix& v) {
  check_length(v.cols(), model.feature_dim(), "head_predict");
  Matrix a = v;
  for (std::size_t l = model.split_index(); l < model.num_layers(); ++l) {
    a = layer_forward(model.layers()[l], a);
  }
  return a;
}

Matrix predict(const MlpModel& model, const Matrix& x) {
  check_length(x.cols(), model.input_dim(), "predict");
  Matrix a = x;
  for (const auto& layer : model.layers()) a = layer_forward(layer, a);
  return a;
}

Matrix head_gradient_norms(const MlpModel& model, const Matrix& x) {
  const Matrix v = features(model, x);
  Matrix out(x.rows(), model.output_dim());
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    out.row(i) = head_jacobian_at_feature(model, v.row(i).transpose()).row_norms.transpose();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

std::string to_string(Loss l) {
  switch (l) {
    case Loss::squared_error: return "squared_error";
    case Loss::pinball: return "pinball";
    case Loss::cross_entropy: return "cross_entropy";
  }
  return "squared_error";
}

Loss loss_from_string(const std::string& s) {
  if (s == "squared_error" || s == "mse") return Loss::squared_error;
  if (s == "pinball") return Loss::pinball;
  if (s == "cross_entropy") return Loss::cross_entropy;
  throw std::invalid_argument("unknown loss '" + s + "'");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
  if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (loss == Loss::pinball && !(0.0 < pinball_lo && pinball_lo < pinball_hi && pinball_hi < 1.0)) {
    throw std::invalid_argument("TrainConfig: pinball levels need 0 < lo < hi < 1");
  }
}

namespace {

Matrix softmax_rows(const Matrix& logits) {
  Matrix p = logits;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double m = p.row(i).maxCoeff();
    p.row(i) = (p.row(i).array() - m).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

// Loss value and its gradient w.r.t. the network output, both averaged over rows.
double loss_and_grad(const Matrix& out, const Matrix& y, const TrainConfig& cfg, Matrix* grad) {
  const double rows = double(out.rows());
  switch (cfg.loss) {
    case Loss::squared_error: {
      const Matrix diff = out - y;
      if (grad) *grad = 2.0 * diff / (rows * double(out.cols()));
      return diff.squaredNorm() / (rows * double(out.cols()));
    }
    case Loss::pinball: {
      if (out.cols() != 2) throw std::invalid_argument("pinball loss needs a 2-output model");
      const double levels[2] = {cfg.pinball_lo, cfg.pinball_hi};
      double total = 0.0;
      if (grad) grad->resize(out.rows(), 2);
      for (Eigen::Index i = 0; i < out.rows(); ++i) {
        for (int j = 0; j < 2; ++j) {
          const double r = y(i, 0) - out(i, j);
          const double tau = levels[j];
          total += r >= 0.0 ? tau * r : (tau - 1.0) * r;
          if (grad) (*grad)(i, j) = (r > 0.0 ? -tau : 1.0 - tau) / (rows * 2.0);
        }
      }
      return total / (rows * 2.0);
    }
    case Loss::cross_entropy: {
      const Matrix p = softmax_rows(out);
      double total = 0.0;
      if (grad) *grad = p;
      for (Eigen::Index i = 0; i < out.rows(); ++i) {
        const auto label = static_cast<Eigen::Index>(y(i, 0));
        if (label < 0 || label >= out.cols()) {
          throw std::invalid_argument("cross_entropy: label out of range");
        }
        total -= std::log(std::max(p(i, label), 1e-300));
        if (grad) (*grad)(i, label) -= 1.0;
      }
      if (grad) *grad /= rows;
      return total / rows;
    }
  }
  return 0.0;
}

struct AdamState {
  std::vector<Matrix> mw, vw;
  std::vector<Vector> mb, vb;
  long step = 0;
};

}  // namespace

double evaluate_loss(const MlpModel& model, const Matrix& x, const Matrix& y,
                     const TrainConfig& config) {
  return loss_and_grad(predict(model, x), y, config, nullptr);
}

MlpModel train(const MlpModel& model, const Matrix& x, const Matrix& y,
               const TrainConfig& config, std::vector<double>* history) {
  config.validate();
  if (x.rows() == 0) throw TrainingError("train: empty training fold", 0);
  if (x.rows() != y.rows()) throw std::invalid_argument("train: feature/target row mismatch");
  if (x.cols() != model.input_dim()) throw std::invalid_argument("train: input dim mismatch");
  if (config.loss == Loss::cross_entropy) {
    if (y.cols() != 1) throw std::invalid_argument("train: cross_entropy needs n x 1 labels");
  } else if (config.loss == Loss::pinball) {
    if (y.cols() != 1) throw std::invalid_argument("train: pinball needs n x 1 targets");
  } else if (y.cols() != model.output_dim()) {
    throw std::invalid_argument("train: target dim mismatch");
  }

  MlpModel out = model;
  if (history) {
    history->clear();
    history->push_back(evaluate_loss(out, x, y, config));
  }
  if (config.epochs == 0) return out;

  auto& layers = out.mutable_layers();
  const std::size_t n_layers = layers.size();
  AdamState adam;
  for (const auto& layer : layers) {
    adam.mw.push_back(Matrix::Zero(layer.weight.rows(), layer.weight.cols()));
    adam.vw.push_back(Matrix::Zero(layer.weight.rows(), layer.weight.cols()));
    adam.mb.push_back(Vector::Zero(layer.bias.size()));
    adam.vb.push_back(Vector::Zero(layer.bias.size()));
  }

  std::mt19937_64 rng(config.seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  std::vector<Matrix> acts(n_layers + 1);
  std::vector<Matrix> pre(n_layers);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += std::size_t(config.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + std::size_t(config.batch_size));
      const auto b = Eigen::Index(stop - start);
      Matrix xb(b, x.cols()), yb(b, y.cols());
      for (Eigen::Index r = 0; r < b; ++r) {
        xb.row(r) = x.row(order[start + std::size_t(r)]);
        yb.row(r) = y.row(order[start + std::size_t(r)]);
      }

      acts[0] = std::move(xb);
      for (std::size_t l = 0; l < n_layers; ++l) {
        pre[l] = acts[l] * layers[l].weight.transpose();
        pre[l].rowwise() += layers[l].bias.transpose();
        acts[l + 1] = pre[l];
        apply_activation(layers[l].activation, acts[l + 1]);
      }

      Matrix delta;
      loss_and_grad(acts[n_layers], yb, config, &delta);
      ++adam.step;
      for (std::size_t l = n_layers; l-- > 0;) {
        if (layers[l].activation == Activation::relu) {
          delta = delta.cwiseProduct((pre[l].array() > 0.0).cast<double>().matrix());
        }
        const Matrix grad_w = delta.transpose() * acts[l];
        const Vector grad_b = delta.colwise().sum().transpose();
        if (l > 0) delta = delta * layers[l].weight;

        if (config.optimizer == Optimizer::sgd) {
          layers[l].weight -= config.learning_rate * grad_w;
          layers[l].bias -= config.learning_rate * grad_b;
        } else {
          const double b1 = config.beta1, b2 = config.beta2;
          const double c1 = 1.0 - std::pow(b1, double(adam.step));
          const double c2 = 1.0 - std::pow(b2, double(adam.step));
          adam.mw[l] = b1 * adam.mw[l] + (1.0 - b1) * grad_w;
          adam.vw[l] = b2 * adam.vw[l] + (1.0 - b2) * grad_w.cwiseAbs2();
          adam.mb[l] = b1 * adam.mb[l] + (1.0 - b1) * grad_b;
          adam.vb[l] = b2 * adam.vb[l] + (1.0 - b2) * grad_b.cwiseAbs2();
          layers[l].weight.array() -= config.learning_rate * (adam.mw[l].array() / c1) /
                                      ((adam.vw[l].array() / c2).sqrt() + config.epsilon);
          layers[l].bias.array() -= config.learning_rate * (adam.mb[l].array() / c1) /
                                    ((adam.vb[l].array() / c2).sqrt() + config.epsilon);
        }
      }
    }

    const double loss = evaluate_loss(out, x, y, config);
    if (!std::isfinite(loss)) {
      throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch), epoch);
    }
    if (history) history->push_back(loss);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

void write_real(std::ostream& out, double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.write(buf, res.ptr - buf);
}

double read_real(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw std::runtime_error("load_model: truncated weights");
  double v = 0.0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    if (tok == "inf") return std::numeric_limits<double>::infinity();
    if (tok == "-inf") return -std::numeric_limits<double>::infinity();
    throw std::runtime_error("load_model: bad real '" + tok + "'");
  }
  return v;
}

void expect(std::istream& in, const std::string& word) {
  std::string tok;
  if (!(in >> tok) || tok != word) {
    throw std::runtime_error("load_model: expected '" + word + "', got '" + tok + "'");
  }
}

}  // namespace

void save_model(const MlpModel& model, std::ostream& out) {
  out << "ffcp-mlp 1\n";
  out << "kind " << to_string(model.output_kind()) << "\n";
  out << "split " << model.split_index() << "\n";
  out << "layers " << model.num_layers() << "\n";
  for (const auto& layer : model.layers()) {
    out << "layer " << layer.out_dim() << " " << layer.in_dim() << " "
        << to_string(layer.activation) << "\n";
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        if (c) out << ' ';
        write_real(out, layer.weight(r, c));
      }
      out << '\n';
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
      if (r) out << ' ';
      write_real(out, layer.bias[r]);
    }
    out << '\n';
  }
}

MlpModel load_model(std::istream& in) {
  expect(in, "ffcp-mlp");
  int version = 0;
  in >> version;
  if (version != 1) throw std::runtime_error("load_model: unsupported version " + std::to_string(version));
  std::string word;
  expect(in, "kind");
  in >> word;
  const OutputKind kind = output_kind_from_string(word);
  std::size_t split = 0, n_layers = 0;
  expect(in, "split");
  in >> split;
  expect(in, "layers");
  in >> n_layers;
  if (!in) throw std::runtime_error("load_model: malformed header");
  std::vector<Layer> layers(n_layers);
  for (auto& layer : layers) {
    expect(in, "layer");
    Eigen::Index rows = 0, cols = 0;
    in >> rows >> cols >> word;
    if (!in || rows <= 0 || cols <= 0) throw std::runtime_error("load_model: malformed layer header");
    layer.activation = activation_from_string(word);
    layer.weight.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) layer.weight(r, c) = read_real(in);
    layer.bias.resize(rows);
    for (Eigen::Index r = 0; r < rows; ++r) layer.bias[r] = read_real(in);
  }
  return MlpModel(std::move(layers), split, kind);
}

void save_model(const MlpModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_model: cannot open '" + path + "'");
  save_model(model, out);
  if (!out) throw std::runtime_error("save_model: write failed for '" + path + "'");
}

MlpModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_model: cannot open '" + path + "'");
  return load_model(in);
}

}  // namespace ffcp::nn
