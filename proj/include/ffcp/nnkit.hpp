#pragma once

// Small dense multilayer perceptron: construction, training, evaluation,
// feature extraction at a split layer and the Jacobian of the prediction
// head with respect to that feature.
//
// A model f is a stack of affine+activation layers. split_index partitions
// it as f = g o h: layers [0, split_index) form the feature extractor h and
// layers [split_index, L) form the head g. split_index == L makes g the
// identity map.

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ffcp::nn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Activation { relu, identity };

struct Layer {
  Matrix weight;  // out x in
  Vector bias;    // out
  Activation activation = Activation::identity;

  Eigen::Index in_dim() const { return weight.cols(); }
  Eigen::Index out_dim() const { return weight.rows(); }
};

enum class OutputKind { regression, quantile_pair, logits };

std::string to_string(Activation a);
std::string to_string(OutputKind k);
Activation activation_from_string(const std::string& s);
OutputKind output_kind_from_string(const std::string& s);

class MlpModel {
 public:
  MlpModel() = default;
  MlpModel(std::vector<Layer> layers, std::size_t split_index, OutputKind kind);

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& mutable_layers() { return layers_; }
  std::size_t num_layers() const { return layers_.size(); }
  std::size_t split_index() const { return split_index_; }
  OutputKind output_kind() const { return kind_; }

  Eigen::Index input_dim() const;
  Eigen::Index feature_dim() const;
  Eigen::Index output_dim() const;

  /// Same weights, different split point. Throws if out of range.
  MlpModel with_split(std::size_t split_index) const;

  bool operator==(const MlpModel& other) const;

 private:
  std::vector<Layer> layers_;
  std::size_t split_index_ = 0;
  OutputKind kind_ = OutputKind::regression;
};

struct FeatureView {
  Vector input;
  std::vector<Vector> activations;  // post-activation value of every layer
  Vector feature;
  Vector prediction;
};

struct HeadJacobian {
  Matrix rows;       // d_y x d_v; row j is the gradient of output j w.r.t. the feature
  Vector row_norms;  // Euclidean norm of each row
};

/// Glorot-uniform weights, zero biases. Hidden layers use `hidden`, the last
/// layer is always identity. Identical (dims, seed) give identical models.
MlpModel mlp_init(const std::vector<int>& layer_dims, Activation hidden,
                  std::size_t split_index, OutputKind kind, std::uint64_t seed);

FeatureView forward(const MlpModel& model, const Vector& x);
Vector head_forward(const MlpModel& model, const Vector& v);

/// Reverse-mode sweep over the head layers only. ReLU derivative at an
/// exactly-zero pre-activation is taken as 0.
HeadJacobian head_jacobian(const MlpModel& model, const Vector& x);
HeadJacobian head_jacobian_at_feature(const MlpModel& model, const Vector& v);

// Batched variants; rows are samples.
Matrix predict(const MlpModel& model, const Matrix& x);
Matrix features(const MlpModel& model, const Matrix& x);
Matrix head_predict(const MlpModel& model, const Matrix& v);

/// Row norms of the head Jacobian for every sample (n x d_y).
Matrix head_gradient_norms(const MlpModel& model, const Matrix& x);

// ---------------------------------------------------------------------------
// Training

enum class Loss { squared_error, pinball, cross_entropy };
enum class Optimizer { sgd, adam };

struct TrainConfig {
  Loss loss = Loss::squared_error;
  double pinball_lo = 0.1;
  double pinball_hi = 0.9;
  int epochs = 100;
  int batch_size = 128;
  double learning_rate = 1e-3;
  Optimizer optimizer = Optimizer::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
};

std::string to_string(Loss l);
Loss loss_from_string(const std::string& s);

class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, int epoch)
      : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

/// Mean training loss of `model` on (x, y) under `config`'s loss.
double evaluate_loss(const MlpModel& model, const Matrix& x, const Matrix& y,
                     const TrainConfig& config);

/// Minibatch training on (x, y). For cross-entropy, y is n x 1 holding class
/// indices. `history`, if given, receives the full-data loss before training
/// followed by one entry per epoch.
MlpModel train(const MlpModel& model, const Matrix& x, const Matrix& y,
               const TrainConfig& config, std::vector<double>* history = nullptr);

// ---------------------------------------------------------------------------
// Serialization
//
// Text format, one token stream:
//   ffcp-mlp 1
//   kind <regression|quantile_pair|logits>
//   split <split_index>
//   layers <L>
//   layer <out> <in> <relu|identity>
//   <out*in weights, row-major> <out biases>
//   ...
// Reals are written in shortest round-trip decimal form, so a save/load cycle
// is bit-exact.

void save_model(const MlpModel& model, std::ostream& out);
MlpModel load_model(std::istream& in);
void save_model(const MlpModel& model, const std::string& path);
MlpModel load_model(const std::string& path);

}  // namespace ffcp::nn
