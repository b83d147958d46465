#pragma once

// Datasets: synthetic generators, CSV ingestion, seeded fold splitting and
// train-fold standardization.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ffcp::data {

struct Dataset {
  Eigen::MatrixXd features;  // n x d_x
  Eigen::MatrixXd targets;   // n x d_y
  std::vector<std::string> feature_names;
  std::vector<std::string> target_names;
  std::string provenance;

  Eigen::Index size() const { return features.rows(); }
  void validate() const;

  Dataset subset(const std::vector<std::size_t>& idx) const;
};

struct SyntheticOptions {
  int d_x = 100;
  double noise_scale = 1.0;
};

/// Y = W X + noise_scale * eps, X ~ U[0,1]^d_x, W ~ N(0,1)^{1 x d_x} fixed per
/// seed, eps ~ N(0,1).
Dataset gen_synthetic(std::size_t n, std::uint64_t seed, SyntheticOptions opts = {});

struct HeteroOptions {
  int d_x = 100;
  double noise_scale = 1.0;
  bool zero_w2 = false;  // reduces to gen_synthetic
};

/// Y = W X + noise_scale * s(X) * eps with s(X) = |W2 (X - 1/2)|. W2 is a
/// second fixed row vector with N(0, 12 / d_x) entries, so W2 (X - 1/2) has
/// unit variance. W and X come from the same stream as gen_synthetic; with
/// zero_w2 the result equals gen_synthetic with noise_scale = 0.
Dataset gen_synthetic_hetero(std::size_t n, std::uint64_t seed, HeteroOptions opts = {});

/// Gaussian class clusters for K-way classification: class centers drawn
/// from N(0, spread^2 I), samples from N(center, I). targets hold the class
/// index as a real.
Dataset gen_classification(std::size_t n, int n_classes, int d_x, double spread,
                           std::uint64_t seed);

/// Header row required; comma separator; '.' decimal; no quoting.
Dataset load_csv(const std::string& path, const std::vector<std::string>& target_columns);
void save_csv(const Dataset& data, const std::string& path);

struct FoldSplit {
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> cal_idx;
  std::vector<std::size_t> test_idx;
  std::uint64_t seed = 0;
};

/// Seeded uniform shuffle, then a contiguous partition. Fold sizes are
/// floor(n * ratio) with the remainder handed out one by one to the earlier
/// folds in order.
FoldSplit split(std::size_t n, std::array<double, 3> ratios, std::uint64_t seed);

struct Standardizer {
  Eigen::VectorXd feature_mean, feature_scale;
  Eigen::VectorXd target_mean, target_scale;
  std::vector<std::size_t> constant_features;  // passed through unscaled

  Dataset apply(const Dataset& d) const;
  Dataset invert(const Dataset& d) const;
  /// Converts a length measured in scaled target units back to original units.
  double target_length_to_original(double length, Eigen::Index col = 0) const;
};

struct Standardized {
  Dataset data;
  Standardizer transform;
};

/// z-scores features and (optionally) targets using train-fold statistics.
Standardized standardize(const Dataset& d, const FoldSplit& folds, bool scale_targets = true);

}  // namespace ffcp::data
