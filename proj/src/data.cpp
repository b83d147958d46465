#include "ffcp/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ffcp::data {

void Dataset::validate() const {
  if (features.rows() < 1) throw std::invalid_argument("dataset: no rows");
  if (targets.rows() != features.rows()) throw std::invalid_argument("dataset: feature/target row mismatch");
  if (!features.allFinite() || !targets.allFinite()) throw std::invalid_argument("dataset: non-finite value");
}

Dataset Dataset::subset(const std::vector<std::size_t>& idx) const {
  Dataset out;
  out.features.resize(Eigen::Index(idx.size()), features.cols());
  out.targets.resize(Eigen::Index(idx.size()), targets.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    out.features.row(Eigen::Index(r)) = features.row(Eigen::Index(idx[r]));
    out.targets.row(Eigen::Index(r)) = targets.row(Eigen::Index(idx[r]));
  }
  out.feature_names = feature_names;
  out.target_names = target_names;
  out.provenance = provenance;
  return out;
}

namespace {

std::vector<std::string> default_names(const char* prefix, Eigen::Index n) {
  std::vector<std::string> names;
  for (Eigen::Index i = 0; i < n; ++i) names.push_back(prefix + std::to_string(i));
  return names;
}

struct LinearDraw {
  Eigen::RowVectorXd w;
  Eigen::MatrixXd x;
  Eigen::VectorXd eps;
};

// Shared draw sequence for both synthetic generators: W first, then per
// sample its X row followed by its noise draw.
LinearDraw draw_linear(std::size_t n, int d_x, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("gen_synthetic: n must be >= 1");
  if (d_x < 1) throw std::invalid_argument("gen_synthetic: d_x must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  LinearDraw d;
  d.w.resize(d_x);
  for (int j = 0; j < d_x; ++j) d.w[j] = normal(rng);
  d.x.resize(Eigen::Index(n), d_x);
  d.eps.resize(Eigen::Index(n));
  for (Eigen::Index i = 0; i < Eigen::Index(n); ++i) {
    for (int j = 0; j < d_x; ++j) d.x(i, j) = unif(rng);
    d.eps[i] = normal(rng);
  }
  return d;
}

}  // namespace

Dataset gen_synthetic(std::size_t n, std::uint64_t seed, SyntheticOptions opts) {
  const LinearDraw d = draw_linear(n, opts.d_x, seed);
  Dataset out;
  out.features = d.x;
  out.targets = d.x * d.w.transpose() + opts.noise_scale * d.eps;
  out.feature_names = default_names("x", opts.d_x);
  out.target_names = {"y"};
  out.provenance = "synthetic(seed=" + std::to_string(seed) + ")";
  return out;
}

Dataset gen_synthetic_hetero(std::size_t n, std::uint64_t seed, HeteroOptions opts) {
  const LinearDraw d = draw_linear(n, opts.d_x, seed);
  Eigen::RowVectorXd w2 = Eigen::RowVectorXd::Zero(opts.d_x);
  if (!opts.zero_w2) {
    std::mt19937_64 rng2(seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> normal(0.0, std::sqrt(12.0 / double(opts.d_x)));
    for (int j = 0; j < opts.d_x; ++j) w2[j] = normal(rng2);
  }
  const Eigen::VectorXd scale = ((d.x.array() - 0.5).matrix() * w2.transpose()).cwiseAbs();
  Dataset out;
  out.features = d.x;
  out.targets = d.x * d.w.transpose() + opts.noise_scale * scale.cwiseProduct(d.eps);
  out.feature_names = default_names("x", opts.d_x);
  out.target_names = {"y"};
  out.provenance = "synthetic-hetero(seed=" + std::to_string(seed) + ")";
  return out;
}

Dataset gen_classification(std::size_t n, int n_classes, int d_x, double spread,
                           std::uint64_t seed) {
  if (n < 1 || n_classes < 2 || d_x < 1) throw std::invalid_argument("gen_classification: bad sizes");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, n_classes - 1);
  Eigen::MatrixXd centers(n_classes, d_x);
  for (int k = 0; k < n_classes; ++k)
    for (int j = 0; j < d_x; ++j) centers(k, j) = spread * normal(rng);
  Dataset out;
  out.features.resize(Eigen::Index(n), d_x);
  out.targets.resize(Eigen::Index(n), 1);
  for (Eigen::Index i = 0; i < Eigen::Index(n); ++i) {
    const int label = pick(rng);
    for (int j = 0; j < d_x; ++j) out.features(i, j) = centers(label, j) + normal(rng);
    out.targets(i, 0) = label;
  }
  out.feature_names = default_names("x", d_x);
  out.target_names = {"label"};
  out.provenance = "classification(K=" + std::to_string(n_classes) + ",seed=" + std::to_string(seed) + ")";
  return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

}  // namespace

Dataset load_csv(const std::string& path, const std::vector<std::string>& target_columns) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_csv: missing header row in '" + path + "'");
  std::vector<std::string> header = split_line(line);
  for (auto& h : header) h = trim(h);

  std::set<std::string> seen;
  std::vector<std::size_t> target_idx;
  for (const auto& t : target_columns) {
    if (!seen.insert(t).second) throw std::invalid_argument("load_csv: target column '" + t + "' listed twice");
    auto it = std::find(header.begin(), header.end(), t);
    if (it == header.end()) throw std::invalid_argument("load_csv: unknown target column '" + t + "'");
    target_idx.push_back(std::size_t(it - header.begin()));
  }
  if (target_idx.empty()) throw std::invalid_argument("load_csv: no target columns given");
  std::vector<std::size_t> feature_idx;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (std::find(target_idx.begin(), target_idx.end(), c) == target_idx.end()) feature_idx.push_back(c);
  }

  std::vector<std::vector<double>> rows;
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    ++row_no;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size()) {
      throw std::runtime_error("load_csv: row " + std::to_string(row_no) + " has " +
                               std::to_string(cells.size()) + " fields, expected " +
                               std::to_string(header.size()));
    }
    std::vector<double> values(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string cell = trim(cells[c]);
      const std::string where = "row " + std::to_string(row_no) + ", column '" + header[c] + "'";
      if (cell.empty()) throw std::runtime_error("load_csv: missing value at " + where);
      double v = 0.0;
      auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
        throw std::runtime_error("load_csv: non-numeric value '" + cell + "' at " + where);
      }
      if (!std::isfinite(v)) throw std::runtime_error("load_csv: missing or non-finite value '" + cell + "' at " + where);
      values[c] = v;
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw std::runtime_error("load_csv: no data rows in '" + path + "'");

  Dataset d;
  d.features.resize(Eigen::Index(rows.size()), Eigen::Index(feature_idx.size()));
  d.targets.resize(Eigen::Index(rows.size()), Eigen::Index(target_idx.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < feature_idx.size(); ++c) d.features(Eigen::Index(r), Eigen::Index(c)) = rows[r][feature_idx[c]];
    for (std::size_t c = 0; c < target_idx.size(); ++c) d.targets(Eigen::Index(r), Eigen::Index(c)) = rows[r][target_idx[c]];
  }
  for (auto c : feature_idx) d.feature_names.push_back(header[c]);
  for (auto c : target_idx) d.target_names.push_back(header[c]);
  d.provenance = "csv:" + path;
  return d;
}

void save_csv(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_csv: cannot open '" + path + "'");
  auto fnames = d.feature_names.size() == std::size_t(d.features.cols()) ? d.feature_names : default_names("x", d.features.cols());
  auto tnames = d.target_names.size() == std::size_t(d.targets.cols()) ? d.target_names : default_names("y", d.targets.cols());
  bool first = true;
  for (const auto& n : fnames) { out << (first ? "" : ",") << n; first = false; }
  for (const auto& n : tnames) { out << (first ? "" : ",") << n; first = false; }
  out << '\n';
  char buf[64];
  auto put = [&](double v, bool lead) {
    if (lead) out << ',';
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.write(buf, res.ptr - buf);
  };
  for (Eigen::Index r = 0; r < d.features.rows(); ++r) {
    for (Eigen::Index c = 0; c < d.features.cols(); ++c) put(d.features(r, c), c > 0);
    for (Eigen::Index c = 0; c < d.targets.cols(); ++c) put(d.targets(r, c), d.features.cols() > 0 || c > 0);
    out << '\n';
  }
  if (!out) throw std::runtime_error("save_csv: write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Splitting and scaling

FoldSplit split(std::size_t n, std::array<double, 3> ratios, std::uint64_t seed) {
  double total = 0.0;
  for (double r : ratios) {
    if (!(r > 0.0)) throw std::invalid_argument("split: ratios must be positive");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("split: ratios must sum to 1");

  std::array<std::size_t, 3> sizes{};
  std::size_t assigned = 0;
  for (int f = 0; f < 3; ++f) {
    sizes[f] = std::size_t(std::floor(double(n) * ratios[f] + 1e-9));
    assigned += sizes[f];
  }
  for (int f = 0; assigned < n; f = (f + 1) % 3) {
    ++sizes[f];
    ++assigned;
  }
  static const char* names[3] = {"train", "calibration", "test"};
  for (int f = 0; f < 3; ++f) {
    if (sizes[f] == 0) throw std::invalid_argument(std::string("split: ") + names[f] + " fold is empty");
  }

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  FoldSplit out;
  out.seed = seed;
  auto it = perm.begin();
  out.train_idx.assign(it, it + std::ptrdiff_t(sizes[0]));
  it += std::ptrdiff_t(sizes[0]);
  out.cal_idx.assign(it, it + std::ptrdiff_t(sizes[1]));
  it += std::ptrdiff_t(sizes[1]);
  out.test_idx.assign(it, perm.end());
  return out;
}

Dataset Standardizer::apply(const Dataset& d) const {
  Dataset out = d;
  out.features = (d.features.rowwise() - feature_mean.transpose()).array().rowwise() /
                 feature_scale.transpose().array();
  out.targets = (d.targets.rowwise() - target_mean.transpose()).array().rowwise() /
                target_scale.transpose().array();
  return out;
}

Dataset Standardizer::invert(const Dataset& d) const {
  Dataset out = d;
  out.features = (d.features.array().rowwise() * feature_scale.transpose().array()).matrix().rowwise() +
                 feature_mean.transpose();
  out.targets = (d.targets.array().rowwise() * target_scale.transpose().array()).matrix().rowwise() +
                target_mean.transpose();
  return out;
}

double Standardizer::target_length_to_original(double length, Eigen::Index col) const {
  return length * target_scale[col];
}

Standardized standardize(const Dataset& d, const FoldSplit& folds, bool scale_targets) {
  if (folds.train_idx.empty()) throw std::invalid_argument("standardize: empty train fold");
  const Dataset train = d.subset(folds.train_idx);
  const double m = double(train.size());

  Standardizer t;
  auto stats = [&](const Eigen::MatrixXd& x, Eigen::VectorXd& mean, Eigen::VectorXd& scale,
                   std::vector<std::size_t>* constant, const char* what) {
    mean = x.colwise().mean().transpose();
    scale.resize(x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const double var = (x.col(c).array() - mean[c]).square().sum() / m;
      if (var > 0.0) {
        scale[c] = std::sqrt(var);
      } else {
        std::clog << "warning: standardize: zero-variance " << what << " column " << c
                  << " passed through unscaled\n";
        mean[c] = 0.0;
        scale[c] = 1.0;
        if (constant) constant->push_back(std::size_t(c));
      }
    }
  };
  stats(train.features, t.feature_mean, t.feature_scale, &t.constant_features, "feature");
  if (scale_targets) {
    stats(train.targets, t.target_mean, t.target_scale, nullptr, "target");
  } else {
    t.target_mean = Eigen::VectorXd::Zero(d.targets.cols());
    t.target_scale = Eigen::VectorXd::Ones(d.targets.cols());
  }
  return {t.apply(d), t};
}

}  // namespace ffcp::data
