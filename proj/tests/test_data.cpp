#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "ffcp/data.hpp"

using namespace ffcp::data;
namespace fs = std::filesystem;

namespace {

std::string write_tmp(const std::string& name, const std::string& text) {
  const auto p = (fs::temp_directory_path() / name).string();
  std::ofstream(p) << text;
  return p;
}

std::string error_of(const std::string& path, const std::vector<std::string>& targets) {
  try {
    load_csv(path, targets);
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("synthetic generator") {
  const auto a = gen_synthetic(200, 7);
  const auto b = gen_synthetic(200, 7);
  CHECK(a.features.rows() == 200);
  CHECK(a.features.cols() == 100);
  CHECK(a.targets.cols() == 1);
  CHECK(a.features == b.features);
  CHECK(a.targets == b.targets);
  CHECK(a.features.minCoeff() >= 0.0);
  CHECK(a.features.maxCoeff() <= 1.0);
  CHECK_FALSE(gen_synthetic(200, 8).targets == a.targets);
}

TEST_CASE("noise-free synthetic data is exactly linear") {
  SyntheticOptions o;
  o.d_x = 5;
  o.noise_scale = 0.0;
  const auto d = gen_synthetic(50, 3, o);
  // solve for W from 5 rows, check the rest
  const Eigen::MatrixXd w = d.features.topRows(5).fullPivLu().solve(d.targets.topRows(5));
  CHECK((d.features * w - d.targets).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("hetero generator reduces with zero second weight") {
  HeteroOptions h;
  h.zero_w2 = true;
  h.d_x = 10;
  SyntheticOptions s;
  s.d_x = 10;
  s.noise_scale = 0.0;
  CHECK(gen_synthetic_hetero(100, 4, h).targets == gen_synthetic(100, 4, s).targets);
  h.zero_w2 = false;
  CHECK_FALSE(gen_synthetic_hetero(100, 4, h).targets == gen_synthetic(100, 4, s).targets);
}

TEST_CASE("classification generator") {
  const auto d = gen_classification(300, 10, 5, 2.0, 1);
  CHECK(d.targets.minCoeff() >= 0);
  CHECK(d.targets.maxCoeff() <= 9);
  CHECK(d.features.cols() == 5);
}

TEST_CASE("split sizes and partition") {
  const auto r = split(10, {0.5, 0.3, 0.2}, 1);
  CHECK(r.train_idx.size() == 5);
  CHECK(r.cal_idx.size() == 3);
  CHECK(r.test_idx.size() == 2);
  // floors (5, 2, 2), remainder to train
  const auto s = split(10, {0.5, 0.25, 0.25}, 1);
  CHECK(s.train_idx.size() == 6);
  CHECK(s.cal_idx.size() == 2);
  CHECK(s.test_idx.size() == 2);
  std::set<std::size_t> all(s.train_idx.begin(), s.train_idx.end());
  all.insert(s.cal_idx.begin(), s.cal_idx.end());
  all.insert(s.test_idx.begin(), s.test_idx.end());
  CHECK(all.size() == 10);
  CHECK(*all.rbegin() == 9);
  const auto t = split(10, {0.5, 0.25, 0.25}, 1);
  CHECK(t.train_idx == s.train_idx);
  CHECK_FALSE(split(10, {0.5, 0.25, 0.25}, 2).train_idx == s.train_idx);
  CHECK_THROWS(split(2, {0.5, 0.25, 0.25}, 1));
  CHECK_THROWS(split(10, {0.5, 0.5, 0.5}, 1));
}

TEST_CASE("csv round trip") {
  const auto d = gen_synthetic(20, 2, {3, 1.0});
  const auto p = (fs::temp_directory_path() / "ffcp_rt.csv").string();
  save_csv(d, p);
  const auto back = load_csv(p, {"y"});
  CHECK(back.features == d.features);
  CHECK(back.targets == d.targets);
  CHECK(back.feature_names == d.feature_names);
  fs::remove(p);
}

TEST_CASE("csv errors") {
  CHECK_FALSE(error_of("/nonexistent/ffcp.csv", {"y"}).empty());
  const auto bad = write_tmp("ffcp_bad.csv", "a,b,y\n1,2,3\n4,x,6\n");
  const auto msg = error_of(bad, {"y"});
  CHECK(msg.find("row") != std::string::npos);
  CHECK(msg.find("b") != std::string::npos);
  const auto missing = write_tmp("ffcp_missing.csv", "a,y\n1,\n");
  CHECK_FALSE(error_of(missing, {"y"}).empty());
  const auto nanf = write_tmp("ffcp_nan.csv", "a,y\nnan,1\n");
  CHECK_FALSE(error_of(nanf, {"y"}).empty());
  const auto ok = write_tmp("ffcp_ok.csv", "a,y\n1,2\n3,4\n");
  CHECK_FALSE(error_of(ok, {"z"}).empty());
  CHECK_FALSE(error_of(ok, {"y", "y"}).empty());
  CHECK(error_of(ok, {"y"}).empty());
  for (auto p : {bad, missing, nanf, ok}) fs::remove(p);
}

TEST_CASE("standardization uses the train fold") {
  auto d = gen_synthetic(100, 5, {4, 1.0});
  d.features.col(2).setConstant(3.0);
  const auto s = split(100, {0.5, 0.25, 0.25}, 3);
  const auto st = standardize(d, s);
  const auto train = st.data.subset(s.train_idx);
  const Eigen::VectorXd mean = train.features.colwise().mean();
  CHECK(std::abs(mean[0]) < 1e-12);
  CHECK(std::abs(mean[3]) < 1e-12);
  CHECK(std::abs(train.targets.mean()) < 1e-12);
  CHECK((st.data.features.col(2).array() == 3.0).all());
  CHECK(st.transform.constant_features == std::vector<std::size_t>{2});
  const auto back = st.transform.invert(st.data);
  CHECK((back.features - d.features).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((back.targets - d.targets).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(st.transform.target_length_to_original(1.0) == doctest::Approx(st.transform.target_scale[0]));
}
