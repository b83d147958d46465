#include "ffcp/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "ffcp/calib.hpp"

namespace ffcp::bench {

std::vector<bool> covered(const std::vector<PredictionBand>& bands, const MatrixXd& y_test) {
  if (bands.size() != std::size_t(y_test.rows())) throw std::invalid_argument("coverage: band/target count mismatch");
  std::vector<bool> out(bands.size());
  for (std::size_t i = 0; i < bands.size(); ++i) {
    out[i] = bands::contains_all(bands[i], y_test.row(Eigen::Index(i)).transpose());
  }
  return out;
}

double coverage(const std::vector<PredictionBand>& bands, const MatrixXd& y_test) {
  if (bands.empty()) throw std::invalid_argument("coverage: empty test set");
  const auto hits = covered(bands, y_test);
  return double(std::count(hits.begin(), hits.end(), true)) / double(hits.size());
}

LengthStats mean_band_length(const std::vector<PredictionBand>& bands) {
  LengthStats s;
  double total = 0.0;
  std::size_t finite = 0;
  for (const auto& b : bands) {
    if (!b.finite()) {
      ++s.infinite_count;
      continue;
    }
    const double width = (b.upper - b.lower).cwiseMax(0.0).mean();
    total += width;
    ++finite;
  }
  if (finite == 0) throw std::invalid_argument("mean_band_length: no finite bands");
  s.mean = total / double(finite);
  return s;
}

GroupCoverage group_coverage(const std::vector<PredictionBand>& bands, const MatrixXd& y_test) {
  if (y_test.cols() != 1) throw std::invalid_argument("group_coverage: scalar targets required");
  const auto n = std::size_t(y_test.rows());
  if (n < 3) throw std::invalid_argument("group_coverage: need at least 3 test points");
  const auto hits = covered(bands, y_test);
  std::vector<double> sorted(y_test.data(), y_test.data() + n);
  std::sort(sorted.begin(), sorted.end());
  const double t1 = sorted[(n + 2) / 3 - 1];
  const double t2 = sorted[(2 * n + 2) / 3 - 1];

  GroupCoverage g;
  g.per_group.assign(3, 0.0);
  g.group_size.assign(3, 0);
  std::vector<std::size_t> hit(3, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const double y = y_test(Eigen::Index(i), 0);
    const int grp = y <= t1 ? 0 : (y <= t2 ? 1 : 2);
    ++g.group_size[grp];
    if (hits[i]) ++hit[grp];
  }
  g.min = 1.0;
  for (int k = 0; k < 3; ++k) {
    if (g.group_size[k] == 0) continue;
    g.per_group[k] = double(hit[k]) / double(g.group_size[k]);
    g.min = std::min(g.min, g.per_group[k]);
  }
  return g;
}

double pearson(const VectorXd& a, const VectorXd& b) {
  if (a.size() != b.size()) throw std::invalid_argument("pearson: length mismatch");
  if (a.size() < 2) throw std::invalid_argument("pearson: need at least 2 points");
  const VectorXd da = a.array() - a.mean();
  const VectorXd db = b.array() - b.mean();
  const double va = da.squaredNorm(), vb = db.squaredNorm();
  if (va == 0.0 || vb == 0.0) throw std::invalid_argument("pearson: zero variance");
  return da.dot(db) / std::sqrt(va * vb);
}

namespace {

SquareConditionReport square_report(const VectorXd& s, double alpha, const HolderConstants& holder,
                                    std::size_t n_bootstrap, std::uint64_t seed, const char* space) {
  SquareConditionReport r;
  r.space = space;
  r.n = std::size_t(s.size());
  r.holder = holder;
  r.quantile = calib::conformal_quantile(std::span<const double>(s.data(), r.n), alpha).value;
  if (r.n > 0) {
    r.mean_gap = (r.quantile - s.array()).mean();
    r.mean_abs_gap = (r.quantile - s.array()).abs().mean();
  }
  if (n_bootstrap > 1 && r.n > 0) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, r.n - 1);
    std::vector<double> qs;
    std::vector<double> resample(r.n);
    for (std::size_t b = 0; b < n_bootstrap; ++b) {
      for (auto& v : resample) v = s[Eigen::Index(pick(rng))];
      qs.push_back(calib::conformal_quantile(resample, alpha).value);
    }
    const Summary sm = summarize(qs);
    r.quantile_std = sm.std;
  }
  return r;
}

}  // namespace

SquareConditionCheck square_condition_check(const VectorXd& scores_output,
                                            const VectorXd& scores_feature, double alpha,
                                            HolderConstants holder, std::size_t n_bootstrap,
                                            std::uint64_t seed) {
  SquareConditionCheck c;
  c.output = square_report(scores_output, alpha, holder, n_bootstrap, seed, "output");
  c.feature = square_report(scores_feature, alpha, holder, n_bootstrap, seed, "feature");
  const VectorXd gaps = (c.feature.quantile - scores_feature.array()).abs().pow(holder.exponent);
  c.expansion_lhs = holder.lipschitz * (gaps.size() ? gaps.mean() : 0.0);
  const double n = double(std::max<std::size_t>(c.output.n, 1));
  c.expansion_rhs = c.output.mean_gap - 2.0 * std::max(holder.lipschitz, 1.0) *
                                            std::pow(holder.c / std::sqrt(n), std::min(holder.exponent, 1.0));
  return c;
}

// ---------------------------------------------------------------------------
// Reports

void BenchReport::validate() const {
  if (!(coverage >= 0.0 && coverage <= 1.0)) throw std::invalid_argument("BenchReport: coverage outside [0, 1]");
  if (!(runtime_seconds >= 0.0)) throw std::invalid_argument("BenchReport: negative runtime");
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  double total = 0.0;
  for (double v : values) total += v;
  s.mean = total / double(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / double(values.size() - 1));
  }
  return s;
}

std::string format_mean_std(const Summary& s, int precision) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%.*f±%.*f", precision, s.mean, precision, s.std);
  return buf;
}

std::vector<AggregateRow> aggregate(const std::vector<BenchReport>& rows) {
  std::vector<AggregateRow> out;
  std::vector<std::vector<const BenchReport*>> members;
  for (const auto& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const AggregateRow& a) {
      return a.dataset == r.dataset && a.method == r.method && a.split_index == r.split_index;
    });
    if (it == out.end()) {
      out.push_back({r.dataset, r.method, r.split_index, {}, {}, {}, {}, std::nullopt, 0});
      members.emplace_back();
      it = out.end() - 1;
    }
    members[std::size_t(it - out.begin())].push_back(&r);
  }
  for (std::size_t g = 0; g < out.size(); ++g) {
    std::vector<double> cov, len, grp, rt, sz;
    for (const auto* r : members[g]) {
      cov.push_back(r->coverage);
      len.push_back(r->mean_length);
      grp.push_back(r->group_coverage_min);
      rt.push_back(r->runtime_seconds);
      if (r->set_size) sz.push_back(*r->set_size);
    }
    out[g].coverage = summarize(cov);
    out[g].length = summarize(len);
    out[g].group_coverage = summarize(grp);
    out[g].runtime = summarize(rt);
    if (!sz.empty()) out[g].set_size = summarize(sz);
    out[g].seeds = members[g].size();
  }
  return out;
}

ReportFormat report_format_from_string(const std::string& s) {
  if (s == "json") return ReportFormat::json;
  if (s == "csv") return ReportFormat::csv;
  if (s == "markdown" || s == "md") return ReportFormat::markdown;
  throw std::invalid_argument("unknown report format '" + s + "'");
}

namespace {

using nlohmann::ordered_json;

ordered_json row_to_json(const BenchReport& r) {
  ordered_json j;
  j["method"] = r.method;
  j["dataset"] = r.dataset;
  j["seed"] = r.seed;
  j["split_index"] = r.split_index;
  j["coverage"] = r.coverage;
  j["mean_length"] = r.mean_length;
  j["group_coverage_min"] = r.group_coverage_min;
  j["runtime_seconds"] = r.runtime_seconds;
  j["score_correlation"] = r.score_correlation ? ordered_json(*r.score_correlation) : ordered_json(nullptr);
  j["infinite_band_count"] = r.infinite_band_count;
  j["sound_length"] = r.sound_length ? ordered_json(*r.sound_length) : ordered_json(nullptr);
  j["set_size"] = r.set_size ? ordered_json(*r.set_size) : ordered_json(nullptr);
  j["floor_activations"] = r.floor_activations;
  return j;
}

std::optional<double> opt_real(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

std::string csv_real(std::optional<double> v) {
  if (!v) return "";
  std::ostringstream os;
  os.precision(17);
  os << *v;
  return os.str();
}

}  // namespace

std::string to_json(const std::vector<BenchReport>& rows) {
  ordered_json doc;
  doc["schema"] = kReportSchema;
  doc["rows"] = ordered_json::array();
  for (const auto& r : rows) doc["rows"].push_back(row_to_json(r));
  return doc.dump(2) + "\n";
}

std::vector<BenchReport> from_json(const std::string& text) {
  const auto doc = nlohmann::json::parse(text);
  if (doc.value("schema", "") != kReportSchema) throw std::runtime_error("from_json: unsupported report schema");
  std::vector<BenchReport> rows;
  for (const auto& j : doc.at("rows")) {
    BenchReport r;
    r.method = j.at("method").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.split_index = j.at("split_index").get<int>();
    r.coverage = j.at("coverage").get<double>();
    r.mean_length = j.at("mean_length").get<double>();
    r.group_coverage_min = j.at("group_coverage_min").get<double>();
    r.runtime_seconds = j.at("runtime_seconds").get<double>();
    r.score_correlation = opt_real(j, "score_correlation");
    r.infinite_band_count = j.at("infinite_band_count").get<std::size_t>();
    r.sound_length = opt_real(j, "sound_length");
    r.set_size = opt_real(j, "set_size");
    r.floor_activations = j.value("floor_activations", std::size_t{0});
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string to_csv(const std::vector<BenchReport>& rows) {
  std::ostringstream os;
  os << "method,dataset,seed,split_index,coverage,mean_length,group_coverage_min,runtime_seconds,"
        "score_correlation,infinite_band_count,sound_length,set_size,floor_activations\n";
  for (const auto& r : rows) {
    os << r.method << ',' << r.dataset << ',' << r.seed << ',' << r.split_index << ','
       << csv_real(r.coverage) << ',' << csv_real(r.mean_length) << ',' << csv_real(r.group_coverage_min)
       << ',' << csv_real(r.runtime_seconds) << ',' << csv_real(r.score_correlation) << ','
       << r.infinite_band_count << ',' << csv_real(r.sound_length) << ',' << csv_real(r.set_size) << ','
       << r.floor_activations << '\n';
  }
  return os.str();
}

std::string to_markdown(const std::vector<BenchReport>& rows) {
  const auto agg = aggregate(rows);
  std::ostringstream os;
  os << "| Dataset | Method | Split | Seeds | Coverage (%) | Length | Group coverage (%) |\n";
  os << "|---|---|---|---|---|---|---|\n";
  for (const auto& a : agg) {
    Summary cov = a.coverage, grp = a.group_coverage;
    cov.mean *= 100.0; cov.std *= 100.0;
    grp.mean *= 100.0; grp.std *= 100.0;
    os << "| " << a.dataset << " | " << a.method << " | "
       << (a.split_index < 0 ? std::string("-") : std::to_string(a.split_index)) << " | " << a.seeds
       << " | " << format_mean_std(cov, 3) << " | " << format_mean_std(a.length, 3) << " | "
       << format_mean_std(grp, 2) << " |\n";
  }

  // Runtime table, one row per dataset.
  std::vector<std::string> datasets;
  for (const auto& a : agg) {
    if (std::find(datasets.begin(), datasets.end(), a.dataset) == datasets.end()) datasets.push_back(a.dataset);
  }
  os << "\n| Dataset | Vanilla (s) | FCP (s) | FFCP (s) | FASTER |\n|---|---|---|---|---|\n";
  for (const auto& d : datasets) {
    auto find = [&](const char* method) -> const AggregateRow* {
      const AggregateRow* best = nullptr;
      for (const auto& a : agg) {
        if (a.dataset == d && a.method == method && (!best || a.split_index < best->split_index)) best = &a;
      }
      return best;
    };
    const auto* v = find("vanilla");
    const auto* f = find("fcp");
    const auto* ff = find("ffcp");
    auto cell = [](const AggregateRow* r) { return r ? format_mean_std(r->runtime, 4) : std::string("-"); };
    std::string ratio = "-";
    if (f && ff && ff->runtime.mean > 0.0) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.1fx", f->runtime.mean / ff->runtime.mean);
      ratio = buf;
    }
    os << "| " << d << " | " << cell(v) << " | " << cell(f) << " | " << cell(ff) << " | " << ratio << " |\n";
  }
  return os.str();
}

void emit_report(const std::vector<BenchReport>& rows, ReportFormat format, const std::string& path) {
  if (rows.empty()) throw std::invalid_argument("emit_report: no rows");
  for (const auto& r : rows) r.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("emit_report: cannot write '" + path + "'");
  switch (format) {
    case ReportFormat::json: out << to_json(rows); break;
    case ReportFormat::csv: out << to_csv(rows); break;
    case ReportFormat::markdown: out << to_markdown(rows); break;
  }
  if (!out) throw std::runtime_error("emit_report: write failed for '" + path + "'");
}

}  // namespace ffcp::bench
