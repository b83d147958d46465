#pragma once

// Evaluation metrics, timing, score diagnostics and report emission.

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ffcp/bands.hpp"

namespace ffcp::bench {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using bands::PredictionBand;

/// Fraction of test points whose band contains every coordinate of y.
double coverage(const std::vector<PredictionBand>& bands, const MatrixXd& y_test);

/// Per-point coverage indicators.
std::vector<bool> covered(const std::vector<PredictionBand>& bands, const MatrixXd& y_test);

struct LengthStats {
  double mean = 0.0;                 // over finite bands
  std::size_t infinite_count = 0;    // bands excluded from the mean
};

/// Mean over test points of the coordinate-averaged width. Inverted
/// (empty) intervals count as width 0.
LengthStats mean_band_length(const std::vector<PredictionBand>& bands);

struct GroupCoverage {
  double min = 0.0;
  std::vector<double> per_group;       // low, middle, high tertile of y
  std::vector<std::size_t> group_size;
};

/// Groups test points by the empirical tertiles of the scalar target; a value
/// equal to a tertile boundary goes to the lower group. Empty groups are
/// reported with size 0 and skipped for the minimum.
GroupCoverage group_coverage(const std::vector<PredictionBand>& bands, const MatrixXd& y_test);

/// Runs f and returns (result, elapsed seconds) on the monotonic clock.
template <class F>
auto time_phase(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  if constexpr (std::is_void_v<decltype(f())>) {
    f();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  } else {
    auto result = f();
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return std::make_pair(std::move(result), s);
  }
}

/// Pearson correlation. Throws on length mismatch, n < 2 or zero variance.
double pearson(const VectorXd& a, const VectorXd& b);

struct HolderConstants {
  double lipschitz = 1.0;
  double exponent = 1.0;
  double c = 1.0;
};

struct SquareConditionReport {
  std::string space;          // "output" or "feature"
  std::size_t n = 0;
  double quantile = 0.0;
  double mean_gap = 0.0;      // M[Q - s], signed
  double mean_abs_gap = 0.0;  // M|Q - s|
  double quantile_std = 0.0;  // spread of Q over bootstrap resamples
  HolderConstants holder;
};

struct SquareConditionCheck {
  SquareConditionReport output;
  SquareConditionReport feature;
  // Two sides of the expansion inequality:
  //   L * M|Q_f - s_f|^a  <  M[Q_o - s_o] - 2 max(L, 1) (c / sqrt(n))^min(a, 1)
  double expansion_lhs = 0.0;
  double expansion_rhs = 0.0;
};

SquareConditionCheck square_condition_check(const VectorXd& scores_output,
                                            const VectorXd& scores_feature, double alpha,
                                            HolderConstants holder = {},
                                            std::size_t n_bootstrap = 50, std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Reports

inline constexpr const char* kReportSchema = "ffcp-bench-report/1";

struct BenchReport {
  std::string method;
  std::string dataset;
  std::uint64_t seed = 0;
  int split_index = -1;  // -1 when not applicable
  double coverage = 0.0;
  double mean_length = 0.0;
  double group_coverage_min = 0.0;
  double runtime_seconds = 0.0;
  std::optional<double> score_correlation;
  std::size_t infinite_band_count = 0;
  std::optional<double> sound_length;      // FCP interval-bound band length
  std::optional<double> set_size;          // classification: mean set size
  std::size_t floor_activations = 0;

  void validate() const;
};

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1); 0 for a single value
  std::size_t count = 0;
};

Summary summarize(const std::vector<double>& values);
std::string format_mean_std(const Summary& s, int precision);

struct AggregateRow {
  std::string dataset;
  std::string method;
  int split_index = -1;
  Summary coverage, length, group_coverage, runtime;
  std::optional<Summary> set_size;
  std::size_t seeds = 0;
};

/// Groups rows by (dataset, method, split_index) in first-appearance order.
std::vector<AggregateRow> aggregate(const std::vector<BenchReport>& rows);

enum class ReportFormat { json, csv, markdown };
ReportFormat report_format_from_string(const std::string& s);

std::string to_json(const std::vector<BenchReport>& rows);
std::vector<BenchReport> from_json(const std::string& text);
std::string to_csv(const std::vector<BenchReport>& rows);
/// Coverage / length table and a runtime table with the FCP / FFCP ratio.
std::string to_markdown(const std::vector<BenchReport>& rows);

void emit_report(const std::vector<BenchReport>& rows, ReportFormat format, const std::string& path);

}  // namespace ffcp::bench
