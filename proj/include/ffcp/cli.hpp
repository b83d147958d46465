#pragma once

// Run configuration and the commands behind the `ffcp` executable.
//
// Config files are JSON objects with the same layout that `--print-config`
// emits:
//
//   {
//     "method": "ffcp",              // vanilla ffcp fcp cqr ffcqr lcp fflcp raps ffraps
//     "methods": ["vanilla", ...],   // bench only
//     "alpha": 0.1,
//     "seed": 0,
//     "seeds": [0, 1, ...],          // bench only
//     "jobs": 1,                     // bench only
//     "split_index": 2,              // integer, "sweep" or absent (model default)
//     "ratios": [0.5, 0.25, 0.25],
//     "scale_targets": true,
//     "dataset": {"kind": "synthetic", "n": 10000, "d_x": 100, "noise_scale": 1.0,
//                 "path": "", "targets": ["y"], "n_classes": 10, "spread": 0.6},
//     "model": {"hidden": [64, 64, 64, 64], "epochs": 100, "batch_size": 128,
//               "learning_rate": 0.001, "optimizer": "adam", "load": "", "save": ""},
//     "fcp": {...},                  // only with fcp
//     "raps": {...},                 // only with raps / ffraps
//     "localizer": {...},            // only with lcp / fflcp
//     "output": {"path": "", "format": "json"}
//   }
//
// Missing keys take defaults; unknown keys and method sections that do not
// apply to the selected methods are errors.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ffcp/bench.hpp"
#include "ffcp/data.hpp"

namespace ffcp::cli {

/// Validation failure naming the offending field, e.g. "config.alpha: ...".
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DatasetSpec {
  std::string kind = "synthetic";  // synthetic, synthetic-hetero, classification, csv
  std::size_t n = 10000;
  int d_x = 100;
  double noise_scale = 1.0;
  std::string path;
  std::vector<std::string> targets = {"y"};
  int n_classes = 10;
  double spread = 0.6;
};

struct ModelSection {
  std::vector<int> hidden = {64, 64, 64, 64};
  int epochs = 100;
  int batch_size = 128;
  double learning_rate = 1e-3;
  std::string optimizer = "adam";
  std::string load;  // read a saved model instead of training
  std::string save;
};

struct FcpSection {
  int max_iters = 200;
  double step_size = 1.0;
  double residual_tol = 1e-4;
  std::size_t n_samples = 1024;
  int ascent_steps = 20;
};

struct RapsSection {
  double lambda = 0.01;
  int k_reg = 1;
  double delta = 0.01;            // ffraps only; raps always uses 0
  std::string gradient = "top_logit";  // or frobenius
  bool largest_rank = false;
};

struct LocalizerSection {
  std::string space = "feature";  // or input
  std::optional<double> bandwidth;
};

struct OutputSection {
  std::string path;  // empty: $FFCP_OUTPUT_DIR (or .) / ffcp-<command>.<ext>
  std::string format = "json";
};

struct RunConfig {
  std::string method = "ffcp";
  std::vector<std::string> methods = {"vanilla", "ffcp", "fcp"};
  double alpha = 0.1;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  int jobs = 1;
  std::optional<int> split_index;
  bool sweep = false;
  std::array<double, 3> ratios = {0.5, 0.25, 0.25};
  bool scale_targets = true;
  DatasetSpec dataset;
  ModelSection model;
  FcpSection fcp;
  RapsSection raps;
  LocalizerSection localizer;
  OutputSection output;
};

enum class Command { run, bench };

/// Throws ConfigError with a field-level message.
void validate(const RunConfig& config, Command command);

nlohmann::ordered_json to_json(const RunConfig& config, Command command);
RunConfig config_from_json(const nlohmann::json& j, Command command);
RunConfig load_config(const std::string& path, Command command);

data::Dataset make_dataset(const DatasetSpec& spec, std::uint64_t seed);

/// Writes the generated dataset as CSV and returns it.
data::Dataset cmd_gen_data(const DatasetSpec& spec, std::uint64_t seed, const std::string& out);

/// Trains (or loads) the model, runs config.method and writes the report.
/// A split sweep yields one row per split followed by the shortest one
/// under the method name suffixed with "@best".
std::vector<bench::BenchReport> cmd_run(const RunConfig& config, std::ostream& log);

/// Every (method, seed) pair; writes <stem>.json and <stem>.md, plus
/// <stem>.csv when the format is csv. Rows are ordered by seed, then method,
/// independent of the job count.
std::vector<bench::BenchReport> cmd_bench(const RunConfig& config, std::ostream& log);

/// Output location for a command when config.output.path is empty.
std::string default_output_path(const std::string& command, const std::string& format);

}  // namespace ffcp::cli
