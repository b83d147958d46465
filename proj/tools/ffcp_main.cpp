// ffcp: gen-data | run | bench. Flags override values from --config.

#include <functional>
#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include "ffcp/cli.hpp"

using ffcp::cli::Command;
using ffcp::cli::RunConfig;

namespace {

using Override = std::function<void(RunConfig&)>;

// Registers a flag whose value, when given, is written through `field`.
template <class T, class F>
CLI::Option* flag(CLI::App* app, std::vector<Override>& overrides, const std::string& name, F field,
                  const std::string& help) {
  auto value = std::make_shared<T>();
  auto* opt = app->add_option(name, *value, help);
  overrides.push_back([opt, value, field](RunConfig& c) {
    if (opt->count() > 0) field(c) = *value;
  });
  return opt;
}

struct RunFlags {
  std::string config_path;
  bool print_config = false;
  std::string split;
  bool no_scale = false;
  bool largest_rank = false;
  double bandwidth = 0.0;
  CLI::Option* split_opt = nullptr;
  CLI::Option* no_scale_opt = nullptr;
  CLI::Option* largest_opt = nullptr;
  CLI::Option* bandwidth_opt = nullptr;
  std::vector<Override> overrides;
};

void add_common(CLI::App* app, RunFlags& f) {
  auto& o = f.overrides;
  app->add_option("--config", f.config_path, "JSON config file")->check(CLI::ExistingFile);
  app->add_flag("--print-config", f.print_config, "print the effective config and exit");
  flag<double>(app, o, "--alpha", [](RunConfig& c) -> auto& { return c.alpha; }, "miscoverage level");
  f.split_opt = app->add_option("--split-index", f.split, "split layer or 'sweep'");
  flag<std::array<double, 3>>(app, o, "--ratios", [](RunConfig& c) -> auto& { return c.ratios; },
                              "train/cal/test fractions");
  f.no_scale_opt = app->add_flag("--no-scale-targets", f.no_scale, "keep targets in original units");

  flag<std::string>(app, o, "--dataset", [](RunConfig& c) -> auto& { return c.dataset.kind; },
                    "synthetic | synthetic-hetero | classification | csv");
  flag<std::string>(app, o, "--data-path", [](RunConfig& c) -> auto& { return c.dataset.path; }, "CSV file");
  flag<std::vector<std::string>>(app, o, "--targets", [](RunConfig& c) -> auto& { return c.dataset.targets; },
                                 "CSV target columns");
  flag<std::size_t>(app, o, "--n", [](RunConfig& c) -> auto& { return c.dataset.n; }, "synthetic sample count");
  flag<int>(app, o, "--d-x", [](RunConfig& c) -> auto& { return c.dataset.d_x; }, "synthetic input dimension");
  flag<double>(app, o, "--noise-scale", [](RunConfig& c) -> auto& { return c.dataset.noise_scale; }, "noise scale");
  flag<int>(app, o, "--classes", [](RunConfig& c) -> auto& { return c.dataset.n_classes; }, "classification K");
  flag<double>(app, o, "--spread", [](RunConfig& c) -> auto& { return c.dataset.spread; }, "class center spread");

  flag<std::vector<int>>(app, o, "--hidden", [](RunConfig& c) -> auto& { return c.model.hidden; }, "hidden widths");
  flag<int>(app, o, "--epochs", [](RunConfig& c) -> auto& { return c.model.epochs; }, "training epochs");
  flag<int>(app, o, "--batch-size", [](RunConfig& c) -> auto& { return c.model.batch_size; }, "minibatch size");
  flag<double>(app, o, "--lr", [](RunConfig& c) -> auto& { return c.model.learning_rate; }, "learning rate");
  flag<std::string>(app, o, "--optimizer", [](RunConfig& c) -> auto& { return c.model.optimizer; }, "adam | sgd");

  flag<int>(app, o, "--fcp-iters", [](RunConfig& c) -> auto& { return c.fcp.max_iters; }, "FCP search iterations");
  flag<double>(app, o, "--fcp-step", [](RunConfig& c) -> auto& { return c.fcp.step_size; }, "FCP step size");
  flag<double>(app, o, "--fcp-tol", [](RunConfig& c) -> auto& { return c.fcp.residual_tol; }, "FCP residual tolerance");
  flag<std::size_t>(app, o, "--fcp-samples", [](RunConfig& c) -> auto& { return c.fcp.n_samples; },
                    "ball samples per test point");
  flag<int>(app, o, "--fcp-ascent", [](RunConfig& c) -> auto& { return c.fcp.ascent_steps; },
            "projected gradient steps after sampling");

  flag<double>(app, o, "--raps-lambda", [](RunConfig& c) -> auto& { return c.raps.lambda; }, "RAPS lambda");
  flag<int>(app, o, "--raps-kreg", [](RunConfig& c) -> auto& { return c.raps.k_reg; }, "RAPS k_reg");
  flag<double>(app, o, "--raps-delta", [](RunConfig& c) -> auto& { return c.raps.delta; }, "FFRAPS gradient weight");
  flag<std::string>(app, o, "--raps-gradient", [](RunConfig& c) -> auto& { return c.raps.gradient; },
                    "top_logit | frobenius");
  f.largest_opt = app->add_flag("--raps-largest-rank", f.largest_rank, "take tau as the k-th largest score");

  flag<std::string>(app, o, "--localizer-space", [](RunConfig& c) -> auto& { return c.localizer.space; },
                    "feature | input");
  f.bandwidth_opt = app->add_option("--bandwidth", f.bandwidth, "localizer bandwidth (default: median heuristic)");

  flag<std::string>(app, o, "--out", [](RunConfig& c) -> auto& { return c.output.path; },
                    "report path (default $FFCP_OUTPUT_DIR)");
  flag<std::string>(app, o, "--format", [](RunConfig& c) -> auto& { return c.output.format; },
                    "json | csv | markdown");
}

RunConfig resolve(const RunFlags& f, Command cmd) {
  RunConfig c = f.config_path.empty() ? RunConfig{} : ffcp::cli::load_config(f.config_path, cmd);
  for (const auto& apply : f.overrides) apply(c);
  if (f.split_opt->count() > 0) {
    if (f.split == "sweep") {
      c.sweep = true;
      c.split_index.reset();
    } else {
      try {
        std::size_t used = 0;
        c.split_index = std::stoi(f.split, &used);
        if (used != f.split.size()) throw std::invalid_argument(f.split);
      } catch (const std::exception&) {
        throw ffcp::cli::ConfigError("config.split_index: must be an integer or \"sweep\"");
      }
      c.sweep = false;
    }
  }
  if (f.no_scale_opt->count() > 0) c.scale_targets = false;
  if (f.largest_opt->count() > 0) c.raps.largest_rank = true;
  if (f.bandwidth_opt->count() > 0) c.localizer.bandwidth = f.bandwidth;
  ffcp::cli::validate(c, cmd);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fast feature conformal prediction toolkit"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset as CSV");
  ffcp::cli::DatasetSpec gen_spec;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  gen->add_option("--kind", gen_spec.kind, "synthetic | synthetic-hetero | classification")
      ->check(CLI::IsMember({"synthetic", "synthetic-hetero", "classification"}));
  gen->add_option("--n", gen_spec.n, "rows");
  gen->add_option("--seed", gen_seed, "seed");
  gen->add_option("--d-x", gen_spec.d_x, "input dimension");
  gen->add_option("--noise-scale", gen_spec.noise_scale, "noise scale");
  gen->add_option("--classes", gen_spec.n_classes, "classes (classification)");
  gen->add_option("--spread", gen_spec.spread, "class center spread (classification)");
  gen->add_option("--out", gen_out, "output CSV")->required();

  auto* run = app.add_subcommand("run", "train and run one method");
  RunFlags run_flags;
  add_common(run, run_flags);
  flag<std::string>(run, run_flags.overrides, "--method", [](RunConfig& c) -> auto& { return c.method; },
                    "vanilla ffcp fcp cqr ffcqr lcp fflcp raps ffraps");
  flag<std::uint64_t>(run, run_flags.overrides, "--seed", [](RunConfig& c) -> auto& { return c.seed; }, "seed");
  flag<std::string>(run, run_flags.overrides, "--load-model", [](RunConfig& c) -> auto& { return c.model.load; },
                    "use a saved model");
  flag<std::string>(run, run_flags.overrides, "--save-model", [](RunConfig& c) -> auto& { return c.model.save; },
                    "save the trained model");

  auto* bench = app.add_subcommand("bench", "run methods across seeds and aggregate");
  RunFlags bench_flags;
  add_common(bench, bench_flags);
  flag<std::vector<std::string>>(bench, bench_flags.overrides, "--methods",
                                 [](RunConfig& c) -> auto& { return c.methods; }, "methods to compare");
  flag<std::vector<std::uint64_t>>(bench, bench_flags.overrides, "--seeds",
                                   [](RunConfig& c) -> auto& { return c.seeds; }, "seed list");
  flag<int>(bench, bench_flags.overrides, "--jobs", [](RunConfig& c) -> auto& { return c.jobs; },
            "parallel seeds");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const auto d = ffcp::cli::cmd_gen_data(gen_spec, gen_seed, gen_out);
      std::cout << "wrote " << gen_out << ": " << d.size() << " rows, " << d.features.cols() << " features, "
                << d.targets.cols() << " target(s)\n";
      return 0;
    }
    const bool is_run = run->parsed();
    const Command cmd = is_run ? Command::run : Command::bench;
    const auto& flags = is_run ? run_flags : bench_flags;
    const RunConfig config = resolve(flags, cmd);
    if (flags.print_config) {
      std::cout << ffcp::cli::to_json(config, cmd).dump(2) << "\n";
      return 0;
    }
    if (is_run) {
      ffcp::cli::cmd_run(config, std::cerr);
    } else {
      const auto rows = ffcp::cli::cmd_bench(config, std::cerr);
      std::cout << ffcp::bench::to_markdown(rows);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
