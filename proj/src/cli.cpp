#include "ffcp/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "ffcp/experiment.hpp"

namespace ffcp::cli {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

const std::vector<std::string> kMethods = {"vanilla", "ffcp", "fcp", "cqr", "ffcqr",
                                           "lcp", "fflcp", "raps", "ffraps"};

bool is_classification(const std::string& m) { return m == "raps" || m == "ffraps"; }
bool is_quantile(const std::string& m) { return m == "cqr" || m == "ffcqr"; }
bool is_localized(const std::string& m) { return m == "lcp" || m == "fflcp"; }
bool uses_gradient(const std::string& m) {
  return m == "ffcp" || m == "fcp" || m == "ffcqr" || m == "fflcp" || m == "ffraps";
}

std::vector<std::string> selected(const RunConfig& c, Command cmd) {
  return cmd == Command::run ? std::vector<std::string>{c.method} : c.methods;
}

bool any_of(const std::vector<std::string>& ms, bool (*pred)(const std::string&)) {
  return std::any_of(ms.begin(), ms.end(), pred);
}
bool is_fcp(const std::string& m) { return m == "fcp"; }

[[noreturn]] void fail(const std::string& field, const std::string& msg) {
  throw ConfigError("config." + field + ": " + msg);
}

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(where.empty() ? "<root>" : where, "expected an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end()) {
      fail(where.empty() ? key : where + "." + key, "unknown key");
    }
  }
}

template <class T>
void read(const json& j, const std::string& where, const char* key, T& out) {
  if (!j.contains(key)) return;
  const std::string field = where.empty() ? key : where + "." + key;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(field, "wrong type (" + j.at(key).dump() + ")");
  }
}

std::string ext_of(const std::string& format) {
  if (format == "markdown") return "md";
  return format;
}

nn::OutputKind kind_for(const std::string& method) {
  if (is_quantile(method)) return nn::OutputKind::quantile_pair;
  if (is_classification(method)) return nn::OutputKind::logits;
  return nn::OutputKind::regression;
}

std::size_t default_split(const RunConfig& c) {
  // Classification nets split before their final two layers.
  const std::size_t layers = c.model.hidden.size() + 1;
  if (is_classification(c.method)) return layers >= 2 ? layers - 2 : 0;
  return std::min<std::size_t>(2, layers);
}

std::string dataset_name(const DatasetSpec& d) {
  if (d.kind == "csv") return std::filesystem::path(d.path).stem().string();
  return d.kind;
}

}  // namespace

std::string default_output_path(const std::string& command, const std::string& format) {
  const char* dir = std::getenv("FFCP_OUTPUT_DIR");
  const std::filesystem::path base = dir && *dir ? dir : ".";
  return (base / ("ffcp-" + command + "." + ext_of(format))).string();
}

void validate(const RunConfig& c, Command cmd) {
  const auto methods = selected(c, cmd);
  if (methods.empty()) fail("methods", "must list at least one method");
  for (const auto& m : methods) {
    if (std::find(kMethods.begin(), kMethods.end(), m) == kMethods.end()) {
      fail(cmd == Command::run ? "method" : "methods", "unknown method '" + m + "'");
    }
  }
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) fail("alpha", "must lie in (0, 1)");
  if (cmd == Command::bench) {
    if (c.seeds.empty()) fail("seeds", "must list at least one seed");
    if (c.jobs < 1) fail("jobs", "must be >= 1");
    if (!c.model.load.empty()) fail("model.load", "not supported by bench");
    if (!c.model.save.empty()) fail("model.save", "not supported by bench");
    if (c.sweep) fail("split_index", "sweep is only supported by run");
  }
  double total = 0.0;
  for (double r : c.ratios) {
    if (!(r > 0.0)) fail("ratios", "entries must be positive");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) fail("ratios", "must sum to 1");

  const auto& d = c.dataset;
  static const std::set<std::string> kinds = {"synthetic", "synthetic-hetero", "classification", "csv"};
  if (!kinds.count(d.kind)) fail("dataset.kind", "unknown kind '" + d.kind + "'");
  if (d.kind == "csv") {
    if (d.path.empty()) fail("dataset.path", "required for csv datasets");
    if (d.targets.empty()) fail("dataset.targets", "required for csv datasets");
  } else {
    if (d.n < 3) fail("dataset.n", "must be >= 3");
    if (d.d_x < 1) fail("dataset.d_x", "must be >= 1");
  }
  if (d.kind == "classification" && d.n_classes < 2) fail("dataset.n_classes", "must be >= 2");
  const bool wants_cls = any_of(methods, is_classification);
  const bool wants_reg = std::any_of(methods.begin(), methods.end(), [](const std::string& m) { return !is_classification(m); });
  if (wants_cls && wants_reg) fail("methods", "cannot mix classification and regression methods");
  if (wants_cls && d.kind != "classification" && d.kind != "csv") {
    fail("dataset.kind", "raps / ffraps need a classification dataset");
  }
  if (wants_reg && d.kind == "classification") fail("dataset.kind", "regression methods need a regression dataset");

  const auto& m = c.model;
  if (m.hidden.empty()) fail("model.hidden", "needs at least one hidden layer");
  for (int h : m.hidden) {
    if (h < 1) fail("model.hidden", "widths must be >= 1");
  }
  if (m.epochs < 0) fail("model.epochs", "must be >= 0");
  if (m.batch_size < 1) fail("model.batch_size", "must be >= 1");
  if (!(m.learning_rate > 0.0)) fail("model.learning_rate", "must be > 0");
  if (m.optimizer != "adam" && m.optimizer != "sgd") fail("model.optimizer", "must be adam or sgd");

  if (c.split_index) {
    const int layers = int(m.hidden.size()) + 1;
    if (*c.split_index < 0 || *c.split_index > layers) {
      fail("split_index", "must lie in [0, " + std::to_string(layers) + "]");
    }
  }
  if (c.sweep && !uses_gradient(c.method)) fail("split_index", "sweep needs a gradient-based method");

  if (c.fcp.max_iters < 1) fail("fcp.max_iters", "must be >= 1");
  if (!(c.fcp.step_size > 0.0)) fail("fcp.step_size", "must be > 0");
  if (!(c.fcp.residual_tol > 0.0)) fail("fcp.residual_tol", "must be > 0");
  if (c.fcp.n_samples < 1) fail("fcp.n_samples", "must be >= 1");
  if (c.fcp.ascent_steps < 0) fail("fcp.ascent_steps", "must be >= 0");

  if (c.raps.lambda < 0.0) fail("raps.lambda", "must be >= 0");
  if (c.raps.k_reg < 0) fail("raps.k_reg", "must be >= 0");
  if (c.raps.delta < 0.0) fail("raps.delta", "must be >= 0");
  if (c.raps.gradient != "top_logit" && c.raps.gradient != "frobenius") {
    fail("raps.gradient", "must be top_logit or frobenius");
  }
  if (c.localizer.space != "feature" && c.localizer.space != "input") fail("localizer.space", "must be feature or input");
  if (c.localizer.bandwidth && !(*c.localizer.bandwidth > 0.0)) fail("localizer.bandwidth", "must be > 0");

  static const std::set<std::string> formats = {"json", "csv", "markdown"};
  if (!formats.count(c.output.format)) fail("output.format", "must be json, csv or markdown");
}

ordered_json to_json(const RunConfig& c, Command cmd) {
  ordered_json j;
  const auto methods = selected(c, cmd);
  if (cmd == Command::run) {
    j["method"] = c.method;
    j["seed"] = c.seed;
  } else {
    j["methods"] = c.methods;
    j["seeds"] = c.seeds;
    j["jobs"] = c.jobs;
  }
  j["alpha"] = c.alpha;
  if (c.sweep) {
    j["split_index"] = "sweep";
  } else if (c.split_index) {
    j["split_index"] = *c.split_index;
  }
  j["ratios"] = c.ratios;
  j["scale_targets"] = c.scale_targets;
  const auto& d = c.dataset;
  j["dataset"] = {{"kind", d.kind}, {"n", d.n}, {"d_x", d.d_x}, {"noise_scale", d.noise_scale},
                  {"path", d.path}, {"targets", d.targets}, {"n_classes", d.n_classes}, {"spread", d.spread}};
  const auto& m = c.model;
  j["model"] = {{"hidden", m.hidden}, {"epochs", m.epochs}, {"batch_size", m.batch_size},
                {"learning_rate", m.learning_rate}, {"optimizer", m.optimizer}, {"load", m.load}, {"save", m.save}};
  if (any_of(methods, is_fcp)) {
    j["fcp"] = {{"max_iters", c.fcp.max_iters}, {"step_size", c.fcp.step_size},
                {"residual_tol", c.fcp.residual_tol}, {"n_samples", c.fcp.n_samples},
                {"ascent_steps", c.fcp.ascent_steps}};
  }
  if (any_of(methods, is_classification)) {
    j["raps"] = {{"lambda", c.raps.lambda}, {"k_reg", c.raps.k_reg}, {"delta", c.raps.delta},
                 {"gradient", c.raps.gradient}, {"largest_rank", c.raps.largest_rank}};
  }
  if (any_of(methods, is_localized)) {
    ordered_json loc = {{"space", c.localizer.space}};
    loc["bandwidth"] = c.localizer.bandwidth ? ordered_json(*c.localizer.bandwidth) : ordered_json(nullptr);
    j["localizer"] = loc;
  }
  j["output"] = {{"path", c.output.path}, {"format", c.output.format}};
  return j;
}

RunConfig config_from_json(const json& j, Command cmd) {
  RunConfig c;
  check_keys(j, "", {"method", "methods", "alpha", "seed", "seeds", "jobs", "split_index", "ratios",
                     "scale_targets", "dataset", "model", "fcp", "raps", "localizer", "output"});
  if (cmd == Command::run) {
    if (j.contains("methods")) fail("methods", "bench only; use method");
    if (j.contains("seeds")) fail("seeds", "bench only; use seed");
    if (j.contains("jobs")) fail("jobs", "bench only");
  } else {
    if (j.contains("method")) fail("method", "run only; use methods");
    if (j.contains("seed")) fail("seed", "run only; use seeds");
  }
  read(j, "", "method", c.method);
  read(j, "", "methods", c.methods);
  read(j, "", "alpha", c.alpha);
  read(j, "", "seed", c.seed);
  read(j, "", "seeds", c.seeds);
  read(j, "", "jobs", c.jobs);
  if (j.contains("split_index")) {
    const auto& s = j.at("split_index");
    if (s.is_string() && s.get<std::string>() == "sweep") {
      c.sweep = true;
    } else if (s.is_number_integer()) {
      c.split_index = s.get<int>();
    } else {
      fail("split_index", "must be an integer or \"sweep\"");
    }
  }
  read(j, "", "ratios", c.ratios);
  read(j, "", "scale_targets", c.scale_targets);

  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    check_keys(d, "dataset", {"kind", "n", "d_x", "noise_scale", "path", "targets", "n_classes", "spread"});
    read(d, "dataset", "kind", c.dataset.kind);
    read(d, "dataset", "n", c.dataset.n);
    read(d, "dataset", "d_x", c.dataset.d_x);
    read(d, "dataset", "noise_scale", c.dataset.noise_scale);
    read(d, "dataset", "path", c.dataset.path);
    read(d, "dataset", "targets", c.dataset.targets);
    read(d, "dataset", "n_classes", c.dataset.n_classes);
    read(d, "dataset", "spread", c.dataset.spread);
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    check_keys(m, "model", {"hidden", "epochs", "batch_size", "learning_rate", "optimizer", "load", "save"});
    read(m, "model", "hidden", c.model.hidden);
    read(m, "model", "epochs", c.model.epochs);
    read(m, "model", "batch_size", c.model.batch_size);
    read(m, "model", "learning_rate", c.model.learning_rate);
    read(m, "model", "optimizer", c.model.optimizer);
    read(m, "model", "load", c.model.load);
    read(m, "model", "save", c.model.save);
  }
  const auto methods = selected(c, cmd);
  if (j.contains("fcp")) {
    if (!any_of(methods, is_fcp)) fail("fcp", "section only applies to method fcp");
    const auto& f = j.at("fcp");
    check_keys(f, "fcp", {"max_iters", "step_size", "residual_tol", "n_samples", "ascent_steps"});
    read(f, "fcp", "max_iters", c.fcp.max_iters);
    read(f, "fcp", "step_size", c.fcp.step_size);
    read(f, "fcp", "residual_tol", c.fcp.residual_tol);
    read(f, "fcp", "n_samples", c.fcp.n_samples);
    read(f, "fcp", "ascent_steps", c.fcp.ascent_steps);
  }
  if (j.contains("raps")) {
    if (!any_of(methods, is_classification)) fail("raps", "section only applies to methods raps / ffraps");
    const auto& r = j.at("raps");
    check_keys(r, "raps", {"lambda", "k_reg", "delta", "gradient", "largest_rank"});
    read(r, "raps", "lambda", c.raps.lambda);
    read(r, "raps", "k_reg", c.raps.k_reg);
    read(r, "raps", "delta", c.raps.delta);
    read(r, "raps", "gradient", c.raps.gradient);
    read(r, "raps", "largest_rank", c.raps.largest_rank);
  }
  if (j.contains("localizer")) {
    if (!any_of(methods, is_localized)) fail("localizer", "section only applies to methods lcp / fflcp");
    const auto& l = j.at("localizer");
    check_keys(l, "localizer", {"space", "bandwidth"});
    read(l, "localizer", "space", c.localizer.space);
    if (l.contains("bandwidth") && !l.at("bandwidth").is_null()) {
      double h = 0.0;
      read(l, "localizer", "bandwidth", h);
      c.localizer.bandwidth = h;
    }
  }
  if (j.contains("output")) {
    const auto& o = j.at("output");
    check_keys(o, "output", {"path", "format"});
    read(o, "output", "path", c.output.path);
    read(o, "output", "format", c.output.format);
  }
  return c;
}

RunConfig load_config(const std::string& path, Command cmd) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config: '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j, cmd);
}

data::Dataset make_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  if (spec.kind == "synthetic") {
    data::SyntheticOptions o;
    o.d_x = spec.d_x;
    o.noise_scale = spec.noise_scale;
    return data::gen_synthetic(spec.n, seed, o);
  }
  if (spec.kind == "synthetic-hetero") {
    data::HeteroOptions o;
    o.d_x = spec.d_x;
    o.noise_scale = spec.noise_scale;
    return data::gen_synthetic_hetero(spec.n, seed, o);
  }
  if (spec.kind == "classification") {
    return data::gen_classification(spec.n, spec.n_classes, spec.d_x, spec.spread, seed);
  }
  if (spec.kind == "csv") return data::load_csv(spec.path, spec.targets);
  fail("dataset.kind", "unknown kind '" + spec.kind + "'");
}

data::Dataset cmd_gen_data(const DatasetSpec& spec, std::uint64_t seed, const std::string& out) {
  if (out.empty()) throw ConfigError("gen-data: --out is required");
  if (spec.kind == "csv") fail("dataset.kind", "gen-data cannot generate csv datasets");
  auto d = make_dataset(spec, seed);
  data::save_csv(d, out);
  return d;
}

namespace {

struct SeedContext {
  const RunConfig& config;
  std::uint64_t seed;
  experiment::Folds folds;
  std::string dataset;
  int n_classes = 0;
  std::map<nn::OutputKind, nn::MlpModel> models;

  SeedContext(const RunConfig& c, std::uint64_t s) : config(c), seed(s) {
    const auto d = make_dataset(c.dataset, s);
    const bool cls = is_classification(c.method) ||
                     std::any_of(c.methods.begin(), c.methods.end(), is_classification);
    if (cls) {
      n_classes = int(d.targets.maxCoeff()) + 1;
      if (c.dataset.kind == "classification") n_classes = std::max(n_classes, c.dataset.n_classes);
    }
    folds = experiment::make_folds(d, c.ratios, s, c.scale_targets && !cls);
    dataset = dataset_name(c.dataset);
  }

  const nn::MlpModel& model(nn::OutputKind kind, std::size_t split, std::ostream* log) {
    auto it = models.find(kind);
    if (it != models.end()) return it->second;
    nn::MlpModel m;
    if (!config.model.load.empty()) {
      m = nn::load_model(config.model.load);
      if (m.output_kind() != kind) throw ConfigError("config.model.load: model kind does not match the method");
      if (m.input_dim() != folds.x_train.cols()) throw ConfigError("config.model.load: input dimension mismatch");
    } else {
      experiment::ModelSpec spec;
      spec.hidden = config.model.hidden;
      spec.split_index = split;
      spec.train.epochs = config.model.epochs;
      spec.train.batch_size = config.model.batch_size;
      spec.train.learning_rate = config.model.learning_rate;
      spec.train.optimizer = config.model.optimizer == "sgd" ? nn::Optimizer::sgd : nn::Optimizer::adam;
      spec.train.seed = seed;
      if (log) *log << "training " << nn::to_string(kind) << " model (seed " << seed << ")\n";
      m = experiment::fit_model(folds, spec, kind, n_classes);
      if (!config.model.save.empty()) nn::save_model(m, config.model.save);
    }
    return models.emplace(kind, std::move(m)).first->second;
  }
};

experiment::LocalizerConfig localizer(const RunConfig& c) {
  experiment::LocalizerConfig loc;
  loc.space = c.localizer.space == "input" ? calib::LocalizerSpace::input : calib::LocalizerSpace::feature;
  loc.bandwidth = c.localizer.bandwidth;
  return loc;
}

bench::BenchReport run_method(SeedContext& ctx, const std::string& method, std::size_t split, std::ostream* log) {
  const auto& c = ctx.config;
  const auto& base = ctx.model(kind_for(method), split, log);
  const auto m = base.with_split(std::min(split, base.num_layers()));
  const int split_out = uses_gradient(method) ? int(m.split_index()) : -1;

  if (is_classification(method)) {
    raps::RapsConfig rc;
    rc.alpha = c.alpha;
    rc.lambda = c.raps.lambda;
    rc.k_reg = c.raps.k_reg;
    rc.delta = method == "ffraps" ? c.raps.delta : 0.0;
    rc.largest_rank = c.raps.largest_rank;
    const auto g = c.raps.gradient == "frobenius" ? experiment::ClassGradient::frobenius
                                                  : experiment::ClassGradient::top_logit;
    auto run = experiment::run_raps(m, ctx.folds, rc, g);
    run.method = method;
    return experiment::to_report(run, ctx.folds, ctx.dataset, ctx.seed, split_out);
  }

  experiment::MethodRun run;
  std::optional<double> corr;
  if (method == "vanilla") run = experiment::run_vanilla(m, ctx.folds, c.alpha);
  else if (method == "ffcp") run = experiment::run_ffcp(m, ctx.folds, c.alpha);
  else if (method == "cqr") run = experiment::run_cqr(m, ctx.folds, c.alpha);
  else if (method == "ffcqr") run = experiment::run_ffcqr(m, ctx.folds, c.alpha);
  else if (method == "lcp") run = experiment::run_lcp(m, ctx.folds, c.alpha, localizer(c));
  else if (method == "fflcp") run = experiment::run_fflcp(m, ctx.folds, c.alpha, localizer(c));
  else if (method == "fcp") {
    fcp::PipelineConfig pc;
    pc.alpha = c.alpha;
    pc.search.max_iters = c.fcp.max_iters;
    pc.search.step_size = c.fcp.step_size;
    pc.search.residual_tol = c.fcp.residual_tol;
    pc.sampling.n_samples = c.fcp.n_samples;
    pc.sampling.ascent_steps = c.fcp.ascent_steps;
    pc.sampling.seed = ctx.seed;
    run = experiment::run_fcp(m, ctx.folds, pc);
    if (m.output_dim() == 1) {
      const auto ff = scores::ffcp_scores(m, ctx.folds.x_cal, ctx.folds.y_cal);
      try {
        corr = bench::pearson(run.cal_scores.scores.col(0), ff.scores.col(0));
      } catch (const std::invalid_argument&) {
        // constant scores: correlation undefined
      }
    }
  }
  auto rep = experiment::to_report(run, ctx.folds, ctx.dataset, ctx.seed, split_out);
  rep.score_correlation = corr;
  return rep;
}

std::string resolved_path(const RunConfig& c, const std::string& command) {
  return c.output.path.empty() ? default_output_path(command, c.output.format) : c.output.path;
}

}  // namespace

std::vector<bench::BenchReport> cmd_run(const RunConfig& config, std::ostream& log) {
  validate(config, Command::run);
  SeedContext ctx(config, config.seed);
  std::vector<bench::BenchReport> rows;
  const std::size_t dflt = config.split_index ? std::size_t(*config.split_index) : default_split(config);
  if (config.sweep) {
    const auto& base = ctx.model(kind_for(config.method), dflt, &log);
    for (std::size_t s = 0; s <= base.num_layers(); ++s) rows.push_back(run_method(ctx, config.method, s, &log));
    auto best = *std::min_element(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
      return a.mean_length < b.mean_length;
    });
    best.method += "@best";
    rows.push_back(best);
  } else {
    rows.push_back(run_method(ctx, config.method, dflt, &log));
  }
  const auto path = resolved_path(config, "run");
  bench::emit_report(rows, bench::report_format_from_string(config.output.format), path);
  for (const auto& r : rows) {
    log << r.method << " split " << r.split_index << ": coverage " << r.coverage << ", length " << r.mean_length
        << ", " << r.runtime_seconds << " s\n";
  }
  log << "wrote " << path << "\n";
  return rows;
}

std::vector<bench::BenchReport> cmd_bench(const RunConfig& config, std::ostream& log) {
  validate(config, Command::bench);
  std::vector<std::vector<bench::BenchReport>> per_seed(config.seeds.size());
  std::vector<std::string> errors(config.seeds.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  const auto worker = [&] {
    for (std::size_t i = next++; i < config.seeds.size(); i = next++) {
      try {
        RunConfig c = config;
        c.method = config.methods.front();
        SeedContext ctx(c, config.seeds[i]);
        for (const auto& m : config.methods) {
          c.method = m;
          const std::size_t split = config.split_index ? std::size_t(*config.split_index) : default_split(c);
          per_seed[i].push_back(run_method(ctx, m, split, nullptr));
          std::lock_guard<std::mutex> lock(log_mutex);
          const auto& r = per_seed[i].back();
          log << "seed " << config.seeds[i] << " " << m << ": coverage " << r.coverage << ", length "
              << r.mean_length << ", " << r.runtime_seconds << " s\n";
        }
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const int jobs = std::min<int>(config.jobs, int(config.seeds.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) throw std::runtime_error("seed " + std::to_string(config.seeds[i]) + ": " + errors[i]);
  }

  std::vector<bench::BenchReport> rows;
  for (auto& s : per_seed) rows.insert(rows.end(), s.begin(), s.end());

  auto stem = std::filesystem::path(resolved_path(config, "bench"));
  stem.replace_extension();
  bench::emit_report(rows, bench::ReportFormat::json, stem.string() + ".json");
  bench::emit_report(rows, bench::ReportFormat::markdown, stem.string() + ".md");
  if (config.output.format == "csv") bench::emit_report(rows, bench::ReportFormat::csv, stem.string() + ".csv");
  log << "wrote " << stem.string() << ".{json,md" << (config.output.format == "csv" ? ",csv" : "") << "}\n";
  return rows;
}

}  // namespace ffcp::cli
