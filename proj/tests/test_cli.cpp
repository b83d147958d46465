#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "ffcp/cli.hpp"

using namespace ffcp::cli;
namespace fs = std::filesystem;

namespace {

std::string error_of(const nlohmann::json& j, Command cmd) {
  try {
    validate(config_from_json(j, cmd), cmd);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

RunConfig small_run() {
  RunConfig c;
  c.dataset.n = 600;
  c.dataset.d_x = 5;
  c.model.hidden = {8, 8};
  c.model.epochs = 3;
  return c;
}

}  // namespace

TEST_CASE("config round trip") {
  RunConfig c;
  c.method = "fflcp";
  c.alpha = 0.05;
  c.seed = 9;
  c.sweep = true;
  c.localizer.bandwidth = 0.7;
  c.dataset.kind = "synthetic-hetero";
  const auto j = to_json(c, Command::run);
  CHECK(j.contains("localizer"));
  CHECK_FALSE(j.contains("fcp"));
  const auto back = config_from_json(nlohmann::json::parse(j.dump()), Command::run);
  CHECK(to_json(back, Command::run) == j);
  CHECK(back.sweep);
  CHECK(back.localizer.bandwidth == 0.7);

  RunConfig b;
  b.methods = {"vanilla", "ffcp", "fcp"};
  b.seeds = {3, 4};
  b.split_index = 1;
  b.fcp.n_samples = 16;
  const auto jb = to_json(b, Command::bench);
  const auto bb = config_from_json(nlohmann::json::parse(jb.dump()), Command::bench);
  CHECK(to_json(bb, Command::bench) == jb);
  CHECK(bb.fcp.n_samples == 16);
  CHECK(bb.split_index == 1);
}

TEST_CASE("field-level validation messages") {
  using nlohmann::json;
  CHECK(error_of(json{{"alpha", 1.5}}, Command::run).find("config.alpha") == 0);
  CHECK(error_of(json{{"alfa", 0.1}}, Command::run).find("config.alfa: unknown key") == 0);
  CHECK(error_of(json{{"model", {{"epochs", "ten"}}}}, Command::run).find("config.model.epochs") == 0);
  CHECK(error_of(json{{"method", "ffcp"}, {"fcp", json::object()}}, Command::run).find("config.fcp") == 0);
  CHECK(error_of(json{{"method", "fcp"}, {"fcp", {{"n_samples", 0}}}}, Command::run).find("config.fcp.n_samples") == 0);
  CHECK(error_of(json{{"method", "raps"}}, Command::run).find("config.dataset.kind") == 0);
  CHECK(error_of(json{{"method", "vanilla"}, {"split_index", "sweep"}}, Command::run).find("config.split_index") == 0);
  CHECK(error_of(json{{"split_index", 9}}, Command::run).find("config.split_index") == 0);
  CHECK(error_of(json{{"ratios", {0.5, 0.5, 0.5}}}, Command::run).find("config.ratios") == 0);
  CHECK(error_of(json{{"methods", {"ffcp"}}}, Command::run).find("config.methods") == 0);
  CHECK(error_of(json{{"seeds", json::array()}}, Command::bench).find("config.seeds") == 0);
  CHECK(error_of(json{{"method", "ffcp"}}, Command::run).empty());
}

TEST_CASE("default output directory") {
  setenv("FFCP_OUTPUT_DIR", "/tmp/ffcp-out", 1);
  CHECK(default_output_path("run", "markdown") == "/tmp/ffcp-out/ffcp-run.md");
  unsetenv("FFCP_OUTPUT_DIR");
  CHECK(default_output_path("bench", "json") == "./ffcp-bench.json");
}

TEST_CASE("gen-data writes a loadable csv") {
  const auto p = (fs::temp_directory_path() / "ffcp_cli_gen.csv").string();
  DatasetSpec s;
  s.kind = "synthetic-hetero";
  s.n = 50;
  s.d_x = 4;
  const auto d = cmd_gen_data(s, 7, p);
  const auto back = ffcp::data::load_csv(p, {"y"});
  CHECK(back.size() == 50);
  CHECK(back.targets == d.targets);
  CHECK_THROWS_AS(cmd_gen_data(s, 7, ""), ConfigError);
  fs::remove(p);
}

TEST_CASE("run: vanilla and last-split ffcp agree; sweep adds a best row") {
  auto c = small_run();
  const auto dir = fs::temp_directory_path();
  c.output.path = (dir / "ffcp_cli_run.json").string();
  std::ostringstream log;
  c.method = "vanilla";
  const auto v = cmd_run(c, log);
  c.method = "ffcp";
  c.split_index = 3;
  const auto f = cmd_run(c, log);
  CHECK(v[0].coverage == f[0].coverage);
  CHECK(v[0].mean_length == doctest::Approx(f[0].mean_length));

  c.split_index.reset();
  c.sweep = true;
  const auto s = cmd_run(c, log);
  REQUIRE(s.size() == 5);
  CHECK(s.back().method == "ffcp@best");
  for (std::size_t i = 0; i + 1 < s.size(); ++i) CHECK(s.back().mean_length <= s[i].mean_length);

  c.sweep = false;
  c.method = "fcp";
  c.fcp.n_samples = 16;
  const auto r = cmd_run(c, log);
  CHECK(r[0].sound_length.has_value());
  CHECK(r[0].score_correlation.has_value());
  fs::remove(c.output.path);
}

TEST_CASE("run saves and reloads a model") {
  auto c = small_run();
  const auto dir = fs::temp_directory_path();
  c.output.path = (dir / "ffcp_cli_model_run.json").string();
  c.model.save = (dir / "ffcp_cli_model.txt").string();
  std::ostringstream log;
  const auto a = cmd_run(c, log);
  c.model.load = c.model.save;
  c.model.save.clear();
  const auto b = cmd_run(c, log);
  CHECK(a[0].coverage == b[0].coverage);
  CHECK(a[0].mean_length == b[0].mean_length);
  CHECK(log.str().find("training") != std::string::npos);
  fs::remove(c.model.load);
  fs::remove(c.output.path);
}

TEST_CASE("bench aggregates and is independent of the job count") {
  auto c = small_run();
  c.methods = {"vanilla", "ffcp", "cqr"};
  c.seeds = {0, 1, 2};
  const auto dir = fs::temp_directory_path();
  c.output.path = (dir / "ffcp_cli_bench.json").string();
  std::ostringstream log;
  const auto one = cmd_bench(c, log);
  c.jobs = 3;
  const auto three = cmd_bench(c, log);
  REQUIRE(one.size() == 9);
  REQUIRE(three.size() == 9);
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].method == three[i].method);
    CHECK(one[i].seed == three[i].seed);
    CHECK(one[i].coverage == three[i].coverage);
    CHECK(one[i].mean_length == three[i].mean_length);
  }
  CHECK(ffcp::bench::aggregate(one).size() == 3);
  CHECK(fs::exists(dir / "ffcp_cli_bench.md"));
  fs::remove(dir / "ffcp_cli_bench.md");
  fs::remove(dir / "ffcp_cli_bench.json");
}
