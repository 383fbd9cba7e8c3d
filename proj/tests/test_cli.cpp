#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "compete/cli.hpp"
#include "compete/config.hpp"
#include "compete/harness.hpp"

namespace fs = std::filesystem;
using namespace compete;

namespace {

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv = {"compete_rl"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

fs::path fresh_dir(const std::string& leaf) {
  const fs::path dir = fs::temp_directory_path() / "compete_cli_tests" / leaf;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string tiny_config(const std::string& out_dir, const std::string& extra = "") {
  return std::string("{\n") +
         "  \"name\": \"clitest\",\n"
         "  \"env\": {\"kind\": \"point\", \"horizon\": 10},\n"
         "  \"total_iterations\": 2,\n"
         "  \"steps_per_agent\": 20,\n"
         "  \"eval_episodes\": 2,\n"
         "  \"seeds\": [0],\n"
         "  \"output_dir\": \"" + out_dir + "\"" + extra + "\n}\n";
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  CHECK(run_cli({"train", "--config", "/nonexistent/missing.json"}) == 2);
  CHECK(run_cli({"bogus-command"}) == 2);
  CHECK(run_cli({"train"}) == 2);  // --config is required

  const fs::path dir = fresh_dir("usage");
  write_file(dir / "bad_key.json", "{\"naem\": \"oops\"}");
  CHECK(run_cli({"train", "--config", (dir / "bad_key.json").string()}) == 2);

  write_file(dir / "bad_json.json", "{not json");
  CHECK(run_cli({"train", "--config", (dir / "bad_json.json").string()}) == 2);

  write_file(dir / "bad_mode.json", tiny_config((dir / "out").string()));
  CHECK(run_cli({"train", "--config", (dir / "bad_mode.json").string(), "--mode",
                 "Sh-Wrong"}) == 2);

  write_file(dir / "ok.json", tiny_config((dir / "out").string()));
  CHECK(run_cli({"eval", "--checkpoint", (dir / "nope.json").string()}) == 2);
  CHECK(run_cli({"plot", "--summary", (dir / "nope.csv").string()}) == 2);
  CHECK(run_cli({"compare", "--config", (dir / "ok.json").string()}) == 2);  // empty grid
}

TEST_CASE("config keys are validated recursively") {
  const fs::path dir = fresh_dir("keys");
  write_file(dir / "bad_env.json",
             "{\"env\": {\"kind\": \"point\", \"drag\": 0.1}}");
  CHECK(run_cli({"train", "--config", (dir / "bad_env.json").string()}) == 2);

  write_file(dir / "bad_ppo.json", "{\"ppo\": {\"gamma\": 0.99, \"lr\": 0.1}}");
  CHECK(run_cli({"train", "--config", (dir / "bad_ppo.json").string()}) == 2);

  write_file(dir / "bad_mode_obj.json", "{\"mode\": {\"sharing\": \"both\"}}");
  CHECK(run_cli({"train", "--config", (dir / "bad_mode_obj.json").string()}) == 2);
}

TEST_CASE("flags and config keys are equivalent") {
  const fs::path dir = fresh_dir("equiv");

  // everything in the config file
  write_file(dir / "full.json",
             tiny_config((dir / "out_config").string(),
                         ",\n  \"mode\": \"Sh-Decent-Comp\",\n  \"n_agents\": 2,\n"
                         "  \"seeds\": [3]"));
  CHECK(run_cli({"train", "--config", (dir / "full.json").string()}) == 0);

  // same run expressed through flag overrides
  write_file(dir / "base.json", tiny_config((dir / "out_flags").string()));
  CHECK(run_cli({"train", "--config", (dir / "base.json").string(), "--mode",
                 "Sh-Decent-Comp", "--agents", "2", "--seed", "3"}) == 0);

  const fs::path a =
      dir / "out_config" / "clitest" / "Sh-Decent-Comp_N2" / "seed3" / "metrics.csv";
  const fs::path b =
      dir / "out_flags" / "clitest" / "Sh-Decent-Comp_N2" / "seed3" / "metrics.csv";
  CHECK(read_file(a) == read_file(b));
}

TEST_CASE("the echoed effective config reproduces the run") {
  const fs::path dir = fresh_dir("echo");
  write_file(dir / "cfg.json",
             tiny_config((dir / "out1").string(), ",\n  \"mode\": \"Sh-Decent-Noi\",\n"
                                                  "  \"n_agents\": 2"));
  CHECK(run_cli({"train", "--config", (dir / "cfg.json").string()}) == 0);

  const fs::path echoed = dir / "out1" / "clitest" / "effective_config.json";
  REQUIRE(fs::exists(echoed));

  // the echo parses, and re-running it (redirected elsewhere) is bit-identical
  LoadedConfig loaded = load_config_file(echoed.string());
  loaded.spec.output_dir = (dir / "out2").string();
  run_experiment(loaded.spec);

  const fs::path a =
      dir / "out1" / "clitest" / "Sh-Decent-Noi_N2" / "seed0" / "metrics.csv";
  const fs::path b =
      dir / "out2" / "clitest" / "Sh-Decent-Noi_N2" / "seed0" / "metrics.csv";
  CHECK(read_file(a) == read_file(b));

  // and the echo itself is closed under re-echo
  write_effective_config(loaded.spec);
  LoadedConfig again =
      load_config_file((dir / "out2" / "clitest" / "effective_config.json").string());
  CHECK(config_to_json(again.spec) == config_to_json(loaded.spec));
}

TEST_CASE("eval command pads a competitively trained checkpoint") {
  const fs::path dir = fresh_dir("eval");
  write_file(dir / "cfg.json",
             tiny_config((dir / "out").string(), ",\n  \"mode\": \"Sh-Decent-Comp\",\n"
                                                 "  \"n_agents\": 3"));
  CHECK(run_cli({"train", "--config", (dir / "cfg.json").string()}) == 0);

  const fs::path ckpt =
      dir / "out" / "clitest" / "Sh-Decent-Comp_N3" / "seed0" / "checkpoint.json";
  REQUIRE(fs::exists(ckpt));
  CHECK(run_cli({"eval", "--checkpoint", ckpt.string(), "--episodes", "2"}) == 0);
  CHECK(run_cli({"eval", "--checkpoint", ckpt.string(), "--env", "point"}) == 0);
  // a point-trained input width cannot drive the stamina observation
  CHECK(run_cli({"eval", "--checkpoint", ckpt.string(), "--env", "stamina"}) == 1);
}

TEST_CASE("compare, grid alias and plot wire the harness") {
  const fs::path dir = fresh_dir("compare");
  write_file(dir / "cfg.json", tiny_config((dir / "out").string()));
  CHECK(run_cli({"compare", "--config", (dir / "cfg.json").string(), "--modes",
                 "Sh-Decent,Sh-Decent-Comp", "--agents", "1,2"}) == 0);

  const fs::path summary = dir / "out" / "clitest" / "summary.csv";
  REQUIRE(fs::exists(summary));
  CHECK(fs::exists(dir / "out" / "clitest" / "report.md"));
  CHECK(fs::exists(dir / "out" / "clitest" / "reward_PointRacer.svg"));
  CHECK(run_cli({"plot", "--summary", summary.string()}) == 0);

  // grid config block + alias; cells are already trained, so this reuses them
  write_file(dir / "cfg_grid.json",
             tiny_config((dir / "out").string(),
                         ",\n  \"grid\": {\"modes\": [\"Sh-Decent\"], "
                         "\"agent_counts\": [1, 2]}"));
  CHECK(run_cli({"grid", "--config", (dir / "cfg_grid.json").string()}) == 0);
}

TEST_CASE("selftest runs the invariant suite") {
  CHECK(run_cli({"selftest"}) == 0);
}
