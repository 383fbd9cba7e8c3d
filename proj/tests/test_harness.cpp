#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "compete/csv.hpp"
#include "compete/harness.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace compete;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path fresh_dir(const std::string& leaf) {
  const fs::path dir = fs::temp_directory_path() / "compete_harness_tests" / leaf;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ExperimentSpec tiny_spec(const std::string& out_dir) {
  ExperimentSpec spec;
  spec.name = "tiny";
  spec.env = make_race_config(EnvKind::PointRacer, 1);
  spec.env.horizon = 10;
  spec.steps_per_agent = 20;
  spec.eval_episodes = 2;
  spec.total_iterations = 3;
  spec.seeds = {0, 1};
  spec.output_dir = out_dir;
  return spec;
}

int count_rows(const std::string& csv) {
  int rows = -1;  // discount the header
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  return rows;
}

}  // namespace

TEST_CASE("metrics rows round-trip through CSV") {
  MetricsRow row;
  row.iteration = 12;
  row.env_steps_total = 60000;
  row.mode = "3A-Sh-Decent-Comp";
  row.n_agents = 3;
  row.seed = 7;
  row.train_mean_ep_reward = 123.456789012345;
  row.eval_mean_ep_reward = -0.25;
  row.eval_std = 1e-9;
  row.policy_loss = -0.001;
  row.value_loss = 17.0;
  row.entropy = 1.4189385332046727;
  row.clip_fraction = 0.125;
  row.lr = 0.0005;

  MetricsRow back = metrics_row_from_csv(metrics_csv_row(row));
  CHECK(back.iteration == row.iteration);
  CHECK(back.env_steps_total == row.env_steps_total);
  CHECK(back.mode == row.mode);
  CHECK(back.seed == row.seed);
  CHECK(back.train_mean_ep_reward == row.train_mean_ep_reward);
  CHECK(back.eval_std == row.eval_std);
  CHECK(back.entropy == row.entropy);
}

TEST_CASE("run_experiment writes one row per iteration per seed") {
  const fs::path dir = fresh_dir("rows");
  ExperimentSpec spec = tiny_spec(dir.string());

  ExperimentResult result = run_experiment(spec);
  REQUIRE(result.outcomes.size() == 2);
  for (const SeedOutcome& outcome : result.outcomes) CHECK(outcome.completed);

  int total_rows = 0;
  for (uint64_t seed : {0, 1}) {
    const std::string csv = read_file(fs::path(seed_dir(spec, seed)) / "metrics.csv");
    CHECK(csv.find(metrics_csv_header()) == 0);
    CHECK(csv.find("\r") == std::string::npos);  // LF endings
    total_rows += count_rows(csv);
    CHECK(fs::exists(fs::path(seed_dir(spec, seed)) / "checkpoint.json"));
    CHECK(fs::exists(fs::path(seed_dir(spec, seed)) / "manifest.json"));
  }
  CHECK(total_rows == 6);  // 2 seeds x 3 iterations

  // env_steps_total is monotone within a run
  const std::string csv = read_file(fs::path(seed_dir(spec, 0)) / "metrics.csv");
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  long prev = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    MetricsRow row = metrics_row_from_csv(line);
    CHECK(row.env_steps_total > prev);
    prev = row.env_steps_total;
  }
}

TEST_CASE("identical specs produce byte-identical metrics") {
  const fs::path dir_a = fresh_dir("det_a");
  const fs::path dir_b = fresh_dir("det_b");
  ExperimentSpec a = tiny_spec(dir_a.string());
  ExperimentSpec b = tiny_spec(dir_b.string());
  run_experiment(a);
  run_experiment(b);
  for (uint64_t seed : {0, 1}) {
    CHECK(read_file(fs::path(seed_dir(a, seed)) / "metrics.csv") ==
          read_file(fs::path(seed_dir(b, seed)) / "metrics.csv"));
    CHECK(read_file(fs::path(seed_dir(a, seed)) / "checkpoint.json") ==
          read_file(fs::path(seed_dir(b, seed)) / "checkpoint.json"));
  }
}

TEST_CASE("resuming skips completed seeds") {
  const fs::path dir = fresh_dir("resume");
  ExperimentSpec first = tiny_spec(dir.string());
  first.seeds = {0};
  run_experiment(first);

  const fs::path seed0 = seed_dir(first, 0);
  const std::string before = read_file(seed0 / "metrics.csv");
  std::ofstream(seed0 / "sentinel") << "untouched";

  ExperimentSpec second = tiny_spec(dir.string());  // seeds {0, 1}
  ExperimentResult result = run_experiment(second);
  CHECK(result.outcomes[0].skipped);
  CHECK(result.outcomes[0].completed);
  CHECK_FALSE(result.outcomes[1].skipped);
  CHECK(result.outcomes[1].completed);
  CHECK(fs::exists(seed0 / "sentinel"));
  CHECK(read_file(seed0 / "metrics.csv") == before);
}

TEST_CASE("grid arithmetic, collapse at one agent, and summary recompute") {
  const fs::path dir = fresh_dir("grid");
  ExperimentSpec base = tiny_spec(dir.string());
  base.name = "grid";
  base.env = make_race_config(EnvKind::PointRacer, 1);
  base.env.horizon = 10;

  const std::vector<std::string> modes = {"Sh-Decent", "Sh-Decent-Comp"};
  const std::vector<int> counts = {1, 2};
  GridSummary summary = run_grid(base, modes, counts);

  // |modes| x |counts| rows, N=1 recorded once and referenced twice
  REQUIRE(summary.cells.size() == 4);
  CHECK(summary.cells[0].mode == "SA");
  CHECK(summary.cells[2].mode == "SA");
  CHECK(summary.cells[0].mean == summary.cells[2].mean);
  CHECK(fs::exists(dir / "grid" / "SA_N1"));
  CHECK(fs::exists(dir / "grid" / "Sh-Decent_N2"));
  CHECK(fs::exists(dir / "grid" / "Sh-Decent-Comp_N2"));
  int cell_dirs = 0;
  for (const auto& entry : fs::directory_iterator(dir / "grid"))
    if (entry.is_directory()) ++cell_dirs;
  CHECK(cell_dirs == 3);  // SA_N1 shared by both modes

  for (const CellSummary& cell : summary.cells) {
    CHECK(cell.n_seeds == 2);
    CHECK(cell.n_effective == 2);
    REQUIRE(cell.curve_mean.size() == 3);

    // summary mean equals the arithmetic mean of per-seed window means,
    // recomputed here straight from the raw CSV
    double acc = 0.0;
    for (uint64_t seed : cell.seeds) {
      ExperimentSpec spec = base;
      spec.flags = canonical_flags(mode_from_token(cell.mode_token), cell.n_agents);
      spec.env.n_agents = cell.n_agents;
      const std::string csv = read_file(fs::path(seed_dir(spec, seed)) / "metrics.csv");
      std::istringstream in(csv);
      std::string line;
      std::getline(in, line);
      std::vector<double> evals;
      while (std::getline(in, line))
        if (!line.empty()) evals.push_back(metrics_row_from_csv(line).eval_mean_ep_reward);
      const int window = convergence_window_rows(static_cast<int>(evals.size()));
      double wsum = 0.0;
      for (size_t k = evals.size() - static_cast<size_t>(window); k < evals.size(); ++k)
        wsum += evals[k];
      acc += wsum / window;
    }
    CHECK(cell.mean == doctest::Approx(acc / cell.seeds.size()).epsilon(1e-12));
  }

  // summary.csv exists and matches the in-memory summary
  const std::string summary_csv = read_file(dir / "grid" / "summary.csv");
  CHECK(count_rows(summary_csv) == 4);

  CHECK_THROWS_WITH_AS(run_grid(base, {}, {1}), "empty grid", std::invalid_argument);
  CHECK_THROWS_WITH_AS(run_grid(base, modes, {}), "empty grid", std::invalid_argument);
}

TEST_CASE("permuting the seed list leaves every aggregate identical") {
  const fs::path dir_a = fresh_dir("perm_a");
  const fs::path dir_b = fresh_dir("perm_b");

  ExperimentSpec a = tiny_spec(dir_a.string());
  a.name = "perm";
  a.seeds = {0, 1, 2};
  ExperimentSpec b = tiny_spec(dir_b.string());
  b.name = "perm";
  b.seeds = {2, 0, 1};

  run_grid(a, {"Sh-Decent"}, {2});
  run_grid(b, {"Sh-Decent"}, {2});
  CHECK(read_file(dir_a / "perm" / "summary.csv") ==
        read_file(dir_b / "perm" / "summary.csv"));
}

TEST_CASE("a diverging seed is recorded as failed and excluded from aggregates") {
  const fs::path dir = fresh_dir("diverge");
  ExperimentSpec spec = tiny_spec(dir.string());
  spec.name = "diverge";
  spec.ppo.lr0 = 1e6;  // guaranteed numerical blow-up

  ExperimentResult result = run_experiment(spec);
  REQUIRE(result.outcomes.size() == 2);
  for (const SeedOutcome& outcome : result.outcomes) {
    CHECK_FALSE(outcome.completed);
    CHECK(outcome.error.find("divergence detected") != std::string::npos);
  }
  for (uint64_t seed : {0, 1}) {
    const std::string manifest =
        read_file(fs::path(seed_dir(spec, seed)) / "manifest.json");
    CHECK(manifest.find("\"failed\"") != std::string::npos);
    CHECK(manifest.find("divergence detected") != std::string::npos);
    // the append-only metrics survive up to the failure point
    CHECK(fs::exists(fs::path(seed_dir(spec, seed)) / "metrics.csv"));
  }

  GridSummary summary = summarize_grid(spec, {"SA"}, {1});
  REQUIRE(summary.cells.size() == 1);
  CHECK(summary.cells[0].n_seeds == 2);
  CHECK(summary.cells[0].n_effective == 0);
}

TEST_CASE("report artifacts: valid SVG with one band per cell, table rows") {
  const fs::path dir = fresh_dir("report");
  ExperimentSpec base = tiny_spec(dir.string());
  base.name = "report";

  GridSummary summary = run_grid(base, {"Sh-Decent", "Sh-Decent-Comp"}, {2});
  emit_report(summary);

  const std::string svg = read_file(dir / "report" / "reward_PointRacer.svg");
  CHECK(oracles::xml_well_formed(svg));
  size_t bands = 0, pos = 0;
  while ((pos = svg.find("<polygon", pos)) != std::string::npos) {
    ++bands;
    pos += 8;
  }
  CHECK(bands == 2);

  const std::string md = read_file(dir / "report" / "report.md");
  int table_rows = 0;
  std::istringstream in(md);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty() && line[0] == '|' && line.find("---") == std::string::npos &&
        line.find("| mode") != 0)
      ++table_rows;
  CHECK(table_rows == 2);  // |modes| x |agent_counts|

  // plot path: reload from disk and re-emit
  GridSummary reloaded = load_summary((dir / "report" / "summary.csv").string());
  REQUIRE(reloaded.cells.size() == 2);
  CHECK(reloaded.cells[0].mean == doctest::Approx(summary.cells[0].mean).epsilon(1e-12));
  CHECK(reloaded.cells[0].n_effective == summary.cells[0].n_effective);
}

TEST_CASE("analytic ceiling: forward simulation of the optimal policy") {
  const RaceConfig cfg = make_race_config(EnvKind::PointRacer, 1);
  const double ceiling = analytic_ceiling(EnvKind::PointRacer, cfg);

  // independent re-simulation of the stated dynamics
  double v = 0.0, total = 0.0;
  for (int t = 0; t < cfg.horizon; ++t) {
    v = v + cfg.dt * (cfg.f_max * 1.0 - cfg.c_d * v * std::abs(v));
    total += v - cfg.w_ctrl;
  }
  CHECK(ceiling == doctest::Approx(total).epsilon(1e-12));
  CHECK(ceiling > 1350.0);
  CHECK(ceiling < 1450.0);

  // sub-linear in the horizon: the ramp-up is paid once
  RaceConfig half = cfg;
  half.horizon = 250;
  CHECK(analytic_ceiling(EnvKind::PointRacer, half) < 0.5 * ceiling);

  // quadrupling drag halves the terminal speed
  RaceConfig heavy = cfg;
  heavy.c_d = 0.4;
  heavy.horizon = 2000;
  RaceConfig light = cfg;
  light.horizon = 2000;
  RaceState hs = reset(heavy, 0), ls = reset(light, 0);
  double one[1] = {1.0};
  for (int t = 0; t < 2000; ++t) {
    hs = step(hs, one, heavy).state;
    ls = step(ls, one, light).state;
  }
  CHECK(hs.agents[0].v == doctest::Approx(0.5 * ls.agents[0].v).epsilon(1e-3));
}

TEST_CASE("analytic ceiling: stamina racer pacing beats full throttle") {
  const RaceConfig cfg = make_race_config(EnvKind::StaminaRacer, 1);
  const double bound = analytic_ceiling(EnvKind::StaminaRacer, cfg);
  CHECK(bound > 590.0);
  CHECK(bound < 610.0);

  // full throttle is clearly worse than the paced bound
  RaceState state = reset(cfg, 0);
  double one[1] = {1.0};
  double full = 0.0;
  for (int t = 0; t < cfg.horizon; ++t) {
    StepResult sr = step(state, one, cfg);
    full += sr.rewards[0];
    state = std::move(sr.state);
  }
  CHECK(full < 0.85 * bound);
}

TEST_CASE("worker pool size respects the environment cap") {
  CHECK(worker_pool_size() >= 1);
}
