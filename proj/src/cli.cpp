#include "compete/cli.hpp"

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "compete/checkpoint.hpp"
#include "compete/config.hpp"
#include "compete/harness.hpp"
#include "compete/selftest.hpp"

namespace fs = std::filesystem;

namespace compete {

namespace {

ExperimentSpec spec_with_overrides(const std::string& config_path,
                                   const std::optional<uint64_t>& seed,
                                   const std::string& mode, int agents,
                                   std::optional<GridRequest>* grid_out) {
  LoadedConfig loaded = load_config_file(config_path);
  if (grid_out) *grid_out = loaded.grid;
  ExperimentSpec spec = loaded.spec;
  if (seed) spec.seeds = {*seed};
  if (!mode.empty()) {
    try {
      spec.flags = mode_from_token(mode);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  if (agents > 0) spec.env.n_agents = agents;
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return spec;
}

int print_outcomes(const ExperimentResult& result) {
  bool any_failed = false;
  for (const SeedOutcome& outcome : result.outcomes) {
    std::cout << "seed " << outcome.seed << ": ";
    if (outcome.skipped) std::cout << "skipped (already completed)";
    else if (outcome.completed) std::cout << "completed";
    else {
      std::cout << "failed (" << outcome.error << ")";
      any_failed = true;
    }
    std::cout << "\n";
  }
  std::cout << "results in " << result.cell_dir << "\n";
  return any_failed ? 1 : 0;
}

int cmd_train(const std::string& config_path, const std::optional<uint64_t>& seed,
              const std::string& mode, int agents) {
  ExperimentSpec spec = spec_with_overrides(config_path, seed, mode, agents, nullptr);
  write_effective_config(spec);
  std::cout << "training " << spec.name << " mode "
            << mode_name(spec.flags, spec.env.n_agents) << " seeds "
            << spec.seeds.size() << "\n";
  return print_outcomes(run_experiment(spec));
}

int cmd_eval(const std::string& checkpoint_path, const std::string& env_name,
             int episodes) {
  if (!fs::exists(checkpoint_path))
    throw UsageError("checkpoint not found: " + checkpoint_path);
  LoadedCheckpoint loaded = load_checkpoint(checkpoint_path);

  EnvKind kind = loaded.meta.env_kind;
  if (!env_name.empty()) {
    try {
      kind = env_kind_from_string(env_name);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  ModeFlags flags;
  flags.aux_obs = loaded.meta.aux_obs == AuxKind::none ? AuxObs::none
                  : loaded.meta.aux_obs == AuxKind::noise ? AuxObs::noise
                                                          : AuxObs::competitive;
  const RaceConfig env = make_race_config(kind, 1);
  Rng rng(0);
  const EvalSummary summary =
      evaluate(loaded.params, env, loaded.meta.n_train, flags, episodes, rng);
  std::cout << "eval reward: " << summary.mean << " +/- " << summary.stddev << " ("
            << episodes << " episodes, env " << to_string(kind) << ", zero-padded aux "
            << (flags.aux_obs == AuxObs::none ? 0 : 2 * loaded.meta.n_train)
            << " dims)\n";
  return 0;
}

int cmd_compare(const std::string& config_path, std::vector<std::string> modes,
                std::vector<int> agents) {
  std::optional<GridRequest> grid;
  ExperimentSpec spec = spec_with_overrides(config_path, {}, "", 0, &grid);
  if (modes.empty() && grid) modes = grid->modes;
  if (agents.empty() && grid) agents = grid->agent_counts;
  if (agents.empty()) agents = {spec.env.n_agents};
  if (modes.empty()) throw UsageError("empty grid");
  for (const std::string& mode : modes) {
    try {
      mode_from_token(mode);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }

  GridRequest request{modes, agents};
  write_effective_config(spec, request);
  GridSummary summary = run_grid(spec, modes, agents);
  emit_report(summary);
  std::cout << render_text_table(summary);
  std::cout << "summary in " << summary.out_dir << "/summary.csv\n";

  for (const CellSummary& cell : summary.cells)
    if (cell.n_effective < cell.n_seeds) return 1;
  return 0;
}

int cmd_plot(const std::string& summary_path) {
  if (!fs::exists(summary_path))
    throw UsageError("summary not found: " + summary_path);
  GridSummary summary = load_summary(summary_path);
  emit_report(summary);
  std::cout << render_text_table(summary);
  std::cout << "report in " << summary.out_dir << "/report.md\n";
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Competitive-racing PPO trainer"};
  app.require_subcommand(1);

  std::string config_path, mode, env_name, checkpoint_path, summary_path;
  std::optional<uint64_t> seed;
  int agents = 0;
  int episodes = 20;
  std::vector<std::string> modes;
  std::vector<int> agent_counts;

  CLI::App* train_cmd = app.add_subcommand("train", "Run one experiment (all seeds)");
  train_cmd->add_option("--config", config_path, "JSON experiment config")->required();
  train_cmd->add_option("--seed", seed, "Train only this master seed");
  train_cmd->add_option("--mode", mode, "Override mode, e.g. Sh-Decent-Comp");
  train_cmd->add_option("--agents", agents, "Override agent count");

  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint standalone");
  eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint.json path")->required();
  eval_cmd->add_option("--env", env_name, "Env kind: point|stamina (default: training env)");
  eval_cmd->add_option("--episodes", episodes, "Evaluation episodes");

  CLI::App* compare_cmd =
      app.add_subcommand("compare", "Run a mode x agent-count grid and summarize");
  compare_cmd->add_option("--config", config_path, "JSON experiment config")->required();
  compare_cmd->add_option("--modes", modes, "Comma-separated mode tokens")->delimiter(',');
  compare_cmd->add_option("--agents", agent_counts, "Comma-separated agent counts")
      ->delimiter(',');
  CLI::App* grid_cmd = app.add_subcommand("grid", "Alias of compare");
  grid_cmd->add_option("--config", config_path, "JSON experiment config")->required();
  grid_cmd->add_option("--modes", modes, "Comma-separated mode tokens")->delimiter(',');
  grid_cmd->add_option("--agents", agent_counts, "Comma-separated agent counts")
      ->delimiter(',');

  CLI::App* plot_cmd = app.add_subcommand("plot", "Re-emit report artifacts from a summary");
  plot_cmd->add_option("--summary", summary_path, "summary.csv path")->required();

  CLI::App* selftest_cmd =
      app.add_subcommand("selftest", "Run the built-in invariant suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(config_path, seed, mode, agents);
    if (eval_cmd->parsed()) return cmd_eval(checkpoint_path, env_name, episodes);
    if (compare_cmd->parsed() || grid_cmd->parsed())
      return cmd_compare(config_path, modes, agent_counts);
    if (plot_cmd->parsed()) return cmd_plot(summary_path);
    if (selftest_cmd->parsed()) return run_selftest(std::cout) ? 0 : 1;
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace compete
