#ifndef COMPETE_HARNESS_HPP_
#define COMPETE_HARNESS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "compete/orchestrator.hpp"

namespace compete {

struct MetricsRow {
  int iteration = 0;
  long env_steps_total = 0;
  std::string mode;
  int n_agents = 1;
  uint64_t seed = 0;
  double train_mean_ep_reward = 0.0;
  double eval_mean_ep_reward = 0.0;
  double eval_std = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double lr = 0.0;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRow& row);
MetricsRow metrics_row_from_csv(const std::string& line);

// <output_dir>/<name>/<mode_token>_N<agents> and .../seed<k>
std::string cell_dir(const ExperimentSpec& spec);
std::string seed_dir(const ExperimentSpec& spec, uint64_t seed);

struct SeedOutcome {
  uint64_t seed = 0;
  bool completed = false;
  bool skipped = false;  // already completed in a previous run
  std::string error;
};

struct ExperimentResult {
  std::string cell_dir;
  std::vector<SeedOutcome> outcomes;
};

// Trains every seed of the spec (concurrently, bounded by the worker pool),
// appending one metrics row per iteration and writing final checkpoints.
// Seeds whose manifest says "completed" are skipped; a diverged seed is
// recorded as failed and the others proceed.
ExperimentResult run_experiment(const ExperimentSpec& spec);

// Runs one seed synchronously in the current thread.
SeedOutcome run_seed(const ExperimentSpec& spec, uint64_t seed);

struct CellSummary {
  std::string mode;  // display name, e.g. "3A-Sh-Decent-Comp"
  std::string mode_token;
  int n_agents = 1;
  int n_seeds = 0;
  int n_effective = 0;  // seeds that completed
  double mean = 0.0;    // mean over seeds of the convergence-window mean
  double stddev = 0.0;  // sample std over seeds
  std::vector<uint64_t> seeds;          // sorted
  std::vector<double> per_seed_means;   // aligned with seeds (completed only)
  std::vector<double> curve_mean;       // eval reward per iteration, over seeds
  std::vector<double> curve_std;
};

struct GridSummary {
  std::string name;
  std::string out_dir;   // <output_dir>/<name>
  std::string env_name;  // e.g. "StaminaRacer"
  std::vector<CellSummary> cells;  // one per requested (mode, count)
};

// Fraction of final iterations treated as "after convergence".
inline constexpr double kConvergenceWindow = 0.10;
int convergence_window_rows(int iterations, double fraction = kConvergenceWindow);

// Cartesian product of modes x agent_counts. N = 1 cells collapse to SA and
// are trained once, then referenced by every requested mode. Emits
// summary.csv and a text table; per-cell failures are isolated.
GridSummary run_grid(const ExperimentSpec& base,
                     const std::vector<std::string>& modes,
                     const std::vector<int>& agent_counts);

// Recomputes a GridSummary from the metrics CSVs on disk (the CSVs are the
// source of truth; summaries are pure functions of them).
GridSummary summarize_grid(const ExperimentSpec& base,
                           const std::vector<std::string>& modes,
                           const std::vector<int>& agent_counts);

// Rebuilds a GridSummary from a summary.csv and the metrics CSVs next to it,
// discovering seed directories on disk (used by the plot command).
GridSummary load_summary(const std::string& summary_csv_path);

// Episode reward of the known-optimal full-throttle policy (PointRacer);
// best constant-action policy over a coarse grid for StaminaRacer (a lower
// bound on the true optimum there).
double analytic_ceiling(EnvKind kind, const RaceConfig& config);

void write_summary_csv(const GridSummary& summary);
std::string render_text_table(const GridSummary& summary);

// report.md and one reward-vs-iteration SVG per env task.
void emit_report(const GridSummary& summary);

// Bounded worker pool size: COMPETE_RL_THREADS if set, else hardware
// concurrency.
int worker_pool_size();

}  // namespace compete

#endif  // COMPETE_HARNESS_HPP_
