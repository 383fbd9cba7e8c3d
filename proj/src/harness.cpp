#include "compete/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

#include "compete/checkpoint.hpp"
#include "compete/csv.hpp"

namespace fs = std::filesystem;

namespace compete {

namespace {

constexpr const char* kHeader =
    "iteration,env_steps_total,mode,n_agents,seed,train_mean_ep_reward,"
    "eval_mean_ep_reward,eval_std,policy_loss,value_loss,entropy,"
    "clip_fraction,lr";

void run_tasks(std::vector<std::function<void()>>& tasks) {
  const int workers =
      std::min<int>(worker_pool_size(), static_cast<int>(tasks.size()));
  if (workers <= 1) {
    for (auto& task : tasks) task();
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> threads;
  threads.reserve(static_cast<size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1))
        tasks[i]();
    });
  }
  for (auto& t : threads) t.join();
}

std::vector<MetricsRow> read_metrics_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read metrics: " + path.string());
  std::vector<MetricsRow> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line != kHeader)
        throw std::runtime_error("unexpected metrics header in " + path.string());
      continue;
    }
    rows.push_back(metrics_row_from_csv(line));
  }
  return rows;
}

double mean_of(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sample_std(std::span<const double> xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return std::sqrt(var / static_cast<double>(xs.size() - 1));
}

struct GridCell {
  ModeFlags flags;
  int n_agents = 0;
};

std::vector<GridCell> unique_cells(const std::vector<std::string>& modes,
                                   const std::vector<int>& agent_counts) {
  std::vector<GridCell> cells;
  std::set<std::pair<std::string, int>> seen;
  for (const std::string& mode : modes) {
    const ModeFlags requested = mode_from_token(mode);
    for (int n : agent_counts) {
      if (n < 1) throw std::invalid_argument("agent counts must be >= 1");
      const ModeFlags flags = canonical_flags(requested, n);
      if (seen.insert({mode_token(flags, n), n}).second)
        cells.push_back({flags, n});
    }
  }
  return cells;
}

ExperimentSpec cell_spec(const ExperimentSpec& base, const GridCell& cell) {
  ExperimentSpec spec = base;
  spec.flags = cell.flags;
  spec.env.n_agents = cell.n_agents;
  return spec;
}

}  // namespace

int worker_pool_size() {
  if (const char* env = std::getenv("COMPETE_RL_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

std::string metrics_csv_header() { return kHeader; }

std::string metrics_csv_row(const MetricsRow& row) {
  std::string out;
  out += std::to_string(row.iteration);
  out += ',';
  out += std::to_string(row.env_steps_total);
  out += ',';
  out += row.mode;
  out += ',';
  out += std::to_string(row.n_agents);
  out += ',';
  out += std::to_string(row.seed);
  out += ',';
  out += format_double(row.train_mean_ep_reward);
  out += ',';
  out += format_double(row.eval_mean_ep_reward);
  out += ',';
  out += format_double(row.eval_std);
  out += ',';
  out += format_double(row.policy_loss);
  out += ',';
  out += format_double(row.value_loss);
  out += ',';
  out += format_double(row.entropy);
  out += ',';
  out += format_double(row.clip_fraction);
  out += ',';
  out += format_double(row.lr);
  return out;
}

MetricsRow metrics_row_from_csv(const std::string& line) {
  const std::vector<std::string> f = split_csv_line(line);
  if (f.size() != 13) throw std::runtime_error("bad metrics row: " + line);
  MetricsRow row;
  row.iteration = std::stoi(f[0]);
  row.env_steps_total = std::stol(f[1]);
  row.mode = f[2];
  row.n_agents = std::stoi(f[3]);
  row.seed = std::stoull(f[4]);
  row.train_mean_ep_reward = parse_double(f[5]);
  row.eval_mean_ep_reward = parse_double(f[6]);
  row.eval_std = parse_double(f[7]);
  row.policy_loss = parse_double(f[8]);
  row.value_loss = parse_double(f[9]);
  row.entropy = parse_double(f[10]);
  row.clip_fraction = parse_double(f[11]);
  row.lr = parse_double(f[12]);
  return row;
}

std::string cell_dir(const ExperimentSpec& spec) {
  return spec.output_dir + "/" + spec.name + "/" +
         mode_token(canonical_flags(spec.flags, spec.env.n_agents), spec.env.n_agents) +
         "_N" + std::to_string(spec.env.n_agents);
}

std::string seed_dir(const ExperimentSpec& spec, uint64_t seed) {
  return cell_dir(spec) + "/seed" + std::to_string(seed);
}

int convergence_window_rows(int iterations, double fraction) {
  return std::max(1, static_cast<int>(std::llround(fraction * iterations)));
}

SeedOutcome run_seed(const ExperimentSpec& spec, uint64_t seed) {
  SeedOutcome outcome;
  outcome.seed = seed;

  const fs::path dir = seed_dir(spec, seed);
  fs::create_directories(dir);
  const fs::path manifest_path = dir / "manifest.json";

  if (fs::exists(manifest_path)) {
    std::ifstream in(manifest_path);
    nlohmann::json manifest = nlohmann::json::parse(in, nullptr, false);
    if (!manifest.is_discarded() &&
        manifest.value("status", "") == "completed") {
      outcome.completed = true;
      outcome.skipped = true;
      return outcome;
    }
  }

  const std::string mode = mode_name(spec.flags, spec.env.n_agents);
  nlohmann::json manifest{{"seed", seed},
                          {"mode", mode},
                          {"n_agents", spec.env.n_agents},
                          {"iterations", spec.total_iterations}};
  try {
    std::ofstream csv(dir / "metrics.csv", std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot write " + (dir / "metrics.csv").string());
    csv << kHeader << '\n' << std::flush;

    TrainResult result = train(spec, seed, [&](const IterationRecord& rec) {
      MetricsRow row;
      row.iteration = rec.iteration;
      row.env_steps_total = rec.env_steps_total;
      row.mode = mode;
      row.n_agents = spec.env.n_agents;
      row.seed = seed;
      row.train_mean_ep_reward = rec.train_mean_ep_reward;
      row.eval_mean_ep_reward = rec.eval.mean;
      row.eval_std = rec.eval.stddev;
      row.policy_loss = rec.update.policy_loss;
      row.value_loss = rec.update.value_loss;
      row.entropy = rec.update.entropy;
      row.clip_fraction = rec.update.clip_fraction;
      row.lr = rec.update.lr_used;
      csv << metrics_csv_row(row) << '\n' << std::flush;
    });

    CheckpointMeta meta;
    meta.env_kind = spec.env.kind;
    meta.aux_obs = to_aux_kind(spec.flags.aux_obs);
    meta.n_train = spec.env.n_agents;
    meta.mode = mode;
    for (size_t k = 0; k < result.bank.members.size(); ++k) {
      const std::string file =
          k == 0 ? "checkpoint.json" : "checkpoint_agent" + std::to_string(k) + ".json";
      save_checkpoint((dir / file).string(), result.bank.members[k], meta);
    }

    manifest["status"] = "completed";
    outcome.completed = true;
  } catch (const std::exception& e) {
    manifest["status"] = "failed";
    manifest["error"] = e.what();
    outcome.error = e.what();
  }

  std::ofstream out(manifest_path);
  out << manifest.dump(1) << "\n";
  return outcome;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  ExperimentResult result;
  result.cell_dir = cell_dir(spec);
  fs::create_directories(result.cell_dir);
  result.outcomes.resize(spec.seeds.size());

  std::vector<std::function<void()>> tasks;
  tasks.reserve(spec.seeds.size());
  for (size_t i = 0; i < spec.seeds.size(); ++i) {
    tasks.push_back([&spec, &result, i] {
      try {
        result.outcomes[i] = run_seed(spec, spec.seeds[i]);
      } catch (const std::exception& e) {
        result.outcomes[i].seed = spec.seeds[i];
        result.outcomes[i].error = e.what();
      }
    });
  }
  run_tasks(tasks);
  return result;
}

namespace {

bool seed_completed(const fs::path& seed_path) {
  const fs::path manifest_path = seed_path / "manifest.json";
  if (!fs::exists(manifest_path)) return false;
  std::ifstream in(manifest_path);
  nlohmann::json manifest = nlohmann::json::parse(in, nullptr, false);
  return !manifest.is_discarded() && manifest.value("status", "") == "completed";
}

// Aggregates one cell from its per-seed metrics CSVs.
CellSummary read_cell(const fs::path& cell_path, const std::string& display,
                      const std::string& token, int n_agents,
                      const std::vector<uint64_t>& seeds) {
  CellSummary cell;
  cell.mode = display;
  cell.mode_token = token;
  cell.n_agents = n_agents;
  cell.n_seeds = static_cast<int>(seeds.size());

  std::vector<std::vector<double>> curves;
  for (uint64_t seed : seeds) {
    const fs::path dir = cell_path / ("seed" + std::to_string(seed));
    if (!seed_completed(dir)) continue;
    const std::vector<MetricsRow> rows = read_metrics_csv(dir / "metrics.csv");
    if (rows.empty()) continue;
    const int window = convergence_window_rows(static_cast<int>(rows.size()));
    double acc = 0.0;
    for (size_t r = rows.size() - static_cast<size_t>(window); r < rows.size(); ++r)
      acc += rows[r].eval_mean_ep_reward;
    cell.seeds.push_back(seed);
    cell.per_seed_means.push_back(acc / window);
    std::vector<double> curve(rows.size());
    for (size_t r = 0; r < rows.size(); ++r) curve[r] = rows[r].eval_mean_ep_reward;
    curves.push_back(std::move(curve));
  }

  cell.n_effective = static_cast<int>(cell.per_seed_means.size());
  if (cell.n_effective > 0) {
    cell.mean = mean_of(cell.per_seed_means);
    cell.stddev = sample_std(cell.per_seed_means, cell.mean);
    size_t min_len = curves.front().size();
    for (const auto& c : curves) min_len = std::min(min_len, c.size());
    cell.curve_mean.resize(min_len);
    cell.curve_std.resize(min_len);
    std::vector<double> column(curves.size());
    for (size_t r = 0; r < min_len; ++r) {
      for (size_t c = 0; c < curves.size(); ++c) column[c] = curves[c][r];
      const double m = mean_of(column);
      cell.curve_mean[r] = m;
      cell.curve_std[r] = sample_std(column, m);
    }
  }
  return cell;
}

std::vector<uint64_t> discover_seeds(const fs::path& cell_path) {
  std::vector<uint64_t> seeds;
  if (!fs::is_directory(cell_path)) return seeds;
  for (const auto& entry : fs::directory_iterator(cell_path)) {
    if (!entry.is_directory()) continue;
    const std::string name = entry.path().filename().string();
    if (name.rfind("seed", 0) != 0) continue;
    const std::string digits = name.substr(4);
    if (digits.empty() ||
        digits.find_first_not_of("0123456789") != std::string::npos)
      continue;
    seeds.push_back(std::stoull(digits));
  }
  std::sort(seeds.begin(), seeds.end());
  return seeds;
}

}  // namespace

GridSummary summarize_grid(const ExperimentSpec& base,
                           const std::vector<std::string>& modes,
                           const std::vector<int>& agent_counts) {
  if (modes.empty() || agent_counts.empty())
    throw std::invalid_argument("empty grid");

  GridSummary summary;
  summary.name = base.name;
  summary.out_dir = base.output_dir + "/" + base.name;
  summary.env_name = to_string(base.env.kind);

  std::vector<uint64_t> seeds = base.seeds;
  std::sort(seeds.begin(), seeds.end());

  for (const std::string& mode : modes) {
    const ModeFlags requested = mode_from_token(mode);
    for (int n : agent_counts) {
      const ModeFlags flags = canonical_flags(requested, n);
      ExperimentSpec spec = base;
      spec.flags = flags;
      spec.env.n_agents = n;
      summary.cells.push_back(read_cell(cell_dir(spec), mode_name(flags, n),
                                        mode_token(flags, n), n, seeds));
    }
  }
  return summary;
}

GridSummary load_summary(const std::string& summary_csv_path) {
  std::ifstream in(summary_csv_path);
  if (!in) throw std::runtime_error("cannot read summary: " + summary_csv_path);
  const fs::path out_dir = fs::path(summary_csv_path).parent_path();

  GridSummary summary;
  summary.out_dir = out_dir.string();
  summary.name = out_dir.filename().string();

  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first) {
      first = false;
      continue;
    }
    const std::vector<std::string> f = split_csv_line(line);
    if (f.size() != 8) throw std::runtime_error("bad summary row: " + line);
    summary.env_name = f[0];
    const std::string& display = f[1];
    const std::string& token = f[2];
    const int n_agents = std::stoi(f[3]);
    const fs::path cell_path = out_dir / (token + "_N" + f[3]);
    summary.cells.push_back(
        read_cell(cell_path, display, token, n_agents, discover_seeds(cell_path)));
  }
  if (summary.cells.empty())
    throw std::runtime_error("summary has no cells: " + summary_csv_path);
  return summary;
}

GridSummary run_grid(const ExperimentSpec& base,
                     const std::vector<std::string>& modes,
                     const std::vector<int>& agent_counts) {
  if (modes.empty() || agent_counts.empty())
    throw std::invalid_argument("empty grid");
  base.validate();

  const std::vector<GridCell> cells = unique_cells(modes, agent_counts);
  std::vector<std::function<void()>> tasks;
  for (const GridCell& cell : cells) {
    const ExperimentSpec spec = cell_spec(base, cell);
    spec.validate();
    fs::create_directories(cell_dir(spec));
    for (uint64_t seed : spec.seeds) {
      tasks.push_back([spec, seed] {
        try {
          run_seed(spec, seed);
        } catch (const std::exception&) {
          // per-cell failures are isolated; the manifest records them
        }
      });
    }
  }
  run_tasks(tasks);

  GridSummary summary = summarize_grid(base, modes, agent_counts);
  write_summary_csv(summary);
  return summary;
}

double analytic_ceiling(EnvKind kind, const RaceConfig& config) {
  RaceConfig solo = config;
  solo.kind = kind;
  solo.n_agents = 1;
  solo.validate();

  const auto episode_reward = [&solo](double a) {
    RaceState state = reset(solo, 0);
    const double action[1] = {a};
    double total = 0.0;
    for (int t = 0; t < solo.horizon; ++t) {
      StepResult sr = step(state, action, solo);
      total += sr.rewards[0];
      state = std::move(sr.state);
    }
    return total;
  };

  if (kind == EnvKind::PointRacer) return episode_reward(1.0);
  double best = episode_reward(0.1);
  for (int k = 2; k <= 10; ++k) best = std::max(best, episode_reward(0.1 * k));
  return best;
}

void write_summary_csv(const GridSummary& summary) {
  const fs::path path = fs::path(summary.out_dir) / "summary.csv";
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "env,mode,mode_token,n_agents,n_seeds,n_effective,mean,std\n";
  for (const CellSummary& cell : summary.cells) {
    out << summary.env_name << ',' << cell.mode << ',' << cell.mode_token << ','
        << cell.n_agents << ',' << cell.n_seeds << ',' << cell.n_effective << ','
        << format_double(cell.mean) << ',' << format_double(cell.stddev) << '\n';
  }
}

std::string render_text_table(const GridSummary& summary) {
  // Table-style layout: one row per env, modes as columns.
  std::ostringstream out;
  out << "post-convergence eval reward, mean +/- std over seeds (final "
      << static_cast<int>(kConvergenceWindow * 100) << "% of iterations)\n";
  out << "env";
  for (const CellSummary& cell : summary.cells) out << " | " << cell.mode;
  out << "\n" << summary.env_name;
  char buf[96];
  for (const CellSummary& cell : summary.cells) {
    if (cell.n_effective == 0) {
      std::snprintf(buf, sizeof(buf), " | (no data, n=0/%d)", cell.n_seeds);
    } else {
      std::snprintf(buf, sizeof(buf), " | %.2f +/- %.2f (n=%d/%d)", cell.mean,
                    cell.stddev, cell.n_effective, cell.n_seeds);
    }
    out << buf;
  }
  out << "\n";
  return out.str();
}

}  // namespace compete
