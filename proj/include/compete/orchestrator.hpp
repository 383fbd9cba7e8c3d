#ifndef COMPETE_ORCHESTRATOR_HPP_
#define COMPETE_ORCHESTRATOR_HPP_

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "compete/env.hpp"
#include "compete/nn.hpp"
#include "compete/ppo.hpp"

namespace compete {

// The baseline matrix factored into orthogonal axes:
//   sharing      -- one parameter set for all agents, or one per agent
//   critic input -- the agent's own observation, or the global state
//   aux obs      -- nothing, fresh noise, or competitive differences
enum class Sharing { shared, separate };
enum class CriticInput { decentralized, centralized };
enum class AuxObs { none, noise, competitive };

struct ModeFlags {
  Sharing sharing = Sharing::shared;
  CriticInput critic_input = CriticInput::decentralized;
  AuxObs aux_obs = AuxObs::none;

  bool operator==(const ModeFlags&) const = default;
};

AuxKind to_aux_kind(AuxObs aux);

// Token form without the agent-count prefix, e.g. "Sh-Decent-Comp" or "SA".
std::string mode_token(const ModeFlags& flags, int n_agents);
// Display form with the prefix, e.g. "3A-Sh-Decent-Comp"; "SA" for N = 1.
std::string mode_name(const ModeFlags& flags, int n_agents);
// Accepts "SA" and any "(Sh|Sp)-(Decent|Cent)[-Comp|-Noi]" combination.
ModeFlags mode_from_token(const std::string& token);

// A single-agent race degenerates to plain single-agent training whatever
// the requested flags are.
ModeFlags canonical_flags(const ModeFlags& flags, int n_agents);

// One parameter set in shared mode, one per agent in separate mode.
struct PolicyBank {
  Sharing sharing = Sharing::shared;
  std::vector<ParamSet> members;

  ParamSet& for_agent(int i) {
    return members[sharing == Sharing::shared ? 0 : static_cast<size_t>(i)];
  }
  const ParamSet& for_agent(int i) const {
    return members[sharing == Sharing::shared ? 0 : static_cast<size_t>(i)];
  }
};

struct ExperimentSpec {
  std::string name = "experiment";
  RaceConfig env = make_race_config(EnvKind::PointRacer, 1);
  ModeFlags flags;
  HeadKind head = HeadKind::gaussian;
  PpoConfig ppo;
  int total_iterations = 500;
  int steps_per_agent = 5000;
  std::vector<uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  int eval_episodes = 20;
  std::string output_dir = "out";

  void validate() const;
  int n_agents() const { return env.n_agents; }
};

// Observation layout used while training under these flags.
ObsLayout training_layout(const RaceConfig& env, const ModeFlags& flags);

// Dimension of the critic input implied by the flags.
int critic_input_dim(const RaceConfig& env, const ModeFlags& flags);

// Centralized critic input: every agent's proprioceptive block in agent
// order, then agent i's own aux block when one is present. For noise aux the
// recorded block must be supplied (it cannot be derived from the state).
std::vector<double> global_critic_input(const RaceState& state, int i,
                                        const ModeFlags& flags,
                                        const RaceConfig& env,
                                        std::span<const double> aux_block = {});

// Per-agent RNG streams; one entry per agent even in shared mode.
struct AgentStreams {
  std::vector<Rng> policy;
  std::vector<Rng> noise;
};

AgentStreams make_agent_streams(uint64_t master_seed, int n_agents);

struct CollectResult {
  std::vector<RolloutBuffer> buffers;  // 1 (shared) or N (separate)
  double mean_episode_reward = 0.0;    // undiscounted, over (episode, agent)
  long steps_collected = 0;            // summed over agents
};

// Runs whole episodes until each agent has at least steps_per_agent recorded
// steps. Shared mode pools all trajectories into one buffer.
CollectResult collect_rollouts(const RaceConfig& env, const PolicyBank& bank,
                               const ModeFlags& flags, int steps_per_agent,
                               AgentStreams& streams);

struct EvalSummary {
  double mean = 0.0;
  double stddev = 0.0;
};

// Single-agent episodes with the deterministic (mean) action; competitive or
// noise aux dimensions are zero-padded to the training width.
std::vector<double> evaluate_episode_rewards(const ParamSet& params,
                                             const RaceConfig& env, int n_train,
                                             const ModeFlags& flags,
                                             int episodes, Rng& rng);
EvalSummary evaluate(const ParamSet& params, const RaceConfig& env, int n_train,
                     const ModeFlags& flags, int episodes, Rng& rng);

struct IterationRecord {
  int iteration = 0;
  long env_steps_total = 0;
  double train_mean_ep_reward = 0.0;
  EvalSummary eval;
  UpdateStats update;
};

struct TrainResult {
  PolicyBank bank;
  std::vector<IterationRecord> history;
};

using IterationCallback = std::function<void(const IterationRecord&)>;

// Full training run for one master seed. Deterministic: the master seed is
// split into labeled per-component streams (init/policy/noise/eval).
TrainResult train(const ExperimentSpec& spec, uint64_t master_seed,
                  const IterationCallback& on_iteration = {});

}  // namespace compete

#endif  // COMPETE_ORCHESTRATOR_HPP_
