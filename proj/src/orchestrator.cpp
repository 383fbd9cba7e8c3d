#include "compete/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace compete {

namespace {

void check_finite(std::span<const double> xs, const char* what, int episode,
                  int t, int agent) {
  for (double x : xs)
    if (!std::isfinite(x))
      throw std::runtime_error(std::string("non-finite ") + what + " (episode " +
                               std::to_string(episode) + ", step " + std::to_string(t) +
                               ", agent " + std::to_string(agent) + ")");
}

std::span<const double> aux_block_of(const std::vector<double>& obs,
                                     const ObsLayout& layout) {
  return std::span<const double>(obs).subspan(static_cast<size_t>(layout.proprio_dim));
}

double population_std(std::span<const double> xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return std::sqrt(var / static_cast<double>(xs.size()));
}

}  // namespace

AuxKind to_aux_kind(AuxObs aux) {
  switch (aux) {
    case AuxObs::none: return AuxKind::none;
    case AuxObs::noise: return AuxKind::noise;
    case AuxObs::competitive: return AuxKind::competitive;
  }
  return AuxKind::none;
}

std::string mode_token(const ModeFlags& flags, int n_agents) {
  if (n_agents == 1 && flags == ModeFlags{}) return "SA";
  std::string token = flags.sharing == Sharing::shared ? "Sh" : "Sp";
  token += flags.critic_input == CriticInput::decentralized ? "-Decent" : "-Cent";
  if (flags.aux_obs == AuxObs::competitive) token += "-Comp";
  else if (flags.aux_obs == AuxObs::noise) token += "-Noi";
  return token;
}

std::string mode_name(const ModeFlags& flags, int n_agents) {
  const std::string token = mode_token(flags, n_agents);
  if (token == "SA") return token;
  return std::to_string(n_agents) + "A-" + token;
}

ModeFlags mode_from_token(const std::string& token) {
  std::string t = token;
  // tolerate a leading "<digits>A-" prefix
  size_t digits = 0;
  while (digits < t.size() && std::isdigit(static_cast<unsigned char>(t[digits]))) ++digits;
  if (digits > 0 && digits + 1 < t.size() && t[digits] == 'A' && t[digits + 1] == '-')
    t = t.substr(digits + 2);

  if (t == "SA") return ModeFlags{};

  ModeFlags flags;
  std::vector<std::string> parts;
  size_t start = 0;
  while (start <= t.size()) {
    size_t pos = t.find('-', start);
    if (pos == std::string::npos) pos = t.size();
    parts.push_back(t.substr(start, pos - start));
    start = pos + 1;
  }
  if (parts.size() < 2 || parts.size() > 3)
    throw std::invalid_argument("unknown mode: " + token);
  if (parts[0] == "Sh") flags.sharing = Sharing::shared;
  else if (parts[0] == "Sp") flags.sharing = Sharing::separate;
  else throw std::invalid_argument("unknown mode: " + token);
  if (parts[1] == "Decent") flags.critic_input = CriticInput::decentralized;
  else if (parts[1] == "Cent") flags.critic_input = CriticInput::centralized;
  else throw std::invalid_argument("unknown mode: " + token);
  if (parts.size() == 3) {
    if (parts[2] == "Comp") flags.aux_obs = AuxObs::competitive;
    else if (parts[2] == "Noi") flags.aux_obs = AuxObs::noise;
    else throw std::invalid_argument("unknown mode: " + token);
  }
  return flags;
}

ModeFlags canonical_flags(const ModeFlags& flags, int n_agents) {
  if (n_agents == 1) return ModeFlags{};
  return flags;
}

void ExperimentSpec::validate() const {
  env.validate();
  if (name.empty() || name == "." || name == "..")
    throw std::invalid_argument("experiment name must be non-empty");
  for (char c : name)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.'))
      throw std::invalid_argument("experiment name must be filesystem-safe: " + name);
  if (seeds.empty()) throw std::invalid_argument("seeds must be non-empty");
  if (std::set<uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
    throw std::invalid_argument("seeds must be distinct");
  if (total_iterations < 0) throw std::invalid_argument("total_iterations must be >= 0");
  if (steps_per_agent < 1) throw std::invalid_argument("steps_per_agent must be >= 1");
  if (eval_episodes < 1) throw std::invalid_argument("eval_episodes must be >= 1");
  if (flags.critic_input == CriticInput::centralized && env.n_agents < 2)
    throw std::invalid_argument("centralized critic requires n_agents >= 2");
  ppo.validate();
}

ObsLayout training_layout(const RaceConfig& env, const ModeFlags& flags) {
  return make_layout(env.kind, to_aux_kind(flags.aux_obs), env.n_agents);
}

int critic_input_dim(const RaceConfig& env, const ModeFlags& flags) {
  const ObsLayout layout = training_layout(env, flags);
  if (flags.critic_input == CriticInput::decentralized) return layout.total_dim();
  return env.n_agents * proprio_dim(env.kind) + layout.aux_dim;
}

std::vector<double> global_critic_input(const RaceState& state, int i,
                                        const ModeFlags& flags,
                                        const RaceConfig& env,
                                        std::span<const double> aux_block) {
  if (flags.critic_input != CriticInput::centralized)
    throw std::invalid_argument("global_critic_input: critic is not centralized");
  std::vector<double> out;
  out.reserve(static_cast<size_t>(critic_input_dim(env, flags)));
  for (const AgentPhys& agent : state.agents) {
    std::vector<double> p = proprio_obs(agent, env.kind);
    out.insert(out.end(), p.begin(), p.end());
  }
  switch (flags.aux_obs) {
    case AuxObs::none:
      break;
    case AuxObs::competitive: {
      if (!aux_block.empty()) {
        out.insert(out.end(), aux_block.begin(), aux_block.end());
      } else {
        std::vector<double> comp = competitive_obs(state, i, env.self_first);
        out.insert(out.end(), comp.begin(), comp.end());
      }
      break;
    }
    case AuxObs::noise:
      if (aux_block.empty())
        throw std::invalid_argument(
            "global_critic_input: noise aux block must be supplied");
      out.insert(out.end(), aux_block.begin(), aux_block.end());
      break;
  }
  return out;
}

AgentStreams make_agent_streams(uint64_t master_seed, int n_agents) {
  AgentStreams streams;
  streams.policy.reserve(static_cast<size_t>(n_agents));
  streams.noise.reserve(static_cast<size_t>(n_agents));
  for (int i = 0; i < n_agents; ++i) {
    streams.policy.emplace_back(derive_seed(master_seed, "policy", static_cast<uint64_t>(i)));
    streams.noise.emplace_back(derive_seed(master_seed, "noise", static_cast<uint64_t>(i)));
  }
  return streams;
}

CollectResult collect_rollouts(const RaceConfig& env, const PolicyBank& bank,
                               const ModeFlags& flags, int steps_per_agent,
                               AgentStreams& streams) {
  env.validate();
  if (steps_per_agent < 1) throw std::invalid_argument("steps_per_agent must be >= 1");
  const int n = env.n_agents;
  if (flags.critic_input == CriticInput::centralized && n < 2)
    throw std::invalid_argument("centralized critic requires n_agents >= 2");
  const size_t expected_members = flags.sharing == Sharing::shared ? 1 : static_cast<size_t>(n);
  if (bank.members.size() != expected_members || bank.sharing != flags.sharing)
    throw std::invalid_argument("policy bank does not match mode flags");
  if (static_cast<int>(streams.policy.size()) != n ||
      static_cast<int>(streams.noise.size()) != n)
    throw std::invalid_argument("agent stream count does not match n_agents");

  const ObsLayout layout = training_layout(env, flags);
  for (const ParamSet& ps : bank.members) {
    if (ps.actor.obs_dim() != layout.total_dim())
      throw std::invalid_argument("actor input dim does not match observation layout");
    if (ps.critic.in_dim() != critic_input_dim(env, flags))
      throw std::invalid_argument("critic input dim does not match mode flags");
  }

  const bool cent = flags.critic_input == CriticInput::centralized;
  const int episodes = (steps_per_agent + env.horizon - 1) / env.horizon;

  CollectResult out;
  out.buffers.resize(flags.sharing == Sharing::shared ? 1 : static_cast<size_t>(n));
  double episode_reward_sum = 0.0;
  long episode_count = 0;
  MlpTape tape;

  for (int ep = 0; ep < episodes; ++ep) {
    RaceState state = reset(env, 0);
    std::vector<Trajectory> trajs(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) trajs[static_cast<size_t>(i)].agent_id = i;

    std::vector<double> flat_actions(static_cast<size_t>(n));
    for (int t = 0; t < env.horizon; ++t) {
      for (int i = 0; i < n; ++i) {
        Rng& noise_rng = streams.noise[static_cast<size_t>(i)];
        std::vector<double> obs = build_observation(state, i, layout, noise_rng, env.self_first);
        check_finite(obs, "observation", ep, t, i);

        const ParamSet& ps = bank.for_agent(i);
        std::vector<double> dist = mlp_forward(ps.actor.trunk, obs, &tape);
        std::vector<double> action =
            actor_sample(ps.actor, dist, streams.policy[static_cast<size_t>(i)]);
        const double logp = actor_logprob(ps.actor, dist, action);

        double value;
        std::vector<double> critic_in;
        if (cent) {
          critic_in = global_critic_input(state, i, flags, env, aux_block_of(obs, layout));
          value = mlp_forward(ps.critic, critic_in, &tape)[0];
        } else {
          value = mlp_forward(ps.critic, obs, &tape)[0];
        }

        Trajectory& traj = trajs[static_cast<size_t>(i)];
        flat_actions[static_cast<size_t>(i)] = action[0];
        traj.obs.push_back(std::move(obs));
        if (cent) traj.critic_obs.push_back(std::move(critic_in));
        traj.actions.push_back(std::move(action));
        traj.logp_old.push_back(logp);
        traj.values.push_back(value);
      }

      StepResult sr = step(state, flat_actions, env);
      check_finite(sr.rewards, "reward", ep, t, -1);
      for (int i = 0; i < n; ++i) {
        trajs[static_cast<size_t>(i)].rewards.push_back(sr.rewards[static_cast<size_t>(i)]);
        trajs[static_cast<size_t>(i)].dones.push_back(sr.done ? 1 : 0);
      }
      state = std::move(sr.state);
    }

    for (int i = 0; i < n; ++i) {
      Trajectory& traj = trajs[static_cast<size_t>(i)];
      std::vector<double> obs_end = build_observation(
          state, i, layout, streams.noise[static_cast<size_t>(i)], env.self_first);
      const ParamSet& ps = bank.for_agent(i);
      if (cent) {
        std::vector<double> critic_in =
            global_critic_input(state, i, flags, env, aux_block_of(obs_end, layout));
        traj.bootstrap_value = mlp_forward(ps.critic, critic_in, &tape)[0];
      } else {
        traj.bootstrap_value = mlp_forward(ps.critic, obs_end, &tape)[0];
      }
      traj.truncated = true;

      episode_reward_sum += std::accumulate(traj.rewards.begin(), traj.rewards.end(), 0.0);
      episode_count += 1;
      out.steps_collected += static_cast<long>(traj.size());
      RolloutBuffer& dest =
          flags.sharing == Sharing::shared ? out.buffers[0] : out.buffers[static_cast<size_t>(i)];
      dest.trajectories.push_back(std::move(traj));
    }
  }

  out.mean_episode_reward = episode_reward_sum / static_cast<double>(episode_count);
  return out;
}

std::vector<double> evaluate_episode_rewards(const ParamSet& params,
                                             const RaceConfig& env, int n_train,
                                             const ModeFlags& flags,
                                             int episodes, Rng& rng) {
  RaceConfig solo = env;
  solo.n_agents = 1;
  const AuxKind aux =
      flags.aux_obs == AuxObs::none ? AuxKind::none : AuxKind::zero_pad;
  const ObsLayout layout = make_layout(env.kind, aux, n_train);
  if (params.actor.obs_dim() != layout.total_dim())
    throw std::invalid_argument(
        "evaluate: dimension mismatch (policy expects " +
        std::to_string(params.actor.obs_dim()) + ", layout provides " +
        std::to_string(layout.total_dim()) + ")");

  MlpTape tape;
  std::vector<double> rewards;
  rewards.reserve(static_cast<size_t>(episodes));
  for (int ep = 0; ep < episodes; ++ep) {
    RaceState state = reset(solo, 0);
    double total = 0.0;
    for (int t = 0; t < solo.horizon; ++t) {
      std::vector<double> obs = build_observation(state, 0, layout, rng, solo.self_first);
      std::vector<double> dist = mlp_forward(params.actor.trunk, obs, &tape);
      std::vector<double> action = actor_mean_action(params.actor, dist);
      StepResult sr = step(state, std::span<const double>(action).first(1), solo);
      total += sr.rewards[0];
      state = std::move(sr.state);
    }
    rewards.push_back(total);
  }
  return rewards;
}

EvalSummary evaluate(const ParamSet& params, const RaceConfig& env, int n_train,
                     const ModeFlags& flags, int episodes, Rng& rng) {
  std::vector<double> rewards =
      evaluate_episode_rewards(params, env, n_train, flags, episodes, rng);
  EvalSummary summary;
  summary.mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) /
                 static_cast<double>(rewards.size());
  summary.stddev = population_std(rewards, summary.mean);
  return summary;
}

TrainResult train(const ExperimentSpec& spec, uint64_t master_seed,
                  const IterationCallback& on_iteration) {
  spec.validate();
  const int n = spec.env.n_agents;
  const ObsLayout layout = training_layout(spec.env, spec.flags);
  const int critic_dim = critic_input_dim(spec.env, spec.flags);
  const int adim = action_dim(spec.env.kind);

  PpoConfig ppo_cfg = spec.ppo;
  ppo_cfg.total_iterations = spec.total_iterations;
  ppo_cfg.validate();

  TrainResult result;
  result.bank.sharing = spec.flags.sharing;
  const int members = spec.flags.sharing == Sharing::shared ? 1 : n;
  for (int k = 0; k < members; ++k) {
    Rng init_rng(derive_seed(master_seed, "init", static_cast<uint64_t>(k)));
    result.bank.members.push_back(
        make_param_set(layout.total_dim(), critic_dim, adim, spec.head, init_rng));
  }

  AgentStreams streams = make_agent_streams(master_seed, n);
  Rng eval_rng(derive_seed(master_seed, "eval"));

  long env_steps_total = 0;
  for (int iter = 0; iter < spec.total_iterations; ++iter) {
    CollectResult collected =
        collect_rollouts(spec.env, result.bank, spec.flags, spec.steps_per_agent, streams);
    env_steps_total += collected.steps_collected;

    UpdateStats stats;
    if (spec.flags.sharing == Sharing::shared) {
      stats = ppo_update(collected.buffers[0], result.bank.members[0], ppo_cfg, iter);
    } else {
      for (int i = 0; i < n; ++i) {
        UpdateStats s =
            ppo_update(collected.buffers[static_cast<size_t>(i)],
                       result.bank.members[static_cast<size_t>(i)], ppo_cfg, iter);
        stats.policy_loss += s.policy_loss;
        stats.value_loss += s.value_loss;
        stats.entropy += s.entropy;
        stats.mean_ratio += s.mean_ratio;
        stats.clip_fraction += s.clip_fraction;
        stats.lr_used = s.lr_used;
      }
      const double inv = 1.0 / static_cast<double>(n);
      stats.policy_loss *= inv;
      stats.value_loss *= inv;
      stats.entropy *= inv;
      stats.mean_ratio *= inv;
      stats.clip_fraction *= inv;
    }

    EvalSummary eval;
    if (spec.flags.sharing == Sharing::shared) {
      eval = evaluate(result.bank.members[0], spec.env, n, spec.flags,
                      spec.eval_episodes, eval_rng);
    } else {
      std::vector<double> pooled;
      for (int i = 0; i < n; ++i) {
        std::vector<double> r = evaluate_episode_rewards(
            result.bank.members[static_cast<size_t>(i)], spec.env, n, spec.flags,
            spec.eval_episodes, eval_rng);
        pooled.insert(pooled.end(), r.begin(), r.end());
      }
      eval.mean = std::accumulate(pooled.begin(), pooled.end(), 0.0) /
                  static_cast<double>(pooled.size());
      eval.stddev = population_std(pooled, eval.mean);
    }

    IterationRecord rec;
    rec.iteration = iter;
    rec.env_steps_total = env_steps_total;
    rec.train_mean_ep_reward = collected.mean_episode_reward;
    rec.eval = eval;
    rec.update = stats;
    result.history.push_back(rec);
    if (on_iteration) on_iteration(rec);
  }
  return result;
}

}  // namespace compete
