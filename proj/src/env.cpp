#include "compete/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace compete {

std::string to_string(EnvKind kind) {
  return kind == EnvKind::PointRacer ? "PointRacer" : "StaminaRacer";
}

EnvKind env_kind_from_string(const std::string& s) {
  if (s == "PointRacer" || s == "point") return EnvKind::PointRacer;
  if (s == "StaminaRacer" || s == "stamina") return EnvKind::StaminaRacer;
  throw std::invalid_argument("unknown env kind: " + s);
}

int proprio_dim(EnvKind kind) {
  return kind == EnvKind::PointRacer ? 1 : 2;
}

int action_dim(EnvKind) { return 1; }

void RaceConfig::validate() const {
  if (n_agents < 1) throw std::invalid_argument("n_agents must be >= 1");
  if (dt <= 0.0) throw std::invalid_argument("dt must be > 0");
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (c_d <= 0.0) throw std::invalid_argument("c_d must be > 0");
}

RaceConfig make_race_config(EnvKind kind, int n_agents) {
  RaceConfig cfg;
  cfg.kind = kind;
  cfg.n_agents = n_agents;
  cfg.w_ctrl = kind == EnvKind::PointRacer ? 0.1 : 0.05;
  return cfg;
}

std::string to_string(AuxKind kind) {
  switch (kind) {
    case AuxKind::none: return "none";
    case AuxKind::competitive: return "competitive";
    case AuxKind::noise: return "noise";
    case AuxKind::zero_pad: return "zero_pad";
  }
  return "?";
}

ObsLayout make_layout(EnvKind kind, AuxKind aux, int n_train) {
  ObsLayout layout;
  layout.kind = kind;
  layout.proprio_dim = proprio_dim(kind);
  layout.aux_kind = aux;
  layout.aux_dim = aux == AuxKind::none ? 0 : 2 * n_train;
  return layout;
}

RaceState reset(const RaceConfig& config, uint64_t /*seed*/) {
  config.validate();
  RaceState state;
  state.agents.assign(static_cast<size_t>(config.n_agents), AgentPhys{});
  state.t = 0;
  return state;
}

StepResult step(const RaceState& state, std::span<const double> actions,
                const RaceConfig& config) {
  if (state.t >= config.horizon) throw std::runtime_error("episode finished");
  if (actions.size() != state.agents.size())
    throw std::invalid_argument("action count does not match agent count");

  StepResult out;
  out.state.agents.resize(state.agents.size());
  out.rewards.resize(state.agents.size());

  for (size_t i = 0; i < state.agents.size(); ++i) {
    const AgentPhys& agent = state.agents[i];
    double a = std::clamp(actions[i], -1.0, 1.0);
    AgentPhys next = agent;
    if (config.kind == EnvKind::PointRacer) {
      next.v = agent.v + config.dt * (config.f_max * a - config.c_d * agent.v * std::abs(agent.v));
      next.stamina = 1.0;
    } else {
      next.v = agent.v +
               config.dt * (config.f_max * a * agent.stamina - config.c_d * agent.v * std::abs(agent.v));
      next.stamina = std::clamp(
          agent.stamina + config.dt * (config.rho * (1.0 - agent.stamina) - config.kappa * std::abs(a)),
          0.0, 1.0);
    }
    next.x = agent.x + config.dt * next.v;
    out.state.agents[i] = next;
    out.rewards[i] = next.v - config.w_ctrl * a * a;
  }

  out.state.t = state.t + 1;
  out.done = out.state.t == config.horizon;
  return out;
}

std::vector<double> proprio_obs(const AgentPhys& agent, EnvKind kind) {
  if (kind == EnvKind::PointRacer) return {agent.v};
  return {agent.v, agent.stamina};
}

std::vector<double> competitive_obs(const RaceState& state, int i,
                                    bool self_first) {
  const int n = static_cast<int>(state.agents.size());
  if (i < 0 || i >= n) throw std::out_of_range("agent index out of range");

  std::vector<double> out;
  out.reserve(2 * static_cast<size_t>(n));
  const AgentPhys& self = state.agents[static_cast<size_t>(i)];
  if (self_first) {
    out.push_back(0.0);
    out.push_back(0.0);
  }
  for (int j = 0; j < n; ++j) {
    if (self_first && j == i) continue;
    const AgentPhys& other = state.agents[static_cast<size_t>(j)];
    out.push_back(other.x - self.x);
    out.push_back(other.v - self.v);
  }
  return out;
}

std::vector<double> build_observation(const RaceState& state, int i,
                                      const ObsLayout& layout, Rng& rng,
                                      bool self_first) {
  std::vector<double> obs =
      proprio_obs(state.agents.at(static_cast<size_t>(i)), layout.kind);
  obs.reserve(static_cast<size_t>(layout.total_dim()));

  switch (layout.aux_kind) {
    case AuxKind::none:
      break;
    case AuxKind::competitive: {
      if (layout.aux_dim != 2 * static_cast<int>(state.agents.size()))
        throw std::invalid_argument("layout aux_dim does not match agent count");
      std::vector<double> comp = competitive_obs(state, i, self_first);
      obs.insert(obs.end(), comp.begin(), comp.end());
      break;
    }
    case AuxKind::noise:
      for (int d = 0; d < layout.aux_dim; ++d) obs.push_back(rng.normal());
      break;
    case AuxKind::zero_pad:
      obs.insert(obs.end(), static_cast<size_t>(layout.aux_dim), 0.0);
      break;
  }
  return obs;
}

}  // namespace compete
