#ifndef COMPETE_ENV_HPP_
#define COMPETE_ENV_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "compete/rng.hpp"

namespace compete {

// N-agent 1-D race tasks. Agents are homogeneous and never interact
// physically; the only coupling is through observations.
enum class EnvKind { PointRacer, StaminaRacer };

std::string to_string(EnvKind kind);
EnvKind env_kind_from_string(const std::string& s);

// Proprioceptive/action dimensions are fixed per kind.
int proprio_dim(EnvKind kind);
int action_dim(EnvKind kind);

struct RaceConfig {
  EnvKind kind = EnvKind::PointRacer;
  int n_agents = 1;
  double dt = 0.05;
  int horizon = 500;
  double f_max = 1.0;
  double c_d = 0.1;
  double w_ctrl = 0.1;  // 0.1 PointRacer, 0.05 StaminaRacer (see make_race_config)
  double rho = 0.05;    // stamina regen rate
  double kappa = 0.15;  // stamina drain rate
  bool self_first = false;  // reorder competitive blocks so the self pair leads

  void validate() const;
};

// Config with the per-kind w_ctrl default applied.
RaceConfig make_race_config(EnvKind kind, int n_agents);

struct AgentPhys {
  double x = 0.0;
  double v = 0.0;
  double stamina = 1.0;  // fixed at 1 for PointRacer
};

struct RaceState {
  std::vector<AgentPhys> agents;
  int t = 0;
};

enum class AuxKind { none, competitive, noise, zero_pad };

std::string to_string(AuxKind kind);

struct ObsLayout {
  EnvKind kind = EnvKind::PointRacer;
  int proprio_dim = 0;
  int aux_dim = 0;  // 2*N_train for competitive/noise/zero_pad, 0 otherwise
  AuxKind aux_kind = AuxKind::none;

  int total_dim() const { return proprio_dim + aux_dim; }
};

ObsLayout make_layout(EnvKind kind, AuxKind aux, int n_train);

struct StepResult {
  RaceState state;
  std::vector<double> rewards;
  bool done = false;
};

// All agents start at rest at the origin; no reset noise. The seed parameter
// is part of the interface but the start state does not depend on it.
RaceState reset(const RaceConfig& config, uint64_t seed);

// Advances one step. Actions are clamped to [-1, 1] before use.
// Throws if the episode is already finished.
StepResult step(const RaceState& state, std::span<const double> actions,
                const RaceConfig& config);

// [v] for PointRacer, [v, stamina] for StaminaRacer. Absolute position is
// deliberately excluded: the task is about speed, not location.
std::vector<double> proprio_obs(const AgentPhys& agent, EnvKind kind);

// Pairwise-difference block of length 2N: for j = 1..N in agent-index order,
// [x^j - x^i, v^j - v^i]. The self pair (j == i) is exactly [0, 0].
// self_first moves the self pair to the front, keeping the others in order.
std::vector<double> competitive_obs(const RaceState& state, int i,
                                    bool self_first = false);

// Full per-agent observation: proprio block followed by the aux block
// selected by the layout. Noise entries are fresh standard-normal draws.
std::vector<double> build_observation(const RaceState& state, int i,
                                      const ObsLayout& layout, Rng& rng,
                                      bool self_first = false);

}  // namespace compete

#endif  // COMPETE_ENV_HPP_
