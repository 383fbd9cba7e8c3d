#ifndef COMPETE_PPO_HPP_
#define COMPETE_PPO_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "compete/nn.hpp"

namespace compete {

struct PpoConfig {
  double gamma = 0.995;
  double lam = 0.95;
  double clip_eps = 0.2;
  double lr0 = 0.0005;
  int total_iterations = 500;
  int epochs_per_iter = 10;
  double entropy_coef = 0.0;
  double value_coef = 1.0;

  void validate() const;
};

// One whole episode of one agent. critic_obs is only populated when the
// critic input differs from the actor observation (centralized critic).
struct Trajectory {
  std::vector<std::vector<double>> obs;
  std::vector<std::vector<double>> critic_obs;
  std::vector<std::vector<double>> actions;
  std::vector<double> rewards;
  std::vector<double> logp_old;
  std::vector<double> values;
  std::vector<uint8_t> dones;  // 1 only at the final record
  int agent_id = 0;
  bool truncated = true;            // episode ended by time limit
  double bootstrap_value = 0.0;     // V of the state after the final step

  size_t size() const { return rewards.size(); }
  const std::vector<double>& critic_obs_at(size_t t) const {
    return critic_obs.empty() ? obs[t] : critic_obs[t];
  }
};

// Experience from one sampling phase; pooled across agents in shared mode.
struct RolloutBuffer {
  std::vector<Trajectory> trajectories;

  size_t total_steps() const;
  void clear() { trajectories.clear(); }
};

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;
  double lr_used = 0.0;
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// delta_t = r_t + gamma * V_{t+1} * (1 - done_t) - V_t with V_T taken from
// bootstrap_value; advantages by the backward lambda recursion; returns are
// advantage + value (the critic regression target).
GaeResult compute_gae(std::span<const double> rewards,
                      std::span<const double> values,
                      std::span<const uint8_t> dones, double bootstrap_value,
                      double gamma, double lam);

// Mean squared error over every pooled sample.
double value_loss(std::span<const double> values_pred,
                  std::span<const double> returns);

// Mean over samples of min(ratio * A, clip(ratio, 1-eps, 1+eps) * A);
// an objective to maximize. Throws on non-finite ratios.
double clipped_surrogate(std::span<const double> logp_new,
                         std::span<const double> logp_old,
                         std::span<const double> advantages, double clip_eps);

// Zero mean, unit population std (+1e-8). Inputs shorter than 2 pass through.
std::vector<double> normalize_advantages(std::vector<double> advantages);

// Full-batch PPO update: GAE per trajectory, pooled advantage normalization,
// epochs_per_iter gradient steps on actor (ascent) and critic (descent) with
// linearly decayed learning rate. The buffer is consumed.
UpdateStats ppo_update(RolloutBuffer& buffer, ParamSet& params,
                       const PpoConfig& config, int iteration);

}  // namespace compete

#endif  // COMPETE_PPO_HPP_
