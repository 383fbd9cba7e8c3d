#include "compete/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace compete {

void PpoConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must be in (0, 1]");
  if (!(lam >= 0.0 && lam <= 1.0)) throw std::invalid_argument("lam must be in [0, 1]");
  if (!(clip_eps > 0.0)) throw std::invalid_argument("clip_eps must be > 0");
  if (total_iterations < 0) throw std::invalid_argument("total_iterations must be >= 0");
  if (epochs_per_iter < 0) throw std::invalid_argument("epochs_per_iter must be >= 0");
}

size_t RolloutBuffer::total_steps() const {
  size_t n = 0;
  for (const Trajectory& traj : trajectories) n += traj.size();
  return n;
}

GaeResult compute_gae(std::span<const double> rewards,
                      std::span<const double> values,
                      std::span<const uint8_t> dones, double bootstrap_value,
                      double gamma, double lam) {
  const size_t n = rewards.size();
  if (n == 0) throw std::invalid_argument("compute_gae: empty input");
  if (values.size() != n || dones.size() != n)
    throw std::invalid_argument("compute_gae: length mismatch");

  GaeResult out;
  out.advantages.resize(n);
  out.returns.resize(n);
  double gae = 0.0;
  for (size_t t = n; t-- > 0;) {
    const double not_done = dones[t] ? 0.0 : 1.0;
    const double next_value = (t + 1 < n) ? values[t + 1] : bootstrap_value;
    const double delta = rewards[t] + gamma * next_value * not_done - values[t];
    gae = delta + gamma * lam * not_done * gae;
    out.advantages[t] = gae;
    out.returns[t] = gae + values[t];
  }
  return out;
}

double value_loss(std::span<const double> values_pred,
                  std::span<const double> returns) {
  if (values_pred.size() != returns.size())
    throw std::invalid_argument("value_loss: length mismatch");
  if (values_pred.empty()) return 0.0;
  double s = 0.0;
  for (size_t i = 0; i < values_pred.size(); ++i) {
    const double e = values_pred[i] - returns[i];
    s += e * e;
  }
  return s / static_cast<double>(values_pred.size());
}

double clipped_surrogate(std::span<const double> logp_new,
                         std::span<const double> logp_old,
                         std::span<const double> advantages, double clip_eps) {
  const size_t n = logp_new.size();
  if (logp_old.size() != n || advantages.size() != n)
    throw std::invalid_argument("clipped_surrogate: length mismatch");
  if (n == 0) throw std::invalid_argument("clipped_surrogate: empty input");
  double s = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double ratio = std::exp(logp_new[i] - logp_old[i]);
    if (!std::isfinite(ratio)) throw std::runtime_error("divergence detected");
    const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
    s += std::min(ratio * advantages[i], clipped * advantages[i]);
  }
  return s / static_cast<double>(n);
}

std::vector<double> normalize_advantages(std::vector<double> advantages) {
  const size_t n = advantages.size();
  if (n < 2) return advantages;
  double mean = 0.0;
  for (double a : advantages) mean += a;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double a : advantages) var += (a - mean) * (a - mean);
  var /= static_cast<double>(n);
  const double denom = std::sqrt(var) + 1e-8;
  for (double& a : advantages) a = (a - mean) / denom;
  return advantages;
}

namespace {

// Flat view of the pooled buffer used by the epoch loop.
struct Pool {
  std::vector<const std::vector<double>*> obs;
  std::vector<const std::vector<double>*> critic_obs;
  std::vector<const std::vector<double>*> actions;
  std::vector<double> logp_old;
  std::vector<double> advantages;
  std::vector<double> returns;

  size_t size() const { return logp_old.size(); }
};

Pool build_pool(const RolloutBuffer& buffer, const PpoConfig& config) {
  Pool pool;
  const size_t total = buffer.total_steps();
  pool.obs.reserve(total);
  pool.critic_obs.reserve(total);
  pool.actions.reserve(total);
  pool.logp_old.reserve(total);
  pool.advantages.reserve(total);
  pool.returns.reserve(total);

  const size_t obs_dim = buffer.trajectories.front().obs.front().size();
  for (const Trajectory& traj : buffer.trajectories) {
    if (traj.size() == 0) throw std::invalid_argument("ppo_update: empty trajectory");
    // A truncated final step keeps its bootstrap value alive in the GAE
    // recursion; a terminal one would cut it.
    std::vector<uint8_t> gae_dones(traj.dones.begin(), traj.dones.end());
    if (traj.truncated) gae_dones.back() = 0;
    GaeResult gae = compute_gae(traj.rewards, traj.values, gae_dones,
                                traj.truncated ? traj.bootstrap_value : 0.0,
                                config.gamma, config.lam);
    for (size_t t = 0; t < traj.size(); ++t) {
      if (traj.obs[t].size() != obs_dim)
        throw std::invalid_argument("ppo_update: inconsistent observation dims");
      pool.obs.push_back(&traj.obs[t]);
      pool.critic_obs.push_back(&traj.critic_obs_at(t));
      pool.actions.push_back(&traj.actions[t]);
      pool.logp_old.push_back(traj.logp_old[t]);
      pool.advantages.push_back(gae.advantages[t]);
      pool.returns.push_back(gae.returns[t]);
    }
  }
  pool.advantages = normalize_advantages(std::move(pool.advantages));
  return pool;
}

}  // namespace

UpdateStats ppo_update(RolloutBuffer& buffer, ParamSet& params,
                       const PpoConfig& config, int iteration) {
  config.validate();
  if (buffer.trajectories.empty())
    throw std::invalid_argument("ppo_update: empty buffer");

  const double lr =
      config.lr0 * (1.0 - static_cast<double>(iteration) /
                              static_cast<double>(std::max(1, config.total_iterations)));

  try {
    Pool pool = build_pool(buffer, config);
    const size_t n = pool.size();
    const double inv_n = 1.0 / static_cast<double>(n);

    Actor& actor = params.actor;
    ActorGrads agrads = make_zero_grads(actor);
    MlpGrads cgrads = make_zero_grads(params.critic);
    const ParamRefs actor_refs = actor_param_refs(actor);
    const ParamRefs critic_refs = mlp_param_refs(params.critic);

    MlpTape actor_tape, critic_tape;
    std::vector<double> ddist(static_cast<size_t>(actor.trunk.out_dim()));
    std::vector<double> dv(1);

    for (int epoch = 0; epoch < config.epochs_per_iter; ++epoch) {
      zero_grads(agrads);
      zero_grads(cgrads);

      for (size_t s = 0; s < n; ++s) {
        // critic: descend value_coef * mean squared error
        std::vector<double> vpred =
            mlp_forward(params.critic, *pool.critic_obs[s], &critic_tape);
        dv[0] = config.value_coef * 2.0 * (vpred[0] - pool.returns[s]) * inv_n;
        mlp_backward(params.critic, critic_tape, dv, cgrads);

        // actor: ascend clipped surrogate + entropy bonus
        std::vector<double> dist = mlp_forward(actor.trunk, *pool.obs[s], &actor_tape);
        const double logp_new = actor_logprob(actor, dist, *pool.actions[s]);
        const double ratio = std::exp(logp_new - pool.logp_old[s]);
        if (!std::isfinite(ratio)) throw std::runtime_error("divergence detected");
        const double adv = pool.advantages[s];
        const double u_plain = ratio * adv;
        const double u_clip =
            std::clamp(ratio, 1.0 - config.clip_eps, 1.0 + config.clip_eps) * adv;
        // d(min)/dlogp: the clipped branch is flat outside the clip range
        const double dlogp = (u_plain <= u_clip ? u_plain : 0.0) * inv_n;

        std::fill(ddist.begin(), ddist.end(), 0.0);
        if (actor.head == HeadKind::gaussian) {
          gaussian_logprob_grad(dist, actor.log_std, *pool.actions[s], dlogp,
                                ddist, agrads.log_std);
          if (config.entropy_coef != 0.0)
            for (double& g : agrads.log_std) g += config.entropy_coef * inv_n;
        } else {
          beta_logprob_grad(dist, *pool.actions[s], dlogp, ddist);
          if (config.entropy_coef != 0.0)
            beta_entropy_grad(dist, config.entropy_coef * inv_n, ddist);
        }
        mlp_backward(actor.trunk, actor_tape, ddist, agrads.trunk);
      }

      // optimizer descends; the actor objective is maximized
      for (auto& w : agrads.trunk.weights)
        for (double& g : w) g = -g;
      for (auto& b : agrads.trunk.biases)
        for (double& g : b) g = -g;
      for (double& g : agrads.log_std) g = -g;

      adam_step(actor_refs, actor_grad_refs(agrads), params.adam_actor, lr);
      adam_step(critic_refs, mlp_grad_refs(cgrads), params.adam_critic, lr);
    }

    // diagnostics on the post-update parameters
    UpdateStats stats;
    stats.lr_used = lr;
    std::vector<double> logp_new(n), vpred(n);
    double entropy_sum = 0.0, ratio_sum = 0.0;
    size_t clipped_count = 0;
    for (size_t s = 0; s < n; ++s) {
      std::vector<double> dist = mlp_forward(actor.trunk, *pool.obs[s], &actor_tape);
      logp_new[s] = actor_logprob(actor, dist, *pool.actions[s]);
      entropy_sum += actor_entropy(actor, dist);
      vpred[s] = mlp_forward(params.critic, *pool.critic_obs[s], &critic_tape)[0];
      const double ratio = std::exp(logp_new[s] - pool.logp_old[s]);
      ratio_sum += ratio;
      if (std::abs(ratio - 1.0) > config.clip_eps) ++clipped_count;
    }
    stats.policy_loss =
        -clipped_surrogate(logp_new, pool.logp_old, pool.advantages, config.clip_eps);
    stats.value_loss = value_loss(vpred, pool.returns);
    stats.entropy = entropy_sum * inv_n;
    stats.mean_ratio = ratio_sum * inv_n;
    stats.clip_fraction = static_cast<double>(clipped_count) * inv_n;
    if (!std::isfinite(stats.policy_loss) || !std::isfinite(stats.value_loss) ||
        !std::isfinite(stats.entropy) || !std::isfinite(stats.mean_ratio))
      throw std::runtime_error("divergence detected");

    buffer.clear();
    return stats;
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(std::string(e.what()) + " at iteration " +
                             std::to_string(iteration));
  }
}

}  // namespace compete
