#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "compete/ppo.hpp"
#include "oracles.hpp"

using namespace compete;

namespace {

// Minimal hand-rolled buffer: a single one-step trajectory sampled from the
// given params so that logp_old/value are genuinely on-policy.
RolloutBuffer one_step_buffer(ParamSet& params, const std::vector<double>& obs,
                              const std::vector<double>& action, double reward) {
  Trajectory traj;
  std::vector<double> dist = mlp_forward(params.actor.trunk, obs);
  traj.obs = {obs};
  traj.actions = {action};
  traj.logp_old = {actor_logprob(params.actor, dist, action)};
  traj.values = {mlp_forward(params.critic, obs)[0]};
  traj.rewards = {reward};
  traj.dones = {1};
  traj.truncated = true;
  traj.bootstrap_value = mlp_forward(params.critic, obs)[0];
  RolloutBuffer buffer;
  buffer.trajectories.push_back(std::move(traj));
  return buffer;
}

}  // namespace

TEST_CASE("gae: one-step terminal case") {
  std::vector<double> rewards = {1.0}, values = {0.5};
  std::vector<uint8_t> dones = {1};
  GaeResult r = compute_gae(rewards, values, dones, 0.0, 0.995, 0.0);
  CHECK(r.advantages[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(r.returns[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("gae: all zeros in, all zeros out") {
  std::vector<double> rewards(6, 0.0), values(6, 0.0);
  std::vector<uint8_t> dones(6, 0);
  GaeResult r = compute_gae(rewards, values, dones, 0.0, 0.99, 0.95);
  for (double a : r.advantages) CHECK(a == 0.0);
  for (double g : r.returns) CHECK(g == 0.0);
}

TEST_CASE("gae: recursion equals the brute-force double sum") {
  Rng rng(424242);
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const size_t n = 1 + static_cast<size_t>(rng.uniform() * 20);
    std::vector<double> rewards(n), values(n);
    std::vector<uint8_t> dones(n, 0);
    for (size_t t = 0; t < n; ++t) {
      rewards[t] = rng.uniform(-3, 3);
      values[t] = rng.uniform(-3, 3);
      dones[t] = rng.uniform() < 0.2 ? 1 : 0;
    }
    const double bootstrap = rng.uniform(-3, 3);
    const double gamma = rng.uniform(0.9, 1.0);
    const double lam = rng.uniform(0.0, 1.0);
    GaeResult got = compute_gae(rewards, values, dones, bootstrap, gamma, lam);
    std::vector<double> want =
        oracles::gae_double_sum(rewards, values, dones, bootstrap, gamma, lam);
    for (size_t t = 0; t < n; ++t)
      worst = std::max(worst, std::abs(got.advantages[t] - want[t]));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("gae rejects empty input") {
  CHECK_THROWS_AS(compute_gae({}, {}, {}, 0.0, 0.99, 0.95), std::invalid_argument);
}

TEST_CASE("value loss") {
  CHECK(value_loss(std::vector<double>{1, 2}, std::vector<double>{0, 0}) ==
        doctest::Approx(2.5).epsilon(1e-15));
  std::vector<double> same = {0.4, -1.2, 7.0};
  CHECK(value_loss(same, same) == 0.0);

  // quadratic homogeneity: scaling errors by c scales the loss by c^2
  std::vector<double> pred = {1.0, -0.5, 2.0}, target = {0.0, 0.0, 0.0};
  std::vector<double> pred3 = {3.0, -1.5, 6.0};
  CHECK(value_loss(pred3, target) == doctest::Approx(9.0 * value_loss(pred, target)));
}

TEST_CASE("clipped surrogate point values") {
  std::vector<double> zero = {0.0};
  // ratio = 1, A = 1
  CHECK(clipped_surrogate(zero, zero, std::vector<double>{1.0}, 0.2) ==
        doctest::Approx(1.0).epsilon(1e-15));
  // ratio = 2, A = 1: clipped at 1.2
  std::vector<double> ln2 = {std::log(2.0)};
  CHECK(clipped_surrogate(ln2, zero, std::vector<double>{1.0}, 0.2) ==
        doctest::Approx(1.2).epsilon(1e-12));
  // ratio = 0.5, A = -1: min(-0.5, -0.8) = -0.8
  std::vector<double> lnhalf = {std::log(0.5)};
  CHECK(clipped_surrogate(lnhalf, zero, std::vector<double>{-1.0}, 0.2) ==
        doctest::Approx(-0.8).epsilon(1e-12));
}

TEST_CASE("clipped surrogate rejects non-finite ratios") {
  std::vector<double> big = {800.0}, zero = {0.0}, adv = {1.0};
  CHECK_THROWS_WITH_AS(clipped_surrogate(big, zero, adv, 0.2), "divergence detected",
                       std::runtime_error);
}

TEST_CASE("advantage normalization") {
  std::vector<double> pm = normalize_advantages({1.0, -1.0});
  CHECK(pm[0] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(pm[1] == doctest::Approx(-1.0).epsilon(1e-7));

  std::vector<double> flat = normalize_advantages({3.0, 3.0, 3.0});
  for (double a : flat) CHECK(a == doctest::Approx(0.0).epsilon(1e-15));

  std::vector<double> single = normalize_advantages({42.0});
  CHECK(single == std::vector<double>{42.0});

  Rng rng(9);
  std::vector<double> random(257);
  for (double& a : random) a = rng.uniform(-10, 3);
  std::vector<double> normed = normalize_advantages(random);
  double mean = 0.0;
  for (double a : normed) mean += a;
  mean /= static_cast<double>(normed.size());
  double var = 0.0;
  for (double a : normed) var += (a - mean) * (a - mean);
  var /= static_cast<double>(normed.size());
  CHECK(std::abs(mean) <= 1e-12);
  CHECK(std::abs(std::sqrt(var) - 1.0) <= 1e-6);
}

TEST_CASE("clip region contributes exactly zero gradient") {
  // With ratio beyond the clip and positive advantage, the per-sample actor
  // gradient must vanish; adam then leaves the parameters untouched.
  Rng rng(55);
  ParamSet params = make_param_set(2, 2, 1, HeadKind::gaussian, rng);
  std::vector<double> obs = {0.5, -0.5};
  std::vector<double> dist = mlp_forward(params.actor.trunk, obs);
  std::vector<double> action = {dist[0] + 0.3};

  Trajectory traj;
  traj.obs = {obs};
  traj.actions = {action};
  // fake a stale logp so the ratio is ~ e^0.5 > 1.2 while advantage > 0
  traj.logp_old = {actor_logprob(params.actor, dist, action) - 0.5};
  traj.values = {0.0};
  traj.rewards = {1.0};
  traj.dones = {1};
  traj.truncated = false;
  RolloutBuffer buffer;
  buffer.trajectories.push_back(traj);

  PpoConfig cfg;
  cfg.epochs_per_iter = 1;
  cfg.total_iterations = 10;
  cfg.value_coef = 0.0;  // isolate the actor path

  const std::vector<std::vector<double>> weights_before = params.actor.trunk.weights;
  const std::vector<double> log_std_before = params.actor.log_std;
  ppo_update(buffer, params, cfg, 0);
  CHECK(params.actor.trunk.weights == weights_before);
  CHECK(params.actor.log_std == log_std_before);
}

TEST_CASE("zero epochs: parameters unchanged and ratio exactly one") {
  Rng rng(66);
  ParamSet params = make_param_set(1, 1, 1, HeadKind::gaussian, rng);
  RolloutBuffer buffer = one_step_buffer(params, {0.3}, {0.1}, 0.7);

  PpoConfig cfg;
  cfg.epochs_per_iter = 0;
  cfg.total_iterations = 10;
  const std::vector<std::vector<double>> weights_before = params.actor.trunk.weights;
  UpdateStats stats = ppo_update(buffer, params, cfg, 0);
  CHECK(params.actor.trunk.weights == weights_before);
  CHECK(stats.mean_ratio == 1.0);  // bitwise: same evaluation path
  CHECK(stats.clip_fraction == 0.0);
  CHECK(buffer.trajectories.empty());  // consumed
}

TEST_CASE("a positive-advantage action becomes more likely") {
  Rng rng(13);
  ParamSet params = make_param_set(1, 1, 1, HeadKind::gaussian, rng);
  std::vector<double> obs = {0.5}, action = {0.4};
  // reward above the value estimate => positive advantage
  RolloutBuffer buffer = one_step_buffer(params, obs, action, 5.0);
  const double logp_before = buffer.trajectories[0].logp_old[0];

  PpoConfig cfg;
  cfg.epochs_per_iter = 1;
  cfg.total_iterations = 10;
  ppo_update(buffer, params, cfg, 0);

  std::vector<double> dist = mlp_forward(params.actor.trunk, obs);
  CHECK(actor_logprob(params.actor, dist, action) > logp_before);
}

TEST_CASE("learning rate decays linearly to zero") {
  Rng rng(14);
  PpoConfig cfg;
  cfg.total_iterations = 8;
  cfg.epochs_per_iter = 0;

  ParamSet params = make_param_set(1, 1, 1, HeadKind::gaussian, rng);
  RolloutBuffer buffer = one_step_buffer(params, {0.0}, {0.0}, 1.0);
  UpdateStats last = ppo_update(buffer, params, cfg, cfg.total_iterations - 1);
  CHECK(last.lr_used == doctest::Approx(cfg.lr0 / 8.0).epsilon(1e-12));

  buffer = one_step_buffer(params, {0.0}, {0.0}, 1.0);
  UpdateStats first = ppo_update(buffer, params, cfg, 0);
  CHECK(first.lr_used == doctest::Approx(cfg.lr0).epsilon(1e-12));
}

TEST_CASE("on-policy ratio identity holds bitwise across a fresh buffer") {
  Rng rng(21);
  ParamSet params = make_param_set(2, 2, 1, HeadKind::gaussian, rng);
  Rng sample_rng(22);

  RolloutBuffer buffer;
  Trajectory traj;
  std::vector<double> values;
  for (int t = 0; t < 32; ++t) {
    std::vector<double> obs = {sample_rng.uniform(-1, 1), sample_rng.uniform(-1, 1)};
    std::vector<double> dist = mlp_forward(params.actor.trunk, obs);
    std::vector<double> action = actor_sample(params.actor, dist, sample_rng);
    traj.obs.push_back(obs);
    traj.actions.push_back(action);
    traj.logp_old.push_back(actor_logprob(params.actor, dist, action));
    traj.values.push_back(mlp_forward(params.critic, obs)[0]);
    traj.rewards.push_back(sample_rng.uniform(-1, 1));
    traj.dones.push_back(t == 31 ? 1 : 0);
  }
  traj.truncated = true;
  traj.bootstrap_value = 0.0;
  buffer.trajectories.push_back(traj);

  for (size_t t = 0; t < traj.size(); ++t) {
    std::vector<double> dist = mlp_forward(params.actor.trunk, traj.obs[t]);
    const double logp = actor_logprob(params.actor, dist, traj.actions[t]);
    CHECK(std::exp(logp - traj.logp_old[t]) == 1.0);
  }
}

TEST_CASE("one small-lr update does not decrease the surrogate on its own buffer") {
  Rng rng(33);
  ParamSet params = make_param_set(1, 1, 1, HeadKind::gaussian, rng);
  Rng sample_rng(34);

  RolloutBuffer buffer;
  Trajectory traj;
  for (int t = 0; t < 64; ++t) {
    std::vector<double> obs = {sample_rng.uniform(-1, 1)};
    std::vector<double> dist = mlp_forward(params.actor.trunk, obs);
    std::vector<double> action = actor_sample(params.actor, dist, sample_rng);
    traj.obs.push_back(obs);
    traj.actions.push_back(action);
    traj.logp_old.push_back(actor_logprob(params.actor, dist, action));
    traj.values.push_back(mlp_forward(params.critic, obs)[0]);
    traj.rewards.push_back(obs[0] * action[0]);  // informative signal
    traj.dones.push_back(t == 63 ? 1 : 0);
  }
  traj.truncated = true;
  traj.bootstrap_value = 0.0;

  // keep a copy: ppo_update consumes its buffer
  RolloutBuffer again;
  again.trajectories.push_back(traj);
  buffer.trajectories.push_back(traj);

  PpoConfig cfg;
  cfg.lr0 = 1e-4;
  cfg.epochs_per_iter = 1;
  cfg.total_iterations = 1000;  // effectively undecayed

  UpdateStats after_zero;
  {
    // surrogate before any step (0 epochs evaluates only)
    PpoConfig peek = cfg;
    peek.epochs_per_iter = 0;
    RolloutBuffer copy;
    copy.trajectories.push_back(traj);
    after_zero = ppo_update(copy, params, peek, 0);
  }
  UpdateStats after_one = ppo_update(again, params, cfg, 0);
  // policy_loss is the negated surrogate
  CHECK(after_one.policy_loss <= after_zero.policy_loss + 1e-12);
}

TEST_CASE("empty buffer is rejected") {
  Rng rng(77);
  ParamSet params = make_param_set(1, 1, 1, HeadKind::gaussian, rng);
  RolloutBuffer buffer;
  PpoConfig cfg;
  CHECK_THROWS_AS(ppo_update(buffer, params, cfg, 0), std::invalid_argument);
}

TEST_CASE("divergence is reported with iteration context") {
  Rng rng(88);
  ParamSet params = make_param_set(1, 1, 1, HeadKind::gaussian, rng);
  RolloutBuffer buffer = one_step_buffer(params, {0.1}, {0.2}, 1.0);
  buffer.trajectories[0].logp_old[0] = -1000.0;  // ratio overflows

  PpoConfig cfg;
  cfg.total_iterations = 10;
  try {
    ppo_update(buffer, params, cfg, 3);
    CHECK(false);
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("divergence detected") != std::string::npos);
    CHECK(msg.find("iteration 3") != std::string::npos);
  }
}
