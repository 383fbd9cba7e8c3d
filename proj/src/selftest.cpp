#include "compete/selftest.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "compete/env.hpp"
#include "compete/nn.hpp"
#include "compete/ppo.hpp"
#include "compete/rng.hpp"

namespace compete {

namespace {

struct Check {
  std::ostream& out;
  bool all_ok = true;

  void report(const std::string& name, bool ok, const std::string& detail = "") {
    if (ok) {
      out << "ok " << name << "\n";
    } else {
      all_ok = false;
      out << "FAILED " << name << (detail.empty() ? "" : ": " + detail) << "\n";
    }
  }
};

// brute-force double sum, independent of the recursive path
std::vector<double> gae_by_double_sum(const std::vector<double>& rewards,
                                      const std::vector<double>& values,
                                      const std::vector<uint8_t>& dones,
                                      double bootstrap, double gamma, double lam) {
  const size_t n = rewards.size();
  std::vector<double> delta(n);
  for (size_t t = 0; t < n; ++t) {
    const double next_v = (t + 1 < n) ? values[t + 1] : bootstrap;
    delta[t] = rewards[t] + gamma * next_v * (dones[t] ? 0.0 : 1.0) - values[t];
  }
  std::vector<double> adv(n, 0.0);
  for (size_t t = 0; t < n; ++t) {
    double w = 1.0;
    for (size_t u = t; u < n; ++u) {
      adv[t] += w * delta[u];
      if (dones[u]) break;
      w *= gamma * lam;
    }
  }
  return adv;
}

bool check_gae_oracle(Check& check) {
  Rng rng(20240901);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const size_t n = 1 + static_cast<size_t>(rng.uniform() * 20);
    std::vector<double> rewards(n), values(n);
    std::vector<uint8_t> dones(n, 0);
    for (size_t t = 0; t < n; ++t) {
      rewards[t] = rng.uniform(-2.0, 2.0);
      values[t] = rng.uniform(-2.0, 2.0);
      dones[t] = rng.uniform() < 0.15 ? 1 : 0;
    }
    const double bootstrap = rng.uniform(-2.0, 2.0);
    const double gamma = rng.uniform(0.9, 1.0);
    const double lam = rng.uniform(0.0, 1.0);
    GaeResult got = compute_gae(rewards, values, dones, bootstrap, gamma, lam);
    std::vector<double> want =
        gae_by_double_sum(rewards, values, dones, bootstrap, gamma, lam);
    for (size_t t = 0; t < n; ++t)
      worst = std::max(worst, std::abs(got.advantages[t] - want[t]));
  }
  check.report("gae-oracle", worst <= 1e-12,
               "max deviation " + std::to_string(worst));
  return worst <= 1e-12;
}

// central finite differences over a parameter pack
bool gradients_match(const ParamRefs& params, const GradRefs& analytic,
                     const std::function<double()>& eval, double* worst_out) {
  const double h = 1e-5;
  double worst = 0.0;
  bool ok = true;
  for (size_t k = 0; k < params.size(); ++k) {
    for (size_t i = 0; i < params[k]->size(); ++i) {
      double& p = (*params[k])[i];
      const double saved = p;
      p = saved + h;
      const double up = eval();
      p = saved - h;
      const double down = eval();
      p = saved;
      const double fd = (up - down) / (2.0 * h);
      const double an = (*analytic[k])[i];
      const double err = std::abs(an - fd);
      const double tol = 1e-8 + 1e-5 * std::max(std::abs(an), std::abs(fd));
      worst = std::max(worst, err - tol);
      if (err > tol) ok = false;
    }
  }
  if (worst_out) *worst_out = worst;
  return ok;
}

bool check_value_loss_grad(Check& check) {
  Rng rng(7);
  Mlp critic = make_mlp({3, 6, 6, 1}, rng);
  std::vector<double> x = {0.3, -1.1, 0.7};
  const double target = 0.9;

  MlpTape tape;
  MlpGrads grads = make_zero_grads(critic);
  std::vector<double> v = mlp_forward(critic, x, &tape);
  std::vector<double> dy = {2.0 * (v[0] - target)};
  mlp_backward(critic, tape, dy, grads);

  const auto eval = [&] {
    const double e = mlp_forward(critic, x)[0] - target;
    return e * e;
  };
  const bool ok =
      gradients_match(mlp_param_refs(critic), mlp_grad_refs(grads), eval, nullptr);
  check.report("value-loss-gradcheck", ok);
  return ok;
}

bool check_surrogate_grad(Check& check, HeadKind head) {
  Rng rng(head == HeadKind::gaussian ? 11 : 13);
  const int adim = 1;
  ParamSet ps = [&] {
    Rng init(42);
    ParamSet out;
    const int trunk_out = head == HeadKind::gaussian ? adim : 2 * adim;
    out.actor.trunk = make_mlp({3, 6, 6, trunk_out}, init);
    out.actor.head = head;
    out.actor.action_dim = adim;
    if (head == HeadKind::gaussian) out.actor.log_std.assign(adim, -0.2);
    return out;
  }();

  std::vector<double> x = {0.5, -0.3, 1.2};
  std::vector<double> action = {head == HeadKind::gaussian ? 0.4 : 0.3};
  const double adv = 1.3;
  const double clip_eps = 0.2;
  std::vector<double> dist0 = mlp_forward(ps.actor.trunk, x);
  const double logp_old = actor_logprob(ps.actor, dist0, action) - 0.05;

  const auto objective = [&] {
    std::vector<double> dist = mlp_forward(ps.actor.trunk, x);
    const double ratio = std::exp(actor_logprob(ps.actor, dist, action) - logp_old);
    const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
    return std::min(ratio * adv, clipped * adv);
  };

  MlpTape tape;
  ActorGrads grads = make_zero_grads(ps.actor);
  std::vector<double> dist = mlp_forward(ps.actor.trunk, x, &tape);
  const double ratio = std::exp(actor_logprob(ps.actor, dist, action) - logp_old);
  const double u_plain = ratio * adv;
  const double u_clip = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * adv;
  const double dlogp = u_plain <= u_clip ? u_plain : 0.0;
  std::vector<double> ddist(dist.size(), 0.0);
  if (head == HeadKind::gaussian)
    gaussian_logprob_grad(dist, ps.actor.log_std, action, dlogp, ddist, grads.log_std);
  else
    beta_logprob_grad(dist, action, dlogp, ddist);
  mlp_backward(ps.actor.trunk, tape, ddist, grads.trunk);

  const std::string name =
      std::string("surrogate-gradcheck-") + to_string(head);
  const bool ok = gradients_match(actor_param_refs(ps.actor),
                                  actor_grad_refs(grads), objective, nullptr);
  check.report(name, ok);
  return ok;
}

bool check_entropy_grad(Check& check) {
  Rng init(99);
  Mlp trunk = make_mlp({2, 5, 5, 2}, init);
  std::vector<double> x = {0.4, -0.9};

  MlpTape tape;
  MlpGrads grads = make_zero_grads(trunk);
  std::vector<double> pre = mlp_forward(trunk, x, &tape);
  std::vector<double> dpre(pre.size(), 0.0);
  beta_entropy_grad(pre, 1.0, dpre);
  mlp_backward(trunk, tape, dpre, grads);

  const auto eval = [&] { return beta_entropy(mlp_forward(trunk, x)); };
  const bool ok =
      gradients_match(mlp_param_refs(trunk), mlp_grad_refs(grads), eval, nullptr);
  check.report("entropy-gradcheck-beta", ok);
  return ok;
}

bool check_observation_properties(Check& check) {
  Rng rng(31415);
  bool antisym = true, self_zero = true, dims = true;
  for (int trial = 0; trial < 500 && (antisym && self_zero && dims); ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform() * 5);
    RaceState state;
    state.agents.resize(static_cast<size_t>(n));
    for (AgentPhys& agent : state.agents) {
      agent.x = rng.uniform(-5.0, 5.0);
      agent.v = rng.uniform(-3.0, 3.0);
      agent.stamina = rng.uniform();
    }
    std::vector<std::vector<double>> blocks(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      blocks[static_cast<size_t>(i)] = competitive_obs(state, i);
      if (static_cast<int>(blocks[static_cast<size_t>(i)].size()) != 2 * n) dims = false;
      if (blocks[static_cast<size_t>(i)][2 * static_cast<size_t>(i)] != 0.0 ||
          blocks[static_cast<size_t>(i)][2 * static_cast<size_t>(i) + 1] != 0.0)
        self_zero = false;
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int d = 0; d < 2; ++d)
          if (blocks[static_cast<size_t>(i)][2 * static_cast<size_t>(j) + static_cast<size_t>(d)] !=
              -blocks[static_cast<size_t>(j)][2 * static_cast<size_t>(i) + static_cast<size_t>(d)])
            antisym = false;
  }
  check.report("obs-antisymmetry", antisym);
  check.report("obs-self-zero", self_zero);
  check.report("obs-dimensions", dims);
  return antisym && self_zero && dims;
}

bool check_noise_zero_mean(Check& check) {
  Rng rng(271828);
  RaceState state;
  state.agents.resize(2);
  const ObsLayout layout = make_layout(EnvKind::PointRacer, AuxKind::noise, 2);
  const int draws = 20000;
  double acc = 0.0;
  for (int k = 0; k < draws; ++k) {
    std::vector<double> obs = build_observation(state, 0, layout, rng);
    for (int d = layout.proprio_dim; d < layout.total_dim(); ++d)
      acc += obs[static_cast<size_t>(d)];
  }
  const double mean = acc / (draws * layout.aux_dim);
  const bool ok = std::abs(mean) < 3.0 / std::sqrt(double(draws) * layout.aux_dim);
  check.report("noise-zero-mean", ok, "mean " + std::to_string(mean));
  return ok;
}

}  // namespace

bool run_selftest(std::ostream& out) {
  Check check{out};
  check_gae_oracle(check);
  check_value_loss_grad(check);
  check_surrogate_grad(check, HeadKind::gaussian);
  check_surrogate_grad(check, HeadKind::beta);
  check_entropy_grad(check);
  check_observation_properties(check);
  check_noise_zero_mean(check);
  out << (check.all_ok ? "selftest passed" : "selftest FAILED") << "\n";
  return check.all_ok;
}

}  // namespace compete
