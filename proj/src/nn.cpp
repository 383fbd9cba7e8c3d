#include "compete/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace compete {

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * ln(2*pi)

// Four independent accumulators so the compiler can vectorize without
// changing the (fixed) summation order.
inline double dot(const double* w, const double* x, int n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += w[i] * x[i];
    s1 += w[i + 1] * x[i + 1];
    s2 += w[i + 2] * x[i + 2];
    s3 += w[i + 3] * x[i + 3];
  }
  double s = (s0 + s1) + (s2 + s3);
  for (; i < n; ++i) s += w[i] * x[i];
  return s;
}

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline double log_beta_fn(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

// alpha/beta and their pre-activation sensitivities for one action dim
struct BetaShape {
  double alpha, beta, dalpha, dbeta;
};

inline BetaShape beta_shape(std::span<const double> pre, int d, int adim) {
  BetaShape s;
  s.alpha = 1.0 + softplus(pre[d]);
  s.beta = 1.0 + softplus(pre[adim + d]);
  s.dalpha = sigmoid(pre[d]);
  s.dbeta = sigmoid(pre[adim + d]);
  return s;
}

inline double clamp_unit_open(double a) {
  return std::clamp(a, -1.0 + 1e-6, 1.0 - 1e-6);
}

}  // namespace

Mlp make_mlp(const std::vector<int>& dims, Rng& rng, double final_scale) {
  if (dims.size() < 2) throw std::invalid_argument("mlp needs >= 2 dims");
  Mlp mlp;
  mlp.layer_dims = dims;
  const size_t n_layers = dims.size() - 1;
  mlp.weights.resize(n_layers);
  mlp.biases.resize(n_layers);
  for (size_t l = 0; l < n_layers; ++l) {
    const int fan_in = dims[l];
    const int fan_out = dims[l + 1];
    const double bound = std::sqrt(1.0 / fan_in);
    const double scale = (l + 1 == n_layers) ? final_scale : 1.0;
    mlp.weights[l].resize(static_cast<size_t>(fan_out) * fan_in);
    for (double& w : mlp.weights[l]) w = scale * rng.uniform(-bound, bound);
    mlp.biases[l].resize(static_cast<size_t>(fan_out));
    for (double& b : mlp.biases[l]) b = scale * rng.uniform(-bound, bound);
  }
  return mlp;
}

MlpGrads make_zero_grads(const Mlp& mlp) {
  MlpGrads grads;
  grads.weights.resize(mlp.weights.size());
  grads.biases.resize(mlp.biases.size());
  for (size_t l = 0; l < mlp.weights.size(); ++l) {
    grads.weights[l].assign(mlp.weights[l].size(), 0.0);
    grads.biases[l].assign(mlp.biases[l].size(), 0.0);
  }
  return grads;
}

void zero_grads(MlpGrads& grads) {
  for (auto& w : grads.weights) std::fill(w.begin(), w.end(), 0.0);
  for (auto& b : grads.biases) std::fill(b.begin(), b.end(), 0.0);
}

std::vector<double> mlp_forward(const Mlp& mlp, std::span<const double> x,
                                MlpTape* tape) {
  const size_t n_layers = mlp.weights.size();
  if (static_cast<int>(x.size()) != mlp.in_dim())
    throw std::invalid_argument("mlp_forward: input dim mismatch");

  MlpTape local;
  MlpTape& t = tape ? *tape : local;
  t.act.resize(n_layers + 1);
  t.act[0].assign(x.begin(), x.end());

  for (size_t l = 0; l < n_layers; ++l) {
    const int in = mlp.layer_dims[l];
    const int out = mlp.layer_dims[l + 1];
    const bool last = (l + 1 == n_layers);
    const std::vector<double>& a = t.act[l];
    std::vector<double>& z = t.act[l + 1];
    z.resize(static_cast<size_t>(out));
    const double* w = mlp.weights[l].data();
    for (int o = 0; o < out; ++o) {
      double s = mlp.biases[l][static_cast<size_t>(o)] + dot(w + static_cast<size_t>(o) * in, a.data(), in);
      z[static_cast<size_t>(o)] = last ? s : std::tanh(s);
    }
  }
  return t.act.back();
}

void mlp_backward(const Mlp& mlp, const MlpTape& tape,
                  std::span<const double> dy, MlpGrads& grads,
                  std::vector<double>* dx) {
  const size_t n_layers = mlp.weights.size();
  if (tape.act.size() != n_layers + 1)
    throw std::invalid_argument("mlp_backward: tape does not match network");
  if (static_cast<int>(dy.size()) != mlp.out_dim())
    throw std::invalid_argument("mlp_backward: dy dim mismatch");

  std::vector<double> dz(dy.begin(), dy.end());
  std::vector<double> da;
  for (size_t l = n_layers; l-- > 0;) {
    const int in = mlp.layer_dims[l];
    const int out = mlp.layer_dims[l + 1];
    const std::vector<double>& a = tape.act[l];
    if (l + 1 != n_layers) {
      // dz currently holds d(post-tanh); fold in the tanh derivative
      const std::vector<double>& h = tape.act[l + 1];
      for (int o = 0; o < out; ++o)
        dz[static_cast<size_t>(o)] *= 1.0 - h[static_cast<size_t>(o)] * h[static_cast<size_t>(o)];
    }
    double* gw = grads.weights[l].data();
    for (int o = 0; o < out; ++o) {
      const double g = dz[static_cast<size_t>(o)];
      grads.biases[l][static_cast<size_t>(o)] += g;
      double* row = gw + static_cast<size_t>(o) * in;
      const double* ai = a.data();
      for (int i = 0; i < in; ++i) row[i] += g * ai[i];
    }
    if (l > 0 || dx) {
      da.assign(static_cast<size_t>(in), 0.0);
      const double* w = mlp.weights[l].data();
      for (int o = 0; o < out; ++o) {
        const double g = dz[static_cast<size_t>(o)];
        const double* row = w + static_cast<size_t>(o) * in;
        for (int i = 0; i < in; ++i) da[static_cast<size_t>(i)] += g * row[i];
      }
      dz.swap(da);
    }
  }
  if (dx) *dx = dz;
}

// --- Gaussian head ---

double gaussian_logprob(std::span<const double> mean,
                        std::span<const double> log_std,
                        std::span<const double> action) {
  if (mean.size() != action.size() || mean.size() != log_std.size())
    throw std::invalid_argument("gaussian_logprob: dim mismatch");
  double lp = 0.0;
  for (size_t d = 0; d < mean.size(); ++d) {
    const double z = (action[d] - mean[d]) * std::exp(-log_std[d]);
    lp += -0.5 * z * z - log_std[d] - kHalfLog2Pi;
  }
  return lp;
}

void gaussian_logprob_grad(std::span<const double> mean,
                           std::span<const double> log_std,
                           std::span<const double> action, double w,
                           std::span<double> dmean, std::span<double> dlog_std) {
  for (size_t d = 0; d < mean.size(); ++d) {
    const double inv_sigma = std::exp(-log_std[d]);
    const double z = (action[d] - mean[d]) * inv_sigma;
    dmean[d] += w * z * inv_sigma;
    dlog_std[d] += w * (z * z - 1.0);
  }
}

std::vector<double> gaussian_sample(std::span<const double> mean,
                                    std::span<const double> log_std, Rng& rng) {
  std::vector<double> a(mean.size());
  for (size_t d = 0; d < mean.size(); ++d)
    a[d] = mean[d] + std::exp(log_std[d]) * rng.normal();
  return a;
}

double gaussian_entropy(std::span<const double> log_std) {
  double h = 0.0;
  for (double ls : log_std) h += ls + 0.5 + kHalfLog2Pi;
  return h;
}

// --- Beta head ---

double softplus(double x) {
  // stable: log(1 + e^x) = max(x, 0) + log1p(e^{-|x|})
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double digamma(double x) {
  double r = 0.0;
  while (x < 10.0) {
    r -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  r += std::log(x) - 0.5 * inv -
       inv2 * (1.0 / 12 -
               inv2 * (1.0 / 120 -
                       inv2 * (1.0 / 252 -
                               inv2 * (1.0 / 240 -
                                       inv2 * (1.0 / 132 - inv2 * (691.0 / 32760))))));
  return r;
}

double trigamma(double x) {
  double r = 0.0;
  while (x < 10.0) {
    r += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  r += inv * (1.0 + 0.5 * inv +
              inv2 * (1.0 / 6 -
                      inv2 * (1.0 / 30 -
                              inv2 * (1.0 / 42 -
                                      inv2 * (1.0 / 30 - inv2 * (5.0 / 66))))));
  return r;
}

double beta_logprob_ab(double alpha, double beta, double action) {
  const double a = clamp_unit_open(action);
  const double u = 0.5 * (a + 1.0);
  return (alpha - 1.0) * std::log(u) + (beta - 1.0) * std::log1p(-u) -
         log_beta_fn(alpha, beta) - std::log(2.0);
}

double beta_logprob(std::span<const double> pre, std::span<const double> action) {
  const int adim = static_cast<int>(action.size());
  if (static_cast<int>(pre.size()) != 2 * adim)
    throw std::invalid_argument("beta_logprob: pre dim mismatch");
  double lp = 0.0;
  for (int d = 0; d < adim; ++d) {
    const BetaShape s = beta_shape(pre, d, adim);
    lp += beta_logprob_ab(s.alpha, s.beta, action[static_cast<size_t>(d)]);
  }
  return lp;
}

void beta_logprob_grad(std::span<const double> pre,
                       std::span<const double> action, double w,
                       std::span<double> dpre) {
  const int adim = static_cast<int>(action.size());
  for (int d = 0; d < adim; ++d) {
    const BetaShape s = beta_shape(pre, d, adim);
    const double a = clamp_unit_open(action[static_cast<size_t>(d)]);
    const double u = 0.5 * (a + 1.0);
    const double psi_ab = digamma(s.alpha + s.beta);
    const double dl_dalpha = std::log(u) - digamma(s.alpha) + psi_ab;
    const double dl_dbeta = std::log1p(-u) - digamma(s.beta) + psi_ab;
    dpre[static_cast<size_t>(d)] += w * dl_dalpha * s.dalpha;
    dpre[static_cast<size_t>(adim + d)] += w * dl_dbeta * s.dbeta;
  }
}

std::vector<double> beta_sample(std::span<const double> pre, Rng& rng) {
  const int adim = static_cast<int>(pre.size()) / 2;
  std::vector<double> a(static_cast<size_t>(adim));
  for (int d = 0; d < adim; ++d) {
    const BetaShape s = beta_shape(pre, d, adim);
    a[static_cast<size_t>(d)] = 2.0 * rng.beta(s.alpha, s.beta) - 1.0;
  }
  return a;
}

double beta_entropy(std::span<const double> pre) {
  const int adim = static_cast<int>(pre.size()) / 2;
  double h = 0.0;
  for (int d = 0; d < adim; ++d) {
    const BetaShape s = beta_shape(pre, d, adim);
    const double ab = s.alpha + s.beta;
    h += log_beta_fn(s.alpha, s.beta) - (s.alpha - 1.0) * digamma(s.alpha) -
         (s.beta - 1.0) * digamma(s.beta) + (ab - 2.0) * digamma(ab) + std::log(2.0);
  }
  return h;
}

void beta_entropy_grad(std::span<const double> pre, double w,
                       std::span<double> dpre) {
  const int adim = static_cast<int>(pre.size()) / 2;
  for (int d = 0; d < adim; ++d) {
    const BetaShape s = beta_shape(pre, d, adim);
    const double ab = s.alpha + s.beta;
    const double common = (ab - 2.0) * trigamma(ab);
    const double dh_dalpha = -(s.alpha - 1.0) * trigamma(s.alpha) + common;
    const double dh_dbeta = -(s.beta - 1.0) * trigamma(s.beta) + common;
    dpre[static_cast<size_t>(d)] += w * dh_dalpha * s.dalpha;
    dpre[static_cast<size_t>(adim + d)] += w * dh_dbeta * s.dbeta;
  }
}

std::vector<double> beta_mean_action(std::span<const double> pre) {
  const int adim = static_cast<int>(pre.size()) / 2;
  std::vector<double> a(static_cast<size_t>(adim));
  for (int d = 0; d < adim; ++d) {
    const BetaShape s = beta_shape(pre, d, adim);
    a[static_cast<size_t>(d)] = 2.0 * s.alpha / (s.alpha + s.beta) - 1.0;
  }
  return a;
}

// --- Actor ---

std::string to_string(HeadKind head) {
  return head == HeadKind::gaussian ? "gaussian" : "beta";
}

HeadKind head_kind_from_string(const std::string& s) {
  if (s == "gaussian") return HeadKind::gaussian;
  if (s == "beta") return HeadKind::beta;
  throw std::invalid_argument("unknown head kind: " + s);
}

ActorGrads make_zero_grads(const Actor& actor) {
  ActorGrads grads;
  grads.trunk = make_zero_grads(actor.trunk);
  grads.log_std.assign(actor.log_std.size(), 0.0);
  return grads;
}

void zero_grads(ActorGrads& grads) {
  zero_grads(grads.trunk);
  std::fill(grads.log_std.begin(), grads.log_std.end(), 0.0);
}

double actor_logprob(const Actor& actor, std::span<const double> dist,
                     std::span<const double> action) {
  if (actor.head == HeadKind::gaussian)
    return gaussian_logprob(dist, actor.log_std, action);
  return beta_logprob(dist, action);
}

std::vector<double> actor_sample(const Actor& actor,
                                 std::span<const double> dist, Rng& rng) {
  if (actor.head == HeadKind::gaussian)
    return gaussian_sample(dist, actor.log_std, rng);
  return beta_sample(dist, rng);
}

std::vector<double> actor_mean_action(const Actor& actor,
                                      std::span<const double> dist) {
  if (actor.head == HeadKind::gaussian)
    return std::vector<double>(dist.begin(), dist.end());
  return beta_mean_action(dist);
}

double actor_entropy(const Actor& actor, std::span<const double> dist) {
  if (actor.head == HeadKind::gaussian) return gaussian_entropy(actor.log_std);
  return beta_entropy(dist);
}

// --- Adam ---

AdamState make_adam_state(const ParamRefs& params) {
  AdamState state;
  state.m.resize(params.size());
  state.v.resize(params.size());
  for (size_t k = 0; k < params.size(); ++k) {
    state.m[k].assign(params[k]->size(), 0.0);
    state.v[k].assign(params[k]->size(), 0.0);
  }
  return state;
}

void adam_step(const ParamRefs& params, const GradRefs& grads,
               AdamState& state, double lr, const AdamConfig& cfg) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw std::invalid_argument("adam_step: pack size mismatch");
  state.step += 1;
  const double corr1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double corr2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (size_t k = 0; k < params.size(); ++k) {
    std::vector<double>& p = *params[k];
    const std::vector<double>& g = *grads[k];
    if (p.size() != g.size())
      throw std::invalid_argument("adam_step: shape mismatch");
    std::vector<double>& m = state.m[k];
    std::vector<double>& v = state.v[k];
    for (size_t i = 0; i < p.size(); ++i) {
      if (!std::isfinite(g[i])) throw std::runtime_error("divergence detected");
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = m[i] / corr1;
      const double vhat = v[i] / corr2;
      p[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

ParamRefs mlp_param_refs(Mlp& mlp) {
  ParamRefs refs;
  for (size_t l = 0; l < mlp.weights.size(); ++l) {
    refs.push_back(&mlp.weights[l]);
    refs.push_back(&mlp.biases[l]);
  }
  return refs;
}

GradRefs mlp_grad_refs(const MlpGrads& grads) {
  GradRefs refs;
  for (size_t l = 0; l < grads.weights.size(); ++l) {
    refs.push_back(&grads.weights[l]);
    refs.push_back(&grads.biases[l]);
  }
  return refs;
}

ParamRefs actor_param_refs(Actor& actor) {
  ParamRefs refs = mlp_param_refs(actor.trunk);
  if (actor.head == HeadKind::gaussian) refs.push_back(&actor.log_std);
  return refs;
}

GradRefs actor_grad_refs(const ActorGrads& grads) {
  GradRefs refs = mlp_grad_refs(grads.trunk);
  if (!grads.log_std.empty()) refs.push_back(&grads.log_std);
  return refs;
}

ParamSet make_param_set(int obs_dim, int critic_in_dim, int action_dim,
                        HeadKind head, Rng& rng) {
  ParamSet params;
  const int trunk_out = head == HeadKind::gaussian ? action_dim : 2 * action_dim;
  params.actor.trunk = make_mlp({obs_dim, 64, 64, trunk_out}, rng, 0.01);
  params.actor.head = head;
  params.actor.action_dim = action_dim;
  if (head == HeadKind::gaussian)
    params.actor.log_std.assign(static_cast<size_t>(action_dim), 0.0);
  params.critic = make_mlp({critic_in_dim, 64, 64, 1}, rng);
  params.adam_actor = make_adam_state(actor_param_refs(params.actor));
  params.adam_critic = make_adam_state(mlp_param_refs(params.critic));
  return params;
}

}  // namespace compete
