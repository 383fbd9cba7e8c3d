#ifndef COMPETE_NN_HPP_
#define COMPETE_NN_HPP_

#include <span>
#include <string>
#include <vector>

#include "compete/rng.hpp"

namespace compete {

// Dense tanh MLP in 64-bit floats. Weights are row-major (out x in) per
// layer; hidden activations are tanh, the output layer is linear.
struct Mlp {
  std::vector<int> layer_dims;               // {in, hidden..., out}
  std::vector<std::vector<double>> weights;  // [layer], row-major
  std::vector<std::vector<double>> biases;   // [layer]

  int in_dim() const { return layer_dims.front(); }
  int out_dim() const { return layer_dims.back(); }
};

// Uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) on every layer; the final layer
// is additionally scaled by final_scale (0.01 for policy trunks keeps early
// actions small).
Mlp make_mlp(const std::vector<int>& dims, Rng& rng, double final_scale = 1.0);

// Activation record from one forward pass: act[0] is the input, act[l+1]
// the output of layer l (tanh for hidden layers, raw affine for the last).
struct MlpTape {
  std::vector<std::vector<double>> act;
};

struct MlpGrads {
  std::vector<std::vector<double>> weights, biases;
};

MlpGrads make_zero_grads(const Mlp& mlp);
void zero_grads(MlpGrads& grads);

// Returns the output; fills the tape when given. Reuses tape storage.
std::vector<double> mlp_forward(const Mlp& mlp, std::span<const double> x,
                                MlpTape* tape = nullptr);

// Exact reverse-mode gradients of y . dy. Accumulates (+=) into grads;
// writes the input gradient into dx when given.
void mlp_backward(const Mlp& mlp, const MlpTape& tape,
                  std::span<const double> dy, MlpGrads& grads,
                  std::vector<double>* dx = nullptr);

// --- Gaussian policy head (diagonal, state-independent log std) ---

double gaussian_logprob(std::span<const double> mean,
                        std::span<const double> log_std,
                        std::span<const double> action);

// Accumulates w * d(logprob)/d{mean, log_std}.
void gaussian_logprob_grad(std::span<const double> mean,
                           std::span<const double> log_std,
                           std::span<const double> action, double w,
                           std::span<double> dmean, std::span<double> dlog_std);

std::vector<double> gaussian_sample(std::span<const double> mean,
                                    std::span<const double> log_std, Rng& rng);

double gaussian_entropy(std::span<const double> log_std);

// --- Beta policy head ---
//
// The trunk emits 2*action_dim pre-activations laid out [pre_alpha...,
// pre_beta...]; shape parameters are alpha = 1 + softplus(pre_alpha) and
// beta = 1 + softplus(pre_beta). Actions live on [-1, 1] via a = 2u - 1
// with u ~ Beta(alpha, beta), so log-densities carry a -log(2) Jacobian.

double softplus(double x);
double digamma(double x);
double trigamma(double x);

double beta_logprob_ab(double alpha, double beta, double action);
double beta_logprob(std::span<const double> pre, std::span<const double> action);
void beta_logprob_grad(std::span<const double> pre,
                       std::span<const double> action, double w,
                       std::span<double> dpre);
std::vector<double> beta_sample(std::span<const double> pre, Rng& rng);
double beta_entropy(std::span<const double> pre);
void beta_entropy_grad(std::span<const double> pre, double w,
                       std::span<double> dpre);
std::vector<double> beta_mean_action(std::span<const double> pre);

// --- Actor = trunk + head ---

enum class HeadKind { gaussian, beta };

std::string to_string(HeadKind head);
HeadKind head_kind_from_string(const std::string& s);

struct Actor {
  Mlp trunk;  // out dim = action_dim (gaussian) or 2*action_dim (beta)
  HeadKind head = HeadKind::gaussian;
  int action_dim = 1;
  std::vector<double> log_std;  // gaussian only, one per action dim

  int obs_dim() const { return trunk.in_dim(); }
};

struct ActorGrads {
  MlpGrads trunk;
  std::vector<double> log_std;
};

ActorGrads make_zero_grads(const Actor& actor);
void zero_grads(ActorGrads& grads);

// dist is the trunk output for the observation.
double actor_logprob(const Actor& actor, std::span<const double> dist,
                     std::span<const double> action);
std::vector<double> actor_sample(const Actor& actor,
                                 std::span<const double> dist, Rng& rng);
std::vector<double> actor_mean_action(const Actor& actor,
                                      std::span<const double> dist);
double actor_entropy(const Actor& actor, std::span<const double> dist);

// --- Adam ---

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> m, v;  // shapes mirror the parameter pack
  long step = 0;
};

using ParamRefs = std::vector<std::vector<double>*>;
using GradRefs = std::vector<const std::vector<double>*>;

AdamState make_adam_state(const ParamRefs& params);

// One bias-corrected descent step over the whole pack. Gradient ascent is
// expressed by negating the loss upstream. Throws on non-finite gradients.
void adam_step(const ParamRefs& params, const GradRefs& grads,
               AdamState& state, double lr, const AdamConfig& cfg = {});

ParamRefs mlp_param_refs(Mlp& mlp);
GradRefs mlp_grad_refs(const MlpGrads& grads);
ParamRefs actor_param_refs(Actor& actor);
GradRefs actor_grad_refs(const ActorGrads& grads);

// --- ParamSet: one agent's trainable state ---

struct ParamSet {
  Actor actor;
  Mlp critic;  // scalar output
  AdamState adam_actor, adam_critic;
};

// 2x64 tanh trunks for both networks.
ParamSet make_param_set(int obs_dim, int critic_in_dim, int action_dim,
                        HeadKind head, Rng& rng);

}  // namespace compete

#endif  // COMPETE_NN_HPP_
