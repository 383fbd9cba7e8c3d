#include "compete/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace compete {

namespace {

using nlohmann::json;

json mlp_to_json(const Mlp& mlp) {
  json j;
  j["layer_dims"] = mlp.layer_dims;
  json weights = json::array();
  for (size_t l = 0; l < mlp.weights.size(); ++l) {
    const int in = mlp.layer_dims[l];
    const int out = mlp.layer_dims[l + 1];
    json rows = json::array();
    for (int o = 0; o < out; ++o) {
      json row = json::array();
      for (int i = 0; i < in; ++i)
        row.push_back(mlp.weights[l][static_cast<size_t>(o) * in + i]);
      rows.push_back(std::move(row));
    }
    weights.push_back(std::move(rows));
  }
  j["weights"] = std::move(weights);
  j["biases"] = mlp.biases;
  return j;
}

Mlp mlp_from_json(const json& j) {
  Mlp mlp;
  mlp.layer_dims = j.at("layer_dims").get<std::vector<int>>();
  if (mlp.layer_dims.size() < 2)
    throw std::runtime_error("checkpoint: bad layer_dims");
  const json& weights = j.at("weights");
  mlp.weights.resize(mlp.layer_dims.size() - 1);
  for (size_t l = 0; l + 1 < mlp.layer_dims.size(); ++l) {
    const int in = mlp.layer_dims[l];
    const int out = mlp.layer_dims[l + 1];
    const json& rows = weights.at(l);
    if (static_cast<int>(rows.size()) != out)
      throw std::runtime_error("checkpoint: weight shape mismatch");
    mlp.weights[l].resize(static_cast<size_t>(out) * in);
    for (int o = 0; o < out; ++o) {
      const json& row = rows.at(static_cast<size_t>(o));
      if (static_cast<int>(row.size()) != in)
        throw std::runtime_error("checkpoint: weight shape mismatch");
      for (int i = 0; i < in; ++i)
        mlp.weights[l][static_cast<size_t>(o) * in + i] = row.at(static_cast<size_t>(i)).get<double>();
    }
  }
  mlp.biases = j.at("biases").get<std::vector<std::vector<double>>>();
  return mlp;
}

json adam_to_json(const AdamState& state) {
  return json{{"m", state.m}, {"v", state.v}, {"step", state.step}};
}

AdamState adam_from_json(const json& j) {
  AdamState state;
  state.m = j.at("m").get<std::vector<std::vector<double>>>();
  state.v = j.at("v").get<std::vector<std::vector<double>>>();
  state.step = j.at("step").get<long>();
  return state;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamSet& params,
                     const CheckpointMeta& meta) {
  json j;
  j["format_version"] = 1;
  json actor = mlp_to_json(params.actor.trunk);
  actor["head"] = to_string(params.actor.head);
  actor["action_dim"] = params.actor.action_dim;
  if (params.actor.head == HeadKind::gaussian)
    actor["log_std"] = params.actor.log_std;
  else
    actor["log_std"] = nullptr;
  j["actor"] = std::move(actor);
  j["critic"] = mlp_to_json(params.critic);
  j["adam_actor"] = adam_to_json(params.adam_actor);
  j["adam_critic"] = adam_to_json(params.adam_critic);
  j["meta"] = json{{"env_kind", to_string(meta.env_kind)},
                   {"aux_obs", to_string(meta.aux_obs)},
                   {"n_train", meta.n_train},
                   {"mode", meta.mode}};

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << j.dump(1) << "\n";
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  json j = json::parse(in);
  if (j.at("format_version").get<int>() != 1)
    throw std::runtime_error("unsupported checkpoint format_version");

  LoadedCheckpoint loaded;
  const json& actor = j.at("actor");
  loaded.params.actor.trunk = mlp_from_json(actor);
  loaded.params.actor.head = head_kind_from_string(actor.at("head").get<std::string>());
  loaded.params.actor.action_dim = actor.at("action_dim").get<int>();
  if (!actor.at("log_std").is_null())
    loaded.params.actor.log_std = actor.at("log_std").get<std::vector<double>>();
  loaded.params.critic = mlp_from_json(j.at("critic"));
  loaded.params.adam_actor = adam_from_json(j.at("adam_actor"));
  loaded.params.adam_critic = adam_from_json(j.at("adam_critic"));

  const json& meta = j.at("meta");
  loaded.meta.env_kind = env_kind_from_string(meta.at("env_kind").get<std::string>());
  const std::string aux = meta.at("aux_obs").get<std::string>();
  if (aux == "none") loaded.meta.aux_obs = AuxKind::none;
  else if (aux == "competitive") loaded.meta.aux_obs = AuxKind::competitive;
  else if (aux == "noise") loaded.meta.aux_obs = AuxKind::noise;
  else throw std::runtime_error("checkpoint: bad aux_obs: " + aux);
  loaded.meta.n_train = meta.at("n_train").get<int>();
  loaded.meta.mode = meta.at("mode").get<std::string>();
  return loaded;
}

}  // namespace compete
