#include "compete/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace compete {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& j, const std::set<std::string>& known,
                         const std::string& where) {
  for (const auto& item : j.items())
    if (!known.count(item.key()))
      throw UsageError("unknown config key '" + item.key() + "' in " + where);
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw UsageError(std::string("bad value for config key '") + key + "'");
  }
}

void parse_env(const json& j, RaceConfig& env) {
  reject_unknown_keys(j,
                      {"kind", "dt", "horizon", "f_max", "c_d", "w_ctrl", "rho",
                       "kappa", "self_first"},
                      "env");
  bool w_ctrl_given = j.contains("w_ctrl");
  if (j.contains("kind")) {
    std::string kind;
    read_field(j, "kind", kind);
    try {
      env.kind = env_kind_from_string(kind);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  // per-kind default unless explicitly set
  env.w_ctrl = env.kind == EnvKind::PointRacer ? 0.1 : 0.05;
  read_field(j, "dt", env.dt);
  read_field(j, "horizon", env.horizon);
  read_field(j, "f_max", env.f_max);
  read_field(j, "c_d", env.c_d);
  if (w_ctrl_given) read_field(j, "w_ctrl", env.w_ctrl);
  read_field(j, "rho", env.rho);
  read_field(j, "kappa", env.kappa);
  read_field(j, "self_first", env.self_first);
}

void parse_mode(const json& j, ModeFlags& flags) {
  if (j.is_string()) {
    try {
      flags = mode_from_token(j.get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return;
  }
  if (!j.is_object()) throw UsageError("mode must be a token string or object");
  reject_unknown_keys(j, {"sharing", "critic_input", "aux_obs"}, "mode");
  std::string sharing = "shared", critic = "decentralized", aux = "none";
  read_field(j, "sharing", sharing);
  read_field(j, "critic_input", critic);
  read_field(j, "aux_obs", aux);
  if (sharing == "shared") flags.sharing = Sharing::shared;
  else if (sharing == "separate") flags.sharing = Sharing::separate;
  else throw UsageError("mode.sharing must be 'shared' or 'separate'");
  if (critic == "decentralized") flags.critic_input = CriticInput::decentralized;
  else if (critic == "centralized") flags.critic_input = CriticInput::centralized;
  else throw UsageError("mode.critic_input must be 'decentralized' or 'centralized'");
  if (aux == "none") flags.aux_obs = AuxObs::none;
  else if (aux == "noise") flags.aux_obs = AuxObs::noise;
  else if (aux == "competitive") flags.aux_obs = AuxObs::competitive;
  else throw UsageError("mode.aux_obs must be 'none', 'noise' or 'competitive'");
}

void parse_ppo(const json& j, PpoConfig& ppo) {
  reject_unknown_keys(j,
                      {"gamma", "lam", "clip_eps", "lr0", "epochs_per_iter",
                       "entropy_coef", "value_coef"},
                      "ppo");
  read_field(j, "gamma", ppo.gamma);
  read_field(j, "lam", ppo.lam);
  read_field(j, "clip_eps", ppo.clip_eps);
  read_field(j, "lr0", ppo.lr0);
  read_field(j, "epochs_per_iter", ppo.epochs_per_iter);
  read_field(j, "entropy_coef", ppo.entropy_coef);
  read_field(j, "value_coef", ppo.value_coef);
}

GridRequest parse_grid(const json& j) {
  reject_unknown_keys(j, {"modes", "agent_counts"}, "grid");
  GridRequest grid;
  read_field(j, "modes", grid.modes);
  read_field(j, "agent_counts", grid.agent_counts);
  return grid;
}

std::string aux_obs_string(AuxObs aux) {
  switch (aux) {
    case AuxObs::none: return "none";
    case AuxObs::noise: return "noise";
    case AuxObs::competitive: return "competitive";
  }
  return "none";
}

}  // namespace

LoadedConfig parse_config(const std::string& json_text) {
  json j = json::parse(json_text, nullptr, false);
  if (j.is_discarded()) throw UsageError("config is not valid JSON");
  if (!j.is_object()) throw UsageError("config root must be a JSON object");
  reject_unknown_keys(j,
                      {"name", "env", "mode", "n_agents", "head", "ppo",
                       "total_iterations", "steps_per_agent", "seeds",
                       "eval_episodes", "output_dir", "grid"},
                      "config root");

  LoadedConfig loaded;
  ExperimentSpec& spec = loaded.spec;
  read_field(j, "name", spec.name);
  if (j.contains("env")) {
    if (!j.at("env").is_object()) throw UsageError("env must be an object");
    parse_env(j.at("env"), spec.env);
  } else {
    parse_env(json::object(), spec.env);
  }
  if (j.contains("mode")) parse_mode(j.at("mode"), spec.flags);
  int n_agents = spec.env.n_agents;
  read_field(j, "n_agents", n_agents);
  spec.env.n_agents = n_agents;
  if (j.contains("head")) {
    std::string head;
    read_field(j, "head", head);
    try {
      spec.head = head_kind_from_string(head);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  if (j.contains("ppo")) {
    if (!j.at("ppo").is_object()) throw UsageError("ppo must be an object");
    parse_ppo(j.at("ppo"), spec.ppo);
  }
  read_field(j, "total_iterations", spec.total_iterations);
  read_field(j, "steps_per_agent", spec.steps_per_agent);
  read_field(j, "seeds", spec.seeds);
  read_field(j, "eval_episodes", spec.eval_episodes);
  read_field(j, "output_dir", spec.output_dir);
  if (j.contains("grid")) {
    if (!j.at("grid").is_object()) throw UsageError("grid must be an object");
    loaded.grid = parse_grid(j.at("grid"));
  }
  return loaded;
}

LoadedConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("config not found: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string config_to_json(const ExperimentSpec& spec,
                           const std::optional<GridRequest>& grid) {
  json j;
  j["name"] = spec.name;
  j["env"] = json{{"kind", spec.env.kind == EnvKind::PointRacer ? "point" : "stamina"},
                  {"dt", spec.env.dt},
                  {"horizon", spec.env.horizon},
                  {"f_max", spec.env.f_max},
                  {"c_d", spec.env.c_d},
                  {"w_ctrl", spec.env.w_ctrl},
                  {"rho", spec.env.rho},
                  {"kappa", spec.env.kappa},
                  {"self_first", spec.env.self_first}};
  j["mode"] = json{
      {"sharing", spec.flags.sharing == Sharing::shared ? "shared" : "separate"},
      {"critic_input", spec.flags.critic_input == CriticInput::decentralized
                           ? "decentralized"
                           : "centralized"},
      {"aux_obs", aux_obs_string(spec.flags.aux_obs)}};
  j["n_agents"] = spec.env.n_agents;
  j["head"] = to_string(spec.head);
  j["ppo"] = json{{"gamma", spec.ppo.gamma},
                  {"lam", spec.ppo.lam},
                  {"clip_eps", spec.ppo.clip_eps},
                  {"lr0", spec.ppo.lr0},
                  {"epochs_per_iter", spec.ppo.epochs_per_iter},
                  {"entropy_coef", spec.ppo.entropy_coef},
                  {"value_coef", spec.ppo.value_coef}};
  j["total_iterations"] = spec.total_iterations;
  j["steps_per_agent"] = spec.steps_per_agent;
  j["seeds"] = spec.seeds;
  j["eval_episodes"] = spec.eval_episodes;
  j["output_dir"] = spec.output_dir;
  if (grid)
    j["grid"] = json{{"modes", grid->modes}, {"agent_counts", grid->agent_counts}};
  return j.dump(1) + "\n";
}

void write_effective_config(const ExperimentSpec& spec,
                            const std::optional<GridRequest>& grid) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::path(spec.output_dir) / spec.name;
  fs::create_directories(dir);
  const fs::path path = dir / "effective_config.json";
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << config_to_json(spec, grid);
}

}  // namespace compete
