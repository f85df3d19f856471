#include "drl/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace drl {

namespace {

void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                const std::string& where) {
  if (!j.is_object())
    throw std::invalid_argument("config: section '" + where +
                                "' must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key))
      throw std::invalid_argument("config: unknown key '" + key + "' in " +
                                  where);
}

}  // namespace

void RunConfig::validate() const {
  env.spec.validate();
  if (env.T < 3) throw std::invalid_argument("config: env.T must be >= 3");
  if (env.H < 8 || env.W < 8)
    throw std::invalid_argument("config: frames must be at least 8x8");
  if (model.variant != "decon" && model.variant != "alt")
    throw std::invalid_argument("config: model.variant must be decon or alt");
  if (model.D_z == 0 || model.batch == 0 || model.epochs == 0)
    throw std::invalid_argument("config: model sizes must be positive");
  if (policy.u_source != "prior" && policy.u_source != "posterior" &&
      policy.u_source != "exact")
    throw std::invalid_argument(
        "config: policy.u_source must be prior, posterior, or exact");
  if (policy.n_u == 0)
    throw std::invalid_argument("config: policy.n_u must be >= 1");
  if (policy.gamma < 0.0 || policy.gamma >= 1.0)
    throw std::invalid_argument("config: policy.gamma must be in [0, 1)");
}

nlohmann::json RunConfig::to_json() const {
  return {{"env",
           {{"kind", to_string(env.kind)},
            {"spec", env.spec.to_json()},
            {"n_sequences", env.n_sequences},
            {"T", env.T},
            {"H", env.H},
            {"W", env.W},
            {"seed", env.seed}}},
          {"model",
           {{"variant", model.variant},
            {"D_z", model.D_z},
            {"D_u", model.D_u},
            {"hidden", model.hidden},
            {"rnn_hidden", model.rnn_hidden},
            {"conv_layers", model.conv_layers},
            {"lr", model.lr},
            {"batch", model.batch},
            {"epochs", model.epochs},
            {"action_likelihood", model.action_likelihood},
            {"action_uses_z", model.action_uses_z}}},
          {"policy",
           {{"episodes", policy.episodes},
            {"steps", policy.steps},
            {"gamma", policy.gamma},
            {"n_u", policy.n_u},
            {"u_source", policy.u_source},
            {"hidden", policy.hidden},
            {"lr", policy.lr},
            {"batch", policy.batch},
            {"replay_capacity", policy.replay_capacity},
            {"update_every", policy.update_every},
            {"entropy_coef", policy.entropy_coef},
            {"reward_scale", policy.reward_scale},
            {"critic_warmup", policy.critic_warmup}}},
          {"io", {{"workdir", io.workdir}}}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  check_keys(j, {"env", "model", "policy", "io"}, "top level");

  if (j.contains("env")) {
    const auto& e = j.at("env");
    check_keys(e, {"kind", "spec", "n_sequences", "T", "H", "W", "seed"},
               "env");
    if (e.contains("kind"))
      c.env.kind = env_kind_from_string(e.at("kind").get<std::string>());
    if (e.contains("spec")) {
      check_keys(e.at("spec"),
                 {"p_u", "p_T1_given_u", "p_R1", "mu_R1", "mu_R2", "sigma",
                  "noise_prob"},
                 "env.spec");
      c.env.spec = ConfoundingSpec::from_json(e.at("spec"));
    }
    c.env.n_sequences = e.value("n_sequences", c.env.n_sequences);
    c.env.T = e.value("T", c.env.T);
    c.env.H = e.value("H", c.env.H);
    c.env.W = e.value("W", c.env.W);
    c.env.seed = e.value("seed", c.env.seed);
  }

  if (j.contains("model")) {
    const auto& m = j.at("model");
    check_keys(m,
               {"variant", "D_z", "D_u", "hidden", "rnn_hidden", "conv_layers",
                "lr", "batch", "epochs", "action_likelihood", "action_uses_z"},
               "model");
    c.model.variant = m.value("variant", c.model.variant);
    c.model.D_z = m.value("D_z", c.model.D_z);
    c.model.D_u = m.value("D_u", c.model.D_u);
    c.model.hidden = m.value("hidden", c.model.hidden);
    c.model.rnn_hidden = m.value("rnn_hidden", c.model.rnn_hidden);
    c.model.conv_layers = m.value("conv_layers", c.model.conv_layers);
    c.model.lr = m.value("lr", c.model.lr);
    c.model.batch = m.value("batch", c.model.batch);
    c.model.epochs = m.value("epochs", c.model.epochs);
    c.model.action_likelihood =
        m.value("action_likelihood", c.model.action_likelihood);
    c.model.action_uses_z = m.value("action_uses_z", c.model.action_uses_z);
  }

  if (j.contains("policy")) {
    const auto& p = j.at("policy");
    check_keys(p,
               {"episodes", "steps", "gamma", "n_u", "u_source", "hidden",
                "lr", "batch", "replay_capacity", "update_every",
                "entropy_coef", "reward_scale", "critic_warmup"},
               "policy");
    c.policy.episodes = p.value("episodes", c.policy.episodes);
    c.policy.steps = p.value("steps", c.policy.steps);
    c.policy.gamma = p.value("gamma", c.policy.gamma);
    c.policy.n_u = p.value("n_u", c.policy.n_u);
    c.policy.u_source = p.value("u_source", c.policy.u_source);
    c.policy.hidden = p.value("hidden", c.policy.hidden);
    c.policy.lr = p.value("lr", c.policy.lr);
    c.policy.batch = p.value("batch", c.policy.batch);
    c.policy.replay_capacity =
        p.value("replay_capacity", c.policy.replay_capacity);
    c.policy.update_every = p.value("update_every", c.policy.update_every);
    c.policy.entropy_coef = p.value("entropy_coef", c.policy.entropy_coef);
    c.policy.reward_scale = p.value("reward_scale", c.policy.reward_scale);
    c.policy.critic_warmup = p.value("critic_warmup", c.policy.critic_warmup);
  }

  if (j.contains("io")) {
    const auto& io = j.at("io");
    check_keys(io, {"workdir"}, "io");
    c.io.workdir = io.value("workdir", c.io.workdir);
  }

  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config: parse error in " + path + ": " +
                                e.what());
  }
  return from_json(j);
}

void RunConfig::write_sidecar(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write resolved config: " + path);
  out << to_json().dump(2) << '\n';
}

}  // namespace drl
