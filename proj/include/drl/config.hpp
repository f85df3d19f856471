#pragma once

#include <string>

#include <json.hpp>

#include "drl/envs.hpp"

namespace drl {

// Top-level run configuration shared by every command. Parsing is strict:
// unknown keys anywhere in the document are an error, so typos fail loudly
// instead of silently running with defaults.
struct RunConfig {
  struct Env {
    EnvKind kind = EnvKind::glyph;
    ConfoundingSpec spec;
    std::size_t n_sequences = 2000;
    std::size_t T = 5, H = 16, W = 16;
    std::uint64_t seed = 1;
  } env;

  struct Model {
    std::string variant = "decon";  // decon | alt
    std::size_t D_z = 16, D_u = 2;
    std::size_t hidden = 64, rnn_hidden = 32, conv_layers = 2;
    double lr = 1e-4;
    std::size_t batch = 128;
    std::size_t epochs = 10;
    bool action_likelihood = true;
    bool action_uses_z = true;
  } model;

  struct Policy {
    std::size_t episodes = 300, steps = 50;
    double gamma = 0.99;
    std::size_t n_u = 200;
    std::string u_source = "prior";  // prior | posterior | exact
    std::size_t hidden = 64;
    double lr = 1e-3;
    std::size_t batch = 128;
    std::size_t replay_capacity = 100000;
    std::size_t update_every = 1;
    double entropy_coef = 0.0;
    double reward_scale = 1.0;
    std::size_t critic_warmup = 0;
  } policy;

  struct Io {
    std::string workdir = ".";
  } io;

  void validate() const;
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::string& path);

  // Fully-resolved copy written next to a command's outputs.
  void write_sidecar(const std::string& path) const;
};

}  // namespace drl
