#pragma once

#include <memory>
#include <vector>

#include "drl/deconfound.hpp"
#include "drl/model.hpp"

namespace drl {

struct PolicyConfig {
  std::size_t z_dim = 4;
  std::size_t hidden = 300;  // two hidden layers
  bool discrete = false;
  double action_bound = 2.0;
  double gamma = 0.99;
  double lr = 1e-3;
  std::size_t batch = 128;
  std::size_t replay_capacity = 100000;
  std::size_t update_every = 1;
  double entropy_coef = 0.0;
  double reward_scale = 1.0;  // learner-side scaling; logs stay raw
  // Critic-only updates for the first N environment steps, so early
  // advantages are centered before the actor starts moving. Without it a
  // fresh critic makes every advantage negative and the squashed-Gaussian
  // mean can run off to the tanh rails and stay there.
  std::size_t critic_warmup = 0;
};

struct Transition {
  Tensor z;
  double a = 0;
  double r = 0;
  Tensor z_next;
};

// FIFO ring buffer of transitions.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity) : capacity_(capacity) {}
  void push(Transition t);
  std::size_t size() const { return buf_.size(); }
  const Transition& at(std::size_t i) const { return buf_[(head_ + i) % buf_.size()]; }
  const Transition& sample(RandomStream& rng) const { return at(rng.index(size())); }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // oldest element when full
  std::vector<Transition> buf_;
};

// Gaussian policy squashed by tanh and scaled to the action bound (log
// density corrected for the squashing), or Bernoulli for binary actions;
// critic is a scalar value net. Both use two hidden layers.
class Policy {
 public:
  Policy(PolicyConfig cfg, std::uint64_t seed);

  const PolicyConfig& config() const { return cfg_; }
  std::vector<Param> actor_params() const;
  std::vector<Param> critic_params() const;

  double sample_action(const Tensor& z, RandomStream& rng) const;
  double greedy_action(const Tensor& z) const;
  double value(const Tensor& z) const;

  // Batched differentiable pieces.
  Var log_prob(const Var& z, const Var& a) const;  // (B)
  Var entropy_proxy(const Var& z) const;           // (B), pre-squash entropy
  Var value_batch(const Var& z) const;             // (B)

  void save(const std::string& path) const;
  static Policy load(const std::string& path);

 private:
  DiagGaussian actor_head(const Var& z) const;  // pre-squash mean / var

  PolicyConfig cfg_;
  detail::Linear a1_, a2_, a_mean_, a_var_;
  detail::Linear c1_, c2_, c_out_;
};

struct AcStats {
  double actor_loss = 0;
  double critic_loss = 0;
  double mean_advantage = 0;
};

// One-step-return advantage A = r + gamma V(z') - V(z), treated as a
// constant in the actor term; critic gradient flows only through V(z).
// Gradients are accumulated into the policy parameters.
AcStats ac_gradient(const std::vector<Transition>& batch, Policy& policy,
                    double gamma);

// Rollout source abstraction shared by learned-model, oracle-table, and
// dataset-backed trainers.
class EnvSource {
 public:
  virtual ~EnvSource() = default;
  virtual Tensor reset(RandomStream& rng) = 0;
  // Returns (next state, reward).
  virtual std::pair<Tensor, double> step(const Tensor& z, double a,
                                         RandomStream& rng) = 0;
  virtual EnvKind kind() const = 0;
  virtual std::size_t z_dim() const = 0;
};

enum class OracleRewardMode { exact_do, exact_conditional, sampled };

// Benchmark-table environment with the learned nets bypassed: a fixed
// random context per episode and rewards straight from the tables.
class OracleEnvSource : public EnvSource {
 public:
  OracleEnvSource(ConfoundingSpec spec, EnvKind kind, OracleRewardMode mode,
                  std::size_t z_dim = 4);
  Tensor reset(RandomStream& rng) override;
  std::pair<Tensor, double> step(const Tensor& z, double a,
                                 RandomStream& rng) override;
  EnvKind kind() const override { return kind_; }
  std::size_t z_dim() const override { return z_dim_; }

 private:
  OracleRewardModel oracle_;
  EnvKind kind_;
  OracleRewardMode mode_;
  std::size_t z_dim_;
};

// Rollouts through the learned transition model; rewards are conditional
// (vanilla, M_alt) or interventional via Monte Carlo (deconfounding).
class ModelEnvSource : public EnvSource {
 public:
  ModelEnvSource(const DeconModel& model, std::vector<Trajectory> init_states,
                 bool deconfounding, std::size_t n_u, USource u_source);
  Tensor reset(RandomStream& rng) override;
  std::pair<Tensor, double> step(const Tensor& z, double a,
                                 RandomStream& rng) override;
  EnvKind kind() const override { return EnvKind::pendulum; }
  std::size_t z_dim() const override { return model_.config().dims.D_z; }

 private:
  const DeconModel& model_;
  LearnedRewardModel reward_model_;
  std::vector<Trajectory> init_states_;
  bool deconfounding_;
  std::size_t n_u_;
  USource u_source_;
  const Trajectory* current_evidence_ = nullptr;
};

struct TrainLogRow {
  std::size_t episode = 0;
  double total_reward = 0;
  double moving_avg = 0;      // 100-episode window
  double opt_action_freq = 0;  // fraction of steps in the T1 band
  double wall_ms = 0;
};

struct TrainResult {
  Policy policy;
  std::vector<TrainLogRow> log;
};

TrainResult train_ac(EnvSource& env, std::size_t episodes,
                     std::size_t steps_per_episode, const PolicyConfig& cfg,
                     std::uint64_t seed);

// Direct AC: batches of stored (state, action, reward) tuples; the state
// embedding comes from a trained model's inference network.
TrainResult train_ac_direct(const DeconModel& state_model,
                            const std::vector<Trajectory>& data, EnvKind kind,
                            std::size_t episodes, std::size_t steps_per_episode,
                            const PolicyConfig& cfg, std::uint64_t seed);

struct EvalReport {
  std::vector<double> episode_rewards;
  std::vector<double> episode_opt_freq;
  double mean_reward = 0, std_reward = 0;
  double mean_opt_freq = 0, std_opt_freq = 0;

  nlohmann::json to_json() const;
};

// Greedy (mean) actions; reports total reward and T1-band frequency.
EvalReport evaluate(const Policy& policy, EnvSource& env,
                    std::size_t n_episodes, std::size_t steps,
                    std::uint64_t seed);

}  // namespace drl
