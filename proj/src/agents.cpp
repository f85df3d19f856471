#include "drl/agents.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace drl {

namespace {

// Floor on the pre-squash policy std. Without a floor the variance head can
// collapse under mostly-positive advantages, after which 1/sigma^2 terms in
// the log-prob gradient explode and the mean runs off to the tanh rails.
constexpr double kMinStd = 0.3;

// Category with discrete (cartpole-style) actions mapped onto the bands.
int band_category(EnvKind k, bool discrete, double a) {
  if (discrete) return a >= 0.5 ? 0 : 1;
  return action_category(k, a);
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

void ReplayMemory::push(Transition t) {
  if (buf_.size() < capacity_) {
    buf_.push_back(std::move(t));
    return;
  }
  buf_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
}

Policy::Policy(PolicyConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  if (cfg_.z_dim == 0 || cfg_.hidden == 0)
    throw std::invalid_argument("policy: dimensions must be positive");
  RandomStream rng(seed ^ 0xac7031c9u);
  a1_.init(cfg_.z_dim, cfg_.hidden, rng);
  a2_.init(cfg_.hidden, cfg_.hidden, rng);
  a_mean_.init(cfg_.hidden, 1, rng);
  a_var_.init(cfg_.hidden, 1, rng);
  c1_.init(cfg_.z_dim, cfg_.hidden, rng);
  c2_.init(cfg_.hidden, cfg_.hidden, rng);
  c_out_.init(cfg_.hidden, 1, rng);
}

std::vector<Param> Policy::actor_params() const {
  std::vector<Param> out;
  a1_.collect("actor.l1", out);
  a2_.collect("actor.l2", out);
  a_mean_.collect("actor.mean", out);
  a_var_.collect("actor.var", out);
  return out;
}

std::vector<Param> Policy::critic_params() const {
  std::vector<Param> out;
  c1_.collect("critic.l1", out);
  c2_.collect("critic.l2", out);
  c_out_.collect("critic.out", out);
  return out;
}

DiagGaussian Policy::actor_head(const Var& z) const {
  Var h = tanh_v(a1_(z));
  h = tanh_v(a2_(h));
  // For the discrete policy the mean head is the Bernoulli logit and the
  // variance head is unused.
  return {a_mean_(h), add_scalar(softplus_v(a_var_(h)), kMinStd * kMinStd)};
}

double Policy::sample_action(const Tensor& z, RandomStream& rng) const {
  Var zv = constant(Tensor({1, cfg_.z_dim}, z.data));
  DiagGaussian g = actor_head(zv);
  const double m = g.mean->value.data[0];
  if (cfg_.discrete) return rng.bernoulli(1.0 / (1.0 + std::exp(-m))) ? 1.0 : 0.0;
  const double xi = m + std::sqrt(g.var->value.data[0]) * rng.normal();
  return cfg_.action_bound * std::tanh(xi);
}

double Policy::greedy_action(const Tensor& z) const {
  Var zv = constant(Tensor({1, cfg_.z_dim}, z.data));
  const double m = actor_head(zv).mean->value.data[0];
  if (cfg_.discrete) return m >= 0.0 ? 1.0 : 0.0;
  return cfg_.action_bound * std::tanh(m);
}

double Policy::value(const Tensor& z) const {
  Var zv = constant(Tensor({1, cfg_.z_dim}, z.data));
  Var h = tanh_v(c1_(zv));
  h = tanh_v(c2_(h));
  return c_out_(h)->value.data[0];
}

Var Policy::value_batch(const Var& z) const {
  Var h = tanh_v(c1_(z));
  h = tanh_v(c2_(h));
  return rowsum(c_out_(h));
}

Var Policy::log_prob(const Var& z, const Var& a) const {
  DiagGaussian g = actor_head(z);
  const std::size_t B = a->value.rows();
  if (cfg_.discrete) {
    Var p = sigmoid_v(g.mean);
    Var lp1 = log_v(add_scalar(p, 1e-12));
    Var lp0 = log_v(add_scalar(neg(p), 1.0 + 1e-12));
    Var one_minus_a = add_scalar(neg(a), 1.0);
    return rowsum(add(mul(a, lp1), mul(one_minus_a, lp0)));
  }
  // Invert the squash on the stored actions; the Jacobian term is constant
  // in the parameters but kept so the value is a true log density.
  Tensor xi({B, 1});
  Tensor corr({B});
  for (std::size_t i = 0; i < B; ++i) {
    double t = std::clamp(a->value.data[i] / cfg_.action_bound,
                          -1.0 + 1e-6, 1.0 - 1e-6);
    xi.data[i] = std::atanh(t);
    corr.data[i] = std::log(cfg_.action_bound * (1.0 - t * t) + 1e-12);
  }
  return sub(gaussian_logpdf_rows(constant(std::move(xi)), g),
             constant(std::move(corr)));
}

Var Policy::entropy_proxy(const Var& z) const {
  DiagGaussian g = actor_head(z);
  if (cfg_.discrete) {
    Var p = sigmoid_v(g.mean);
    Var q = add_scalar(neg(p), 1.0);
    Var h = neg(add(mul(p, log_v(add_scalar(p, 1e-12))),
                    mul(q, log_v(add_scalar(q, 1e-12)))));
    return rowsum(h);
  }
  return rowsum(scale(log_v(scale(g.var, 2.0 * M_PI * std::exp(1.0))), 0.5));
}

void Policy::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open policy file for writing: " + path);
  nlohmann::json header = {
      {"format_version", 1},
      {"z_dim", cfg_.z_dim},
      {"hidden", cfg_.hidden},
      {"discrete", cfg_.discrete},
      {"action_bound", cfg_.action_bound},
      {"gamma", cfg_.gamma},
      {"lr", cfg_.lr},
      {"batch", cfg_.batch},
      {"replay_capacity", cfg_.replay_capacity},
      {"update_every", cfg_.update_every},
      {"entropy_coef", cfg_.entropy_coef},
      {"reward_scale", cfg_.reward_scale},
      {"critic_warmup", cfg_.critic_warmup}};
  out << header.dump() << '\n';
  for (const auto& params : {actor_params(), critic_params()})
    for (const auto& p : params)
      out.write(reinterpret_cast<const char*>(p.var->value.data.data()),
                p.var->value.data.size() * sizeof(double));
  if (!out) throw std::runtime_error("policy write failed: " + path);
}

Policy Policy::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open policy file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("policy file truncated: " + path);
  nlohmann::json h = nlohmann::json::parse(line);
  PolicyConfig cfg;
  cfg.z_dim = h.at("z_dim").get<std::size_t>();
  cfg.hidden = h.at("hidden").get<std::size_t>();
  cfg.discrete = h.at("discrete").get<bool>();
  cfg.action_bound = h.at("action_bound").get<double>();
  cfg.gamma = h.at("gamma").get<double>();
  cfg.lr = h.at("lr").get<double>();
  cfg.batch = h.at("batch").get<std::size_t>();
  cfg.replay_capacity = h.at("replay_capacity").get<std::size_t>();
  cfg.update_every = h.at("update_every").get<std::size_t>();
  cfg.entropy_coef = h.at("entropy_coef").get<double>();
  cfg.reward_scale = h.at("reward_scale").get<double>();
  cfg.critic_warmup = h.value("critic_warmup", std::size_t{0});
  Policy pol(cfg, 0);
  for (const auto& params : {pol.actor_params(), pol.critic_params()})
    for (const auto& p : params) {
      in.read(reinterpret_cast<char*>(p.var->value.data.data()),
              p.var->value.data.size() * sizeof(double));
      if (!in) throw std::runtime_error("policy file truncated: " + path);
    }
  return pol;
}

AcStats ac_gradient(const std::vector<Transition>& batch, Policy& policy,
                    double gamma) {
  const std::size_t B = batch.size();
  if (B == 0) throw std::invalid_argument("ac_gradient: empty batch");
  const std::size_t D = policy.config().z_dim;
  Tensor zt({B, D}), znt({B, D}), at({B, 1}), rt({B});
  for (std::size_t i = 0; i < B; ++i) {
    if (batch[i].z.size() != D || batch[i].z_next.size() != D)
      throw std::invalid_argument("ac_gradient: state dim mismatch");
    std::copy(batch[i].z.data.begin(), batch[i].z.data.end(),
              zt.data.begin() + i * D);
    std::copy(batch[i].z_next.data.begin(), batch[i].z_next.data.end(),
              znt.data.begin() + i * D);
    at.data[i] = batch[i].a;
    rt.data[i] = batch[i].r;
  }

  // Bootstrap values for z' are treated as constants.
  Tensor vnext = policy.value_batch(constant(znt))->value;

  Var v = policy.value_batch(constant(zt));
  Tensor target({B}), adv({B});
  for (std::size_t i = 0; i < B; ++i) {
    target.data[i] = rt.data[i] + gamma * vnext.data[i];
    adv.data[i] = target.data[i] - v->value.data[i];
  }
  Var critic_loss = mean_all(square_v(sub(constant(target), v)));

  Var zv = constant(std::move(zt));
  Var lp = policy.log_prob(zv, constant(std::move(at)));
  Var actor_loss = neg(mean_all(mul(constant(adv), lp)));
  if (policy.config().entropy_coef > 0.0)
    actor_loss = sub(actor_loss, scale(mean_all(policy.entropy_proxy(zv)),
                                       policy.config().entropy_coef));

  AcStats stats;
  stats.actor_loss = actor_loss->value.data[0];
  stats.critic_loss = critic_loss->value.data[0];
  for (double x : adv.data) stats.mean_advantage += x;
  stats.mean_advantage /= B;

  backward(actor_loss);
  backward(critic_loss);
  return stats;
}

OracleEnvSource::OracleEnvSource(ConfoundingSpec spec, EnvKind kind,
                                 OracleRewardMode mode, std::size_t z_dim)
    : oracle_(std::move(spec), kind), kind_(kind), mode_(mode), z_dim_(z_dim) {}

Tensor OracleEnvSource::reset(RandomStream& rng) {
  return rng.normal_tensor({1, z_dim_});
}

std::pair<Tensor, double> OracleEnvSource::step(const Tensor& z, double a,
                                                RandomStream& rng) {
  double r = 0;
  switch (mode_) {
    case OracleRewardMode::exact_do:
      r = do_reward_exact(oracle_, z, a);
      break;
    case OracleRewardMode::exact_conditional:
      r = conditional_reward(oracle_, z, a, nullptr, 1, rng);
      break;
    case OracleRewardMode::sampled: {
      const auto& spec = oracle_.spec();
      const int cat = band_category(kind_, kind_ == EnvKind::cartpole, a);
      const int u = rng.bernoulli(spec.p_u) ? 1 : 0;
      const double mu = rng.bernoulli(spec.p_R1[cat][u]) ? spec.mu_R1 : spec.mu_R2;
      r = mu + spec.sigma * rng.normal();
      break;
    }
  }
  // Static context: the table rewards do not depend on the state.
  return {z, r};
}

ModelEnvSource::ModelEnvSource(const DeconModel& model,
                               std::vector<Trajectory> init_states,
                               bool deconfounding, std::size_t n_u,
                               USource u_source)
    : model_(model),
      reward_model_(model),
      init_states_(std::move(init_states)),
      deconfounding_(deconfounding),
      n_u_(n_u),
      u_source_(u_source) {
  if (init_states_.empty())
    throw std::invalid_argument("model env: need at least one start sequence");
}

Tensor ModelEnvSource::reset(RandomStream& rng) {
  current_evidence_ = &init_states_[rng.index(init_states_.size())];
  ModelBatch b = model_.make_batch({current_evidence_});
  DeconModel::Encoding enc = model_.encode(b);
  DiagGaussian q = model_.infer_z_step({}, {}, enc.h_left[0], enc.h_right[0], true);
  Tensor z({1, q.dim()});
  for (std::size_t j = 0; j < q.dim(); ++j)
    z.data[j] = q.mean->value.data[j] +
                std::sqrt(q.var->value.data[j]) * rng.normal();
  return z;
}

std::pair<Tensor, double> ModelEnvSource::step(const Tensor& z, double a,
                                               RandomStream& rng) {
  Var zv = constant(Tensor({1, z.size()}, z.data));
  Var av = constant(Tensor({1, 1}, a));
  DiagGaussian g = model_.gen_z_transition(zv, av);
  Tensor z_next({1, g.dim()});
  for (std::size_t j = 0; j < g.dim(); ++j)
    z_next.data[j] = g.mean->value.data[j] +
                     std::sqrt(g.var->value.data[j]) * rng.normal();
  double r;
  if (deconfounding_) {
    r = do_reward_mc(reward_model_, z, a, n_u_, u_source_, rng,
                     current_evidence_)
            .mean;
  } else {
    const Trajectory* ev =
        model_.config().include_u ? current_evidence_ : nullptr;
    r = conditional_reward(reward_model_, z, a, ev, n_u_, rng);
  }
  return {std::move(z_next), r};
}

namespace {

struct Trainer {
  PolicyConfig cfg;
  Policy policy;
  Adam opt_actor, opt_critic;
  ReplayMemory mem;
  RandomStream rng;
  std::vector<Param> actor_p, critic_p;
  std::vector<Var> all_vars;
  std::size_t global_step = 0;

  Trainer(PolicyConfig c, std::uint64_t seed)
      : cfg(c),
        policy(c, seed),
        opt_actor(c.lr),
        opt_critic(c.lr),
        mem(c.replay_capacity),
        rng(seed) {
    actor_p = policy.actor_params();
    critic_p = policy.critic_params();
    for (const auto& p : actor_p) all_vars.push_back(p.var);
    for (const auto& p : critic_p) all_vars.push_back(p.var);
  }

  void observe(Transition t) {
    t.r *= cfg.reward_scale;
    mem.push(std::move(t));
    ++global_step;
    if (mem.size() < cfg.batch || global_step % cfg.update_every != 0) return;
    std::vector<Transition> batch;
    batch.reserve(cfg.batch);
    for (std::size_t i = 0; i < cfg.batch; ++i) batch.push_back(mem.sample(rng));
    zero_grad(all_vars);
    ac_gradient(batch, policy, cfg.gamma);
    if (global_step > cfg.critic_warmup) opt_actor.step(actor_p);
    opt_critic.step(critic_p);
  }
};

void append_log(std::vector<TrainLogRow>& log, std::size_t episode,
                double total_reward, double opt_freq, double wall_ms) {
  TrainLogRow row;
  row.episode = episode;
  row.total_reward = total_reward;
  row.opt_action_freq = opt_freq;
  row.wall_ms = wall_ms;
  double sum = total_reward;
  std::size_t n = 1;
  for (auto it = log.rbegin(); it != log.rend() && n < 100; ++it, ++n)
    sum += it->total_reward;
  row.moving_avg = sum / n;
  log.push_back(row);
}

}  // namespace

TrainResult train_ac(EnvSource& env, std::size_t episodes,
                     std::size_t steps_per_episode, const PolicyConfig& cfg_in,
                     std::uint64_t seed) {
  PolicyConfig cfg = cfg_in;
  cfg.z_dim = env.z_dim();
  cfg.discrete = env.kind() == EnvKind::cartpole;
  cfg.action_bound = action_bound(env.kind());

  Trainer tr(cfg, seed);
  std::vector<TrainLogRow> log;
  for (std::size_t ep = 0; ep < episodes; ++ep) {
    const auto t0 = std::chrono::steady_clock::now();
    Tensor z = env.reset(tr.rng);
    double total = 0;
    std::size_t opt = 0;
    for (std::size_t s = 0; s < steps_per_episode; ++s) {
      const double a = tr.policy.sample_action(z, tr.rng);
      auto [z_next, r] = env.step(z, a, tr.rng);
      total += r;
      if (band_category(env.kind(), cfg.discrete, a) == 0) ++opt;
      tr.observe({z, a, r, z_next});
      z = std::move(z_next);
    }
    append_log(log, ep + 1, total,
               static_cast<double>(opt) / steps_per_episode, elapsed_ms(t0));
  }
  return {std::move(tr.policy), std::move(log)};
}

TrainResult train_ac_direct(const DeconModel& state_model,
                            const std::vector<Trajectory>& data, EnvKind kind,
                            std::size_t episodes, std::size_t steps_per_episode,
                            const PolicyConfig& cfg_in, std::uint64_t seed) {
  if (data.empty()) throw std::invalid_argument("direct ac: empty dataset");
  const std::size_t D = state_model.config().dims.D_z;

  // Embed every logged step once: posterior mean states from the inference
  // network, raw rewards from the log.
  std::vector<Transition> tuples;
  for (const auto& traj : data) {
    ModelBatch b = state_model.make_batch({&traj});
    DeconModel::Encoding enc = state_model.encode(b);
    std::vector<Tensor> zs;
    Var z_prev, a_prev;
    for (std::size_t t = 0; t < b.T; ++t) {
      DiagGaussian q = state_model.infer_z_step(z_prev, a_prev, enc.h_left[t],
                                                enc.h_right[t], t == 0);
      zs.push_back(Tensor({1, D}, q.mean->value.data));
      z_prev = q.mean;
      a_prev = b.a[t];
    }
    for (std::size_t t = 0; t + 1 < b.T; ++t)
      tuples.push_back({zs[t], traj.actions[t], traj.rewards[t], zs[t + 1]});
  }

  PolicyConfig cfg = cfg_in;
  cfg.z_dim = D;
  cfg.discrete = kind == EnvKind::cartpole;
  cfg.action_bound = action_bound(kind);

  Trainer tr(cfg, seed);
  std::vector<TrainLogRow> log;
  for (std::size_t ep = 0; ep < episodes; ++ep) {
    const auto t0 = std::chrono::steady_clock::now();
    double total = 0;
    std::size_t opt = 0;
    for (std::size_t s = 0; s < steps_per_episode; ++s) {
      const Transition& t = tuples[tr.rng.index(tuples.size())];
      total += t.r;
      // The logged actions are fixed, so the band frequency tracks what the
      // current policy would pick instead.
      if (band_category(kind, cfg.discrete, tr.policy.greedy_action(t.z)) == 0)
        ++opt;
      tr.observe(t);
    }
    append_log(log, ep + 1, total,
               static_cast<double>(opt) / steps_per_episode, elapsed_ms(t0));
  }
  return {std::move(tr.policy), std::move(log)};
}

nlohmann::json EvalReport::to_json() const {
  return {{"episode_rewards", episode_rewards},
          {"episode_opt_freq", episode_opt_freq},
          {"mean_reward", mean_reward},
          {"std_reward", std_reward},
          {"mean_opt_freq", mean_opt_freq},
          {"std_opt_freq", std_opt_freq}};
}

namespace {
std::pair<double, double> mean_std(const std::vector<double>& xs) {
  double m = 0;
  for (double x : xs) m += x;
  m /= xs.size();
  double v = 0;
  for (double x : xs) v += (x - m) * (x - m);
  return {m, xs.size() > 1 ? std::sqrt(v / (xs.size() - 1)) : 0.0};
}
}  // namespace

EvalReport evaluate(const Policy& policy, EnvSource& env,
                    std::size_t n_episodes, std::size_t steps,
                    std::uint64_t seed) {
  if (n_episodes == 0 || steps == 0)
    throw std::invalid_argument("evaluate: episodes and steps must be positive");
  RandomStream rng(seed);
  EvalReport rep;
  for (std::size_t ep = 0; ep < n_episodes; ++ep) {
    Tensor z = env.reset(rng);
    double total = 0;
    std::size_t opt = 0;
    for (std::size_t s = 0; s < steps; ++s) {
      const double a = policy.greedy_action(z);
      auto [z_next, r] = env.step(z, a, rng);
      total += r;
      if (band_category(env.kind(), policy.config().discrete, a) == 0) ++opt;
      z = std::move(z_next);
    }
    rep.episode_rewards.push_back(total);
    rep.episode_opt_freq.push_back(static_cast<double>(opt) / steps);
  }
  std::tie(rep.mean_reward, rep.std_reward) = mean_std(rep.episode_rewards);
  std::tie(rep.mean_opt_freq, rep.std_opt_freq) = mean_std(rep.episode_opt_freq);
  return rep;
}

}  // namespace drl
