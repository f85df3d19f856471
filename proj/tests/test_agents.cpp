#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "drl/agents.hpp"

using namespace drl;

namespace {

PolicyConfig small_policy(std::size_t z_dim = 3, bool discrete = false) {
  PolicyConfig cfg;
  cfg.z_dim = z_dim;
  cfg.hidden = 16;
  cfg.discrete = discrete;
  cfg.action_bound = 2.0;
  cfg.batch = 16;
  return cfg;
}

}  // namespace

TEST_CASE("replay memory is a FIFO ring") {
  ReplayMemory mem(3);
  for (double k = 0; k < 5; ++k)
    mem.push({Tensor({1}, {k}), k, 0.0, Tensor({1}, {k})});
  REQUIRE(mem.size() == 3);
  // Oldest two evicted: remaining are 2, 3, 4 in insertion order.
  CHECK(mem.at(0).a == 2.0);
  CHECK(mem.at(1).a == 3.0);
  CHECK(mem.at(2).a == 4.0);
}

TEST_CASE("continuous policy actions respect the bound") {
  Policy pol(small_policy(), 1);
  RandomStream rng(2);
  for (int i = 0; i < 200; ++i) {
    Tensor z = rng.normal_tensor({1, 3});
    const double a = pol.sample_action(z, rng);
    CHECK(std::fabs(a) < 2.0);
  }
  Tensor z = rng.normal_tensor({1, 3});
  CHECK(pol.greedy_action(z) == pol.greedy_action(z));  // deterministic
}

TEST_CASE("discrete policy emits 0/1 actions") {
  Policy pol(small_policy(3, true), 3);
  RandomStream rng(4);
  bool saw0 = false, saw1 = false;
  for (int i = 0; i < 200; ++i) {
    Tensor z = rng.normal_tensor({1, 3});
    const double a = pol.sample_action(z, rng);
    CHECK((a == 0.0 || a == 1.0));
    saw0 = saw0 || a == 0.0;
    saw1 = saw1 || a == 1.0;
  }
  CHECK(saw0);
  CHECK(saw1);
}

TEST_CASE("squashed log density integrates to one over the action range") {
  Policy pol(small_policy(2), 5);
  RandomStream rng(6);
  Tensor z = rng.normal_tensor({1, 2});
  // Trapezoid rule over a in (-2, 2), avoiding the atanh singularities.
  const int n = 20000;
  const double lo = -2.0 + 1e-4, hi = 2.0 - 1e-4;
  double integral = 0;
  for (int i = 0; i <= n; ++i) {
    const double a = lo + (hi - lo) * i / n;
    Var lp = pol.log_prob(constant(Tensor({1, 2}, z.data)),
                          constant(Tensor({1, 1}, a)));
    const double w = (i == 0 || i == n) ? 0.5 : 1.0;
    integral += w * std::exp(lp->value.data[0]);
  }
  integral *= (hi - lo) / n;
  CHECK(integral == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("discrete log probabilities sum to one") {
  Policy pol(small_policy(2, true), 7);
  RandomStream rng(8);
  Tensor z = rng.normal_tensor({1, 2});
  double total = 0;
  for (double a : {0.0, 1.0})
    total += std::exp(pol.log_prob(constant(Tensor({1, 2}, z.data)),
                                   constant(Tensor({1, 1}, a)))
                          ->value.data[0]);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("actor and critic gradients match finite differences") {
  for (bool discrete : {false, true}) {
    CAPTURE(discrete);
    PolicyConfig cfg = small_policy(3, discrete);
    Policy pol(cfg, 9);
    RandomStream rng(10);
    std::vector<Transition> batch;
    for (int i = 0; i < 8; ++i) {
      Transition t;
      t.z = rng.normal_tensor({1, 3});
      t.z_next = rng.normal_tensor({1, 3});
      t.a = discrete ? (rng.bernoulli(0.5) ? 1.0 : 0.0) : rng.uniform(-1.9, 1.9);
      t.r = rng.normal();
      batch.push_back(std::move(t));
    }
    const double gamma = 0.95;

    // Frozen targets / advantages so finite differences see the same
    // constants the analytic actor and critic terms treat as data.
    const std::size_t B = batch.size();
    std::vector<double> adv(B), target(B);
    for (std::size_t i = 0; i < B; ++i) {
      target[i] = batch[i].r + gamma * pol.value(batch[i].z_next);
      adv[i] = target[i] - pol.value(batch[i].z);
    }
    auto actor_loss = [&] {
      double s = 0;
      for (std::size_t i = 0; i < B; ++i)
        s += adv[i] * pol.log_prob(constant(Tensor({1, 3}, batch[i].z.data)),
                                   constant(Tensor({1, 1}, batch[i].a)))
                          ->value.data[0];
      return -s / B;
    };
    auto critic_loss = [&] {
      double s = 0;
      for (std::size_t i = 0; i < B; ++i)
        s += std::pow(target[i] - pol.value(batch[i].z), 2);
      return s / B;
    };

    auto actor_p = pol.actor_params();
    auto critic_p = pol.critic_params();
    std::vector<Var> all;
    for (const auto& p : actor_p) all.push_back(p.var);
    for (const auto& p : critic_p) all.push_back(p.var);
    zero_grad(all);
    AcStats stats = ac_gradient(batch, pol, gamma);
    CHECK(stats.actor_loss == doctest::Approx(actor_loss()).epsilon(1e-9));
    CHECK(stats.critic_loss == doctest::Approx(critic_loss()).epsilon(1e-9));

    RandomStream picker(11);
    const double h = 1e-5;
    double worst = 0;
    auto probe = [&](const std::vector<Param>& params, auto&& loss_fn) {
      for (int k = 0; k < 8; ++k) {
        Var v = params[picker.index(params.size())].var;
        const std::size_t i = picker.index(v->value.size());
        const double saved = v->value.data[i];
        v->value.data[i] = saved + h;
        const double up = loss_fn();
        v->value.data[i] = saved - h;
        const double down = loss_fn();
        v->value.data[i] = saved;
        const double fd = (up - down) / (2 * h);
        const double an = v->grad.data[i];
        const double denom = std::max({std::fabs(fd), std::fabs(an), 1e-6});
        worst = std::max(worst, std::fabs(fd - an) / denom);
      }
    };
    probe(actor_p, actor_loss);
    probe(critic_p, critic_loss);
    CHECK(worst < 1e-3);
  }
}

TEST_CASE("oracle env source rewards by mode") {
  ConfoundingSpec spec;
  RandomStream rng(12);

  OracleEnvSource exact_do(spec, EnvKind::pendulum, OracleRewardMode::exact_do);
  Tensor z = exact_do.reset(rng);
  CHECK(exact_do.step(z, 1.5, rng).second == doctest::Approx(-22.890));
  CHECK(exact_do.step(z, 0.5, rng).second == doctest::Approx(-34.034));

  OracleEnvSource cond(spec, EnvKind::pendulum,
                       OracleRewardMode::exact_conditional);
  CHECK(cond.step(z, 1.5, rng).second == doctest::Approx(-32.644450867052023));

  // Sampled mode: forcing T1 every step estimates the do-value.
  OracleEnvSource sampled(spec, EnvKind::pendulum, OracleRewardMode::sampled);
  const int n = 100000;
  double sum = 0;
  for (int i = 0; i < n; ++i) sum += sampled.step(z, 1.5, rng).second;
  // Mixture-of-cells variance: p(R1|do(T1)) = 0.89 across u.
  const double var = 0.89 * 0.11 * std::pow(199.0, 2) + 4.0;
  const double tol = 5.0 * std::sqrt(var / n);
  CHECK(sum / n == doctest::Approx(-22.890).epsilon(1).scale(tol));
}

TEST_CASE("training log bookkeeping and determinism") {
  ConfoundingSpec spec;
  OracleEnvSource env(spec, EnvKind::pendulum, OracleRewardMode::exact_do);
  PolicyConfig cfg = small_policy();
  cfg.batch = 8;
  auto run = [&] { return train_ac(env, 12, 5, cfg, 77); };
  TrainResult a = run(), b = run();
  REQUIRE(a.log.size() == 12);
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(a.log[i].episode == i + 1);
    CHECK(a.log[i].total_reward == b.log[i].total_reward);
    CHECK(a.log[i].opt_action_freq == b.log[i].opt_action_freq);
    CHECK(a.log[i].opt_action_freq >= 0.0);
    CHECK(a.log[i].opt_action_freq <= 1.0);
  }
  // Moving average over the full prefix (window 100 > 12 episodes).
  double prefix = 0;
  for (std::size_t i = 0; i < 12; ++i) {
    prefix += a.log[i].total_reward;
    CHECK(a.log[i].moving_avg == doctest::Approx(prefix / (i + 1)).epsilon(1e-12));
  }
}

TEST_CASE("policy checkpoint round trips") {
  Policy pol(small_policy(), 13);
  const std::string path = "test_policy.bin";
  pol.save(path);
  Policy back = Policy::load(path);
  RandomStream rng(14);
  for (int i = 0; i < 10; ++i) {
    Tensor z = rng.normal_tensor({1, 3});
    CHECK(pol.greedy_action(z) == back.greedy_action(z));
    CHECK(pol.value(z) == back.value(z));
  }
  std::remove(path.c_str());
}

TEST_CASE("evaluation is deterministic with consistent aggregates") {
  ConfoundingSpec spec;
  OracleEnvSource env(spec, EnvKind::pendulum, OracleRewardMode::sampled);
  Policy pol(small_policy(4), 15);
  EvalReport a = evaluate(pol, env, 5, 10, 3);
  EvalReport b = evaluate(pol, env, 5, 10, 3);
  REQUIRE(a.episode_rewards.size() == 5);
  CHECK(a.episode_rewards == b.episode_rewards);
  double mean = 0;
  for (double r : a.episode_rewards) mean += r;
  CHECK(a.mean_reward == doctest::Approx(mean / 5).epsilon(1e-12));
  CHECK(a.to_json().at("episode_rewards").size() == 5);
}

TEST_CASE("model-backed env source rolls out and rewards") {
  ModelConfig mc;
  mc.dims.H = 2;
  mc.dims.W = 2;
  mc.dims.D_z = 2;
  mc.dims.D_u = 1;
  mc.dims.T = 3;
  mc.hidden = 8;
  mc.rnn_hidden = 4;
  mc.conv_layers = 0;
  mc.r_min = -10;
  mc.r_max = 0;
  DeconModel model(mc, 16);
  RandomStream gen(17);
  std::vector<Trajectory> starts;
  for (int i = 0; i < 3; ++i) {
    Trajectory t;
    for (int s = 0; s < 3; ++s) {
      Tensor f({2, 2});
      for (auto& v : f.data) v = gen.uniform();
      t.obs.push_back(std::move(f));
      t.actions.push_back(gen.uniform(-2, 2));
      t.rewards.push_back(gen.uniform(-9, -1));
    }
    starts.push_back(std::move(t));
  }
  ModelEnvSource env(model, starts, true, 8, USource::prior);
  RandomStream rng(18);
  Tensor z = env.reset(rng);
  REQUIRE(z.size() == 2);
  auto [z2, r] = env.step(z, 0.3, rng);
  CHECK(z2.size() == 2);
  CHECK(std::isfinite(r));
  CHECK(r > mc.r_min);
  CHECK(r < mc.r_max);

  // Direct AC on the same data trains and logs.
  PolicyConfig cfg = small_policy(2);
  cfg.batch = 4;
  TrainResult res =
      train_ac_direct(model, starts, EnvKind::pendulum, 4, 6, cfg, 19);
  CHECK(res.log.size() == 4);
}
