#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>

#include "drl/model.hpp"

using namespace drl;

namespace {

ModelConfig tiny_config(bool include_u = true) {
  ModelConfig cfg;
  cfg.dims.H = 2;
  cfg.dims.W = 2;
  cfg.dims.D_z = 2;
  cfg.dims.D_u = 1;
  cfg.dims.T = 3;
  cfg.include_u = include_u;
  cfg.hidden = 8;
  cfg.rnn_hidden = 4;
  cfg.conv_layers = 0;
  cfg.r_min = -5.0;
  cfg.r_max = 5.0;
  cfg.validate();
  return cfg;
}

Trajectory random_traj(const ModelConfig& cfg, RandomStream& rng) {
  Trajectory t;
  for (std::size_t i = 0; i < cfg.dims.T; ++i) {
    Tensor f({cfg.dims.H, cfg.dims.W});
    for (auto& v : f.data) v = rng.uniform();
    t.obs.push_back(std::move(f));
    t.actions.push_back(rng.uniform(-cfg.action_bound, cfg.action_bound));
    t.rewards.push_back(rng.uniform(cfg.r_min + 0.5, cfg.r_max - 0.5));
  }
  return t;
}

// Finite differences on randomly chosen parameter entries, with common
// random numbers via a fresh stream per evaluation.
double fd_check(DeconModel& model, const ModelBatch& batch, std::size_t picks,
                std::uint64_t noise_seed, std::uint64_t pick_seed) {
  auto params = model.parameters();
  std::vector<Var> vars;
  for (const auto& p : params) vars.push_back(p.var);
  auto loss_at = [&] {
    RandomStream rng(noise_seed);
    return model.loss_drl(batch, rng)->value.data[0];
  };
  zero_grad(vars);
  {
    RandomStream rng(noise_seed);
    backward(model.loss_drl(batch, rng));
  }
  RandomStream picker(pick_seed);
  double worst = 0;
  const double h = 1e-5;
  for (std::size_t k = 0; k < picks; ++k) {
    Var v = vars[picker.index(vars.size())];
    const std::size_t i = picker.index(v->value.size());
    const double saved = v->value.data[i];
    v->value.data[i] = saved + h;
    const double up = loss_at();
    v->value.data[i] = saved - h;
    const double down = loss_at();
    v->value.data[i] = saved;
    const double fd = (up - down) / (2 * h);
    const double an = v->grad.data[i];
    const double denom = std::max({std::fabs(fd), std::fabs(an), 1e-6});
    worst = std::max(worst, std::fabs(fd - an) / denom);
  }
  return worst;
}

}  // namespace

TEST_CASE("model construction validates dimensions") {
  ModelConfig cfg = tiny_config();
  cfg.dims.D_z = 10;  // latent larger than the 4-pixel observation
  CHECK_THROWS(cfg.validate());
  cfg = tiny_config();
  cfg.r_min = 1.0;
  cfg.r_max = 1.0;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("parameters are named, ordered, and reproducible per seed") {
  DeconModel a(tiny_config(), 5), b(tiny_config(), 5), c(tiny_config(), 6);
  auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  REQUIRE(pa.size() == pb.size());
  bool any_diff = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].name == pb[i].name);
    CHECK(pa[i].var->value.data == pb[i].var->value.data);
    if (pa[i].var->value.data != pc[i].var->value.data) any_diff = true;
  }
  CHECK(any_diff);  // different seed, different init
}

TEST_CASE("generative heads respect their ranges") {
  ModelConfig cfg = tiny_config();
  DeconModel m(cfg, 1);
  RandomStream rng(2);
  Var z = constant(rng.normal_tensor({3, cfg.dims.D_z}, 3.0));
  Var u = constant(rng.normal_tensor({3, cfg.dims.D_u}, 3.0));
  Var a = constant(rng.normal_tensor({3, 1}));

  DiagGaussian gx = m.gen_x(z, u);
  for (double v : gx.mean->value.data) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);  // sigmoid pixel mean
  }
  DiagGaussian ga = m.gen_a(z, u);
  for (double v : ga.mean->value.data)
    CHECK(std::fabs(v) <= cfg.action_bound);  // tanh-scaled
  DiagGaussian gr = m.gen_r(z, a, u);
  for (double v : gr.mean->value.data) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);  // sigmoid over normalized rewards
  }
  for (const DiagGaussian& g : {gx, ga, gr, m.gen_z_transition(z, a)})
    for (double v : g.var->value.data) CHECK(v > 0.0);
}

TEST_CASE("priors are standard normal and bernoulli u sampling works") {
  ModelConfig cfg = tiny_config();
  DeconModel m(cfg, 3);
  DiagGaussian pz = m.prior_z(4);
  for (double v : pz.mean->value.data) CHECK(v == 0.0);
  for (double v : pz.var->value.data) CHECK(v == 1.0);

  RandomStream rng(5);
  double sum = 0, sum_sq = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double s = m.sample_u_prior(rng).data[0];
    sum += s;
    sum_sq += s * s;
  }
  CHECK(sum / n == doctest::Approx(0.0).epsilon(1).scale(0.02));
  CHECK(sum_sq / n - std::pow(sum / n, 2) == doctest::Approx(1.0).epsilon(0.02));

  cfg.bernoulli_u = true;
  cfg.bernoulli_p = 0.2;
  DeconModel mb(cfg, 3);
  int ones = 0;
  for (int i = 0; i < n; ++i) {
    const double s = mb.sample_u_prior(rng).data[0];
    CHECK((s == 0.0 || s == 1.0));
    ones += s == 1.0;
  }
  CHECK(static_cast<double>(ones) / n == doctest::Approx(0.2).epsilon(0.05));
}

TEST_CASE("elbo breakdown is finite with non-negative KL terms") {
  ModelConfig cfg = tiny_config();
  DeconModel m(cfg, 7);
  RandomStream rng(8);
  std::vector<Trajectory> trajs;
  for (int i = 0; i < 4; ++i) trajs.push_back(random_traj(cfg, rng));
  ModelBatch batch = m.make_batch({&trajs[0], &trajs[1], &trajs[2], &trajs[3]});
  auto res = m.elbo(batch, rng);
  CHECK(std::isfinite(res.breakdown.total));
  CHECK(res.breakdown.kl_u >= 0.0);
  CHECK(res.breakdown.kl_z1 >= 0.0);
  CHECK(res.breakdown.kl_z_transitions >= 0.0);
  CHECK(res.breakdown.total ==
        doctest::Approx(res.breakdown.recon_x + res.breakdown.recon_a +
                        res.breakdown.recon_r - res.breakdown.kl_u -
                        res.breakdown.kl_z1 - res.breakdown.kl_z_transitions)
            .epsilon(1e-9));
}

TEST_CASE("alt variant has no confounder terms") {
  ModelConfig cfg = tiny_config(false);
  DeconModel m(cfg, 9);
  RandomStream rng(10);
  Trajectory t = random_traj(cfg, rng);
  ModelBatch batch = m.make_batch({&t});
  ElboBreakdown bd;
  m.loss_drl(batch, rng, &bd);
  CHECK(bd.kl_u == 0.0);
  CHECK_THROWS_AS(m.infer_u(t), std::logic_error);
  // No parameter name mentions the confounder encoder.
  for (const auto& p : m.parameters())
    CHECK(p.name.find("enc_u") == std::string::npos);
}

TEST_CASE("action likelihood toggle removes recon_a") {
  ModelConfig cfg = tiny_config();
  cfg.include_action_likelihood = false;
  DeconModel m(cfg, 11);
  RandomStream rng(12);
  Trajectory t = random_traj(cfg, rng);
  ModelBatch batch = m.make_batch({&t});
  ElboBreakdown bd;
  m.loss_drl(batch, rng, &bd);
  CHECK(bd.recon_a == 0.0);
  CHECK(bd.aux_a != 0.0);  // auxiliary task stays
}

TEST_CASE("loss_drl gradients match finite differences") {
  ModelConfig cfg = tiny_config();
  DeconModel m(cfg, 13);
  RandomStream rng(14);
  std::vector<Trajectory> trajs = {random_traj(cfg, rng), random_traj(cfg, rng)};
  ModelBatch batch = m.make_batch({&trajs[0], &trajs[1]});
  CHECK(fd_check(m, batch, 24, 15, 16) < 1e-3);
}

TEST_CASE("alt variant gradients match finite differences") {
  ModelConfig cfg = tiny_config(false);
  DeconModel m(cfg, 17);
  RandomStream rng(18);
  Trajectory t = random_traj(cfg, rng);
  ModelBatch batch = m.make_batch({&t});
  CHECK(fd_check(m, batch, 16, 19, 20) < 1e-3);
}

TEST_CASE("conv encoder path also differentiates correctly") {
  ModelConfig cfg;
  cfg.dims.H = 8;
  cfg.dims.W = 8;
  cfg.dims.D_z = 3;
  cfg.dims.D_u = 1;
  cfg.dims.T = 3;
  cfg.hidden = 8;
  cfg.rnn_hidden = 4;
  cfg.conv_layers = 2;
  cfg.r_min = -5;
  cfg.r_max = 5;
  DeconModel m(cfg, 21);
  RandomStream rng(22);
  Trajectory t = random_traj(cfg, rng);
  ModelBatch batch = m.make_batch({&t});
  CHECK(fd_check(m, batch, 16, 23, 24) < 1e-3);
}

TEST_CASE("reward normalization round trips") {
  DeconModel m(tiny_config(), 25);
  CHECK(m.denorm_reward(m.norm_reward(-3.21)) == doctest::Approx(-3.21));
  CHECK(m.norm_reward(-5.0) == doctest::Approx(0.0));
  CHECK(m.norm_reward(5.0) == doctest::Approx(1.0));
}

TEST_CASE("reconstruction returns one frame per input step, in range") {
  ModelConfig cfg = tiny_config();
  DeconModel m(cfg, 27);
  RandomStream rng(28);
  Trajectory t = random_traj(cfg, rng);
  auto frames = m.reconstruct(t, rng);
  REQUIRE(frames.size() == t.obs.size());
  for (const auto& f : frames) {
    REQUIRE(f.shape == std::vector<std::size_t>{cfg.dims.H, cfg.dims.W});
    for (double v : f.data) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
  }
}

TEST_CASE("counterfactual rollout structure and guards") {
  ModelConfig cfg = tiny_config();
  DeconModel m(cfg, 29);
  RandomStream rng(30);
  Trajectory t = random_traj(cfg, rng);
  Tensor frame({1, cfg.dims.D_x()}, t.obs[0].data);

  CHECK_THROWS(m.counterfactual(frame, {}, 0, rng));

  auto one = m.counterfactual(frame, {}, 1, rng);
  CHECK(one.frames.size() == 1);
  CHECK(std::fabs(one.a_hat) <= cfg.action_bound);

  auto forced = m.counterfactual(frame, {0.5, -0.5}, 4, rng);
  CHECK(forced.frames.size() == 4);
  CHECK(forced.actions[0] == 0.5);
  CHECK(forced.actions[1] == -0.5);
  for (const auto& f : forced.frames)
    for (double v : f.data) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
  for (double a : forced.actions) CHECK(std::fabs(a) <= cfg.action_bound);
  // Rewards are reported on the raw scale.
  for (double r : forced.rewards) {
    CHECK(r > cfg.r_min - 1e-9);
    CHECK(r < cfg.r_max + 1e-9);
  }
}

TEST_CASE("checkpoint round trip reproduces behaviour exactly") {
  ModelConfig cfg = tiny_config();
  DeconModel m(cfg, 31);
  const std::string path = "test_model_ckpt.bin";
  m.save(path);
  DeconModel back = DeconModel::load(path);
  RandomStream rng_a(32), rng_b(32);
  Trajectory t = random_traj(cfg, rng_a);
  RandomStream rng_c(33), rng_d(33);
  ModelBatch ba = m.make_batch({&t});
  ModelBatch bb = back.make_batch({&t});
  CHECK(m.loss_drl(ba, rng_c)->value.data[0] ==
        doctest::Approx(back.loss_drl(bb, rng_d)->value.data[0]).epsilon(1e-15));
  // Byte stability: saving the loaded model gives identical bytes.
  const std::string path2 = "test_model_ckpt2.bin";
  back.save(path2);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)), {});
  std::string s2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(s1 == s2);
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("batch construction rejects length mismatches") {
  ModelConfig cfg = tiny_config();
  DeconModel m(cfg, 35);
  RandomStream rng(36);
  Trajectory t = random_traj(cfg, rng);
  t.obs.pop_back();
  CHECK_THROWS(m.make_batch({&t}));
}
