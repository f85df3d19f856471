#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "drl/dataset.hpp"
#include "drl/envs.hpp"

using namespace drl;

TEST_CASE("confounding spec defaults match the bundled table") {
  ConfoundingSpec s;
  CHECK(s.p_u == 0.2);
  CHECK(s.p_T1_given_u[0] == 0.24);
  CHECK(s.p_T1_given_u[1] == 0.77);
  CHECK(s.p_R1[0][0] == 0.93);
  CHECK(s.p_R1[1][0] == 0.87);
  CHECK(s.p_R1[0][1] == 0.73);
  CHECK(s.p_R1[1][1] == 0.69);
  CHECK(s.mu_R1 == -1.0);
  CHECK(s.mu_R2 == -200.0);
  CHECK(s.sigma == 2.0);
  s.validate();
  CHECK_THROWS([] { ConfoundingSpec bad; bad.p_u = 1.5; bad.validate(); }());
}

TEST_CASE("spec json round trip") {
  ConfoundingSpec s;
  s.p_u = 0.35;
  s.sigma = 1.25;
  ConfoundingSpec back = ConfoundingSpec::from_json(s.to_json());
  CHECK(back.p_u == s.p_u);
  CHECK(back.sigma == s.sigma);
  CHECK(back.p_R1 == s.p_R1);
}

TEST_CASE("pendulum dynamics fixed points and cost") {
  // Upright with no velocity and no torque is a fixed point with zero cost.
  PendulumState s{0.0, 0.0};
  StepResult r = step_pendulum(s, 0.0);
  CHECK(s.theta == doctest::Approx(0.0));
  CHECK(s.theta_dot == doctest::Approx(0.0));
  CHECK(r.r_o == doctest::Approx(0.0));
  // Hanging down: gravity term vanishes at theta = pi as well, but the cost
  // reflects the pre-step angle.
  PendulumState down{M_PI, 0.0};
  StepResult rd = step_pendulum(down, 0.0);
  CHECK(rd.r_o == doctest::Approx(-(M_PI * M_PI)));
  // Velocity clipping.
  PendulumState fast{0.5, 100.0};
  step_pendulum(fast, 0.0);
  CHECK(fast.theta_dot <= 8.0);
}

TEST_CASE("cartpole terminates out of bounds and restarts are external") {
  CartpoleState s{2.5, 0, 0, 0};
  CHECK(step_cartpole(s, 1).done);
  CartpoleState tilted{0, 0, 0.3, 0};  // > 12 degrees
  CHECK(step_cartpole(tilted, 0).done);
  CartpoleState ok{};
  CHECK_FALSE(step_cartpole(ok, 1).done);
}

TEST_CASE("glyph reward is the negative absolute rotation after the step") {
  GlyphState g{0.2, 3};
  StepResult r = step_glyph(g, -0.2);
  CHECK(r.r_o == doctest::Approx(-std::fabs(g.rotation)));
  CHECK(g.rotation == doctest::Approx(0.0).epsilon(1).scale(1e-12));
}

TEST_CASE("renderers produce frames in range with content") {
  PendulumState p{0.7, 0.0};
  CartpoleState c{0.3, 0, 0.05, 0};
  GlyphState g{0.4, 2};
  for (const Tensor& f : {render_pendulum(p, 16, 16), render_cartpole(c, 16, 16),
                          render_glyph(g, 16, 16)}) {
    REQUIRE(f.shape == std::vector<std::size_t>{16, 16});
    double mx = 0, mn = 1;
    for (double v : f.data) {
      mx = std::max(mx, v);
      mn = std::min(mn, v);
    }
    CHECK(mx > 0.5);   // something drawn
    CHECK(mn >= 0.0);
    CHECK(mx <= 1.0);
  }
}

TEST_CASE("glyph rotation by pi is an exact 180 degree flip") {
  GlyphState a{0.0, 5}, b{M_PI, 5};
  Tensor fa = render_glyph(a, 16, 16), fb = render_glyph(b, 16, 16);
  for (std::size_t r = 0; r < 16; ++r)
    for (std::size_t c = 0; c < 16; ++c)
      CHECK(fa.at2(r, c) == fb.at2(15 - r, 15 - c));
}

TEST_CASE("corrupt binarizes and flips with the requested probability") {
  Tensor f({8, 8});
  for (std::size_t i = 0; i < f.size(); ++i) f.data[i] = (i % 3) * 0.45;  // 0, .45, .9
  RandomStream rng(3);
  Tensor none = corrupt(f, rng, 0.0);
  for (std::size_t i = 0; i < f.size(); ++i)
    CHECK(none.data[i] == (f.data[i] >= 0.5 ? 1.0 : 0.0));
  Tensor all = corrupt(f, rng, 1.0);
  for (std::size_t i = 0; i < f.size(); ++i)
    CHECK(all.data[i] == (f.data[i] >= 0.5 ? 0.0 : 1.0));

  // Empirical flip rate at p = 0.2 over many pixels.
  Tensor big({100, 100}, 0.0);
  Tensor noisy = corrupt(big, rng, 0.2);
  double flips = 0;
  for (double v : noisy.data) flips += v;
  CHECK(flips / noisy.size() == doctest::Approx(0.2).epsilon(0.1));
}

TEST_CASE("confounded policy tracks p(T1|u) and covers both signs") {
  ConfoundingSpec spec;
  RandomStream rng(17);
  for (int u = 0; u < 2; ++u) {
    int t1 = 0, neg = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      const double a = confounded_policy(u, EnvKind::pendulum, spec, rng);
      CHECK(std::fabs(a) <= action_bound(EnvKind::pendulum));
      if (action_category(EnvKind::pendulum, a) == 0) ++t1;
      if (a < 0) ++neg;
    }
    const double p = spec.p_T1_given_u[u];
    // 5 sigma binomial tolerance.
    const double tol = 5.0 * std::sqrt(p * (1 - p) / n);
    CHECK(static_cast<double>(t1) / n == doctest::Approx(p).epsilon(1).scale(tol));
    CHECK(static_cast<double>(neg) / n == doctest::Approx(0.5).epsilon(0.05));
  }
  // Cartpole maps categories onto its two discrete actions.
  const double ac = confounded_policy(0, EnvKind::cartpole, spec, rng);
  CHECK((ac == 0.0 || ac == 1.0));
}

TEST_CASE("confounded reward degenerate mixture is exact") {
  ConfoundingSpec spec;
  spec.sigma = 0.0;
  spec.p_R1 = {{{1.0, 1.0}, {1.0, 1.0}}};
  RandomStream rng(19);
  CHECK(confounded_reward(2.5, 1.5, 0, EnvKind::pendulum, spec, rng) ==
        doctest::Approx(2.5 - 1.0).epsilon(1e-12));
}

TEST_CASE("confounded reward cell means match the enumeration oracle") {
  ConfoundingSpec spec;
  RandomStream rng(23);
  const int n = 100000;
  // (category, u) -> expected r_c from the mixture weights.
  const double actions[2] = {1.5, 0.5};  // T1 band, T2 band for pendulum
  for (int cat = 0; cat < 2; ++cat)
    for (int u = 0; u < 2; ++u) {
      double sum = 0;
      for (int i = 0; i < n; ++i)
        sum += confounded_reward(0.0, actions[cat], u, EnvKind::pendulum, spec, rng);
      const double want = spec.expected_rc(cat, u);
      const double p = spec.p_R1[cat][u];
      const double var = p * (1 - p) * std::pow(spec.mu_R1 - spec.mu_R2, 2) +
                         spec.sigma * spec.sigma;
      const double tol = 5.0 * std::sqrt(var / n);
      CHECK(sum / n == doctest::Approx(want).epsilon(1).scale(tol));
    }
  // Pinned cells: E[r_c|T1,u=0] = -14.93 and E[r_c|T2,u=1] = -62.69.
  CHECK(spec.expected_rc(0, 0) == doctest::Approx(-14.93).epsilon(1e-12));
  CHECK(spec.expected_rc(1, 1) == doctest::Approx(-62.69).epsilon(1e-12));
}

TEST_CASE("trajectories are structurally sound with a consecutive block") {
  ConfoundingSpec spec;
  auto trajs = generate_sequences(EnvKind::glyph, spec, 50, 5, 16, 16, 99);
  REQUIRE(trajs.size() == 50);
  int u1 = 0;
  for (const auto& t : trajs) {
    REQUIRE(t.obs.size() == 5);
    REQUIRE(t.actions.size() == 5);
    REQUIRE(t.rewards.size() == 5);
    CHECK(t.block_start <= 2);
    u1 += t.u_true;
    for (const auto& f : t.obs)
      for (double v : f.data) CHECK((v == 0.0 || v == 1.0));
  }
  CHECK(u1 > 0);       // both confounder values appear over 50 draws
  CHECK(u1 < 50);
}

TEST_CASE("block pixels are identical across the three block frames") {
  ConfoundingSpec spec;
  spec.noise_prob = 0.0;  // isolate the block from bit flips
  auto trajs = generate_sequences(EnvKind::glyph, spec, 20, 5, 16, 16, 7);
  for (const auto& t : trajs) {
    // The recorded position carries a 2x2 all-ones window in all three
    // block frames. (Outside those frames the glyph itself may or may not
    // light the same pixels, so only the positive direction is checked.)
    const std::size_t r = t.block_row, c = t.block_col;
    REQUIRE(r + 1 < 16);
    REQUIRE(c + 1 < 16);
    auto lit = [&](std::size_t f) {
      return t.obs[f].at2(r, c) == 1.0 && t.obs[f].at2(r, c + 1) == 1.0 &&
             t.obs[f].at2(r + 1, c) == 1.0 && t.obs[f].at2(r + 1, c + 1) == 1.0;
    };
    for (std::size_t f = t.block_start; f < t.block_start + 3u; ++f)
      CHECK(lit(f));
  }
}

TEST_CASE("marginal T1 frequency matches the closed-form 0.346") {
  ConfoundingSpec spec;
  auto trajs = generate_sequences(EnvKind::pendulum, spec, 400, 5, 16, 16, 31);
  int t1 = 0, total = 0;
  for (const auto& t : trajs)
    for (double a : t.actions) {
      t1 += action_category(EnvKind::pendulum, a) == 0;
      ++total;
    }
  // sum_u p(u) p(T1|u) = 0.8*0.24 + 0.2*0.77 = 0.346; 5 sigma over 2000.
  const double tol = 5.0 * std::sqrt(0.346 * 0.654 / total);
  CHECK(static_cast<double>(t1) / total ==
        doctest::Approx(0.346).epsilon(1).scale(tol * 3));
}

TEST_CASE("generation is deterministic and order-independent per index") {
  ConfoundingSpec spec;
  auto a = generate_sequences(EnvKind::glyph, spec, 10, 5, 16, 16, 42);
  auto b = generate_sequences(EnvKind::glyph, spec, 10, 5, 16, 16, 42);
  auto wider = generate_sequences(EnvKind::glyph, spec, 12, 5, 16, 16, 42);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(a[i].actions == b[i].actions);
    CHECK(a[i].rewards == b[i].rewards);
    CHECK(a[i].u_true == b[i].u_true);
    CHECK(a[i].obs[0].data == b[i].obs[0].data);
    // Sequence i does not depend on how many sequences follow it.
    CHECK(a[i].actions == wider[i].actions);
  }
}

TEST_CASE("dataset file round trips exactly") {
  ConfoundingSpec spec;
  auto trajs = generate_sequences(EnvKind::pendulum, spec, 6, 5, 16, 16, 11);
  DatasetHeader h;
  h.env = EnvKind::pendulum;
  h.spec = spec;
  h.seed = 11;
  std::tie(h.r_min, h.r_max) = reward_range(trajs);
  const std::string path = "test_ds_roundtrip.bin";
  write_dataset(path, h, trajs);
  Dataset ds = read_dataset(path);
  REQUIRE(ds.trajectories.size() == 6);
  CHECK(ds.header.r_min == h.r_min);
  CHECK(ds.header.seed == 11);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(ds.trajectories[i].actions == trajs[i].actions);
    CHECK(ds.trajectories[i].rewards == trajs[i].rewards);
    CHECK(ds.trajectories[i].u_true == trajs[i].u_true);
    CHECK(ds.trajectories[i].block_start == trajs[i].block_start);
    CHECK(ds.trajectories[i].block_row == trajs[i].block_row);
    CHECK(ds.trajectories[i].block_col == trajs[i].block_col);
    for (std::size_t t = 0; t < 5; ++t)
      for (std::size_t p = 0; p < 256; ++p)
        // Frames are stored as float32; values here are exactly 0 or 1.
        CHECK(ds.trajectories[i].obs[t].data[p] == trajs[i].obs[t].data[p]);
  }
  std::remove(path.c_str());
}

TEST_CASE("generate_dataset writes consistent splits") {
  ConfoundingSpec spec;
  DatasetSplits s = generate_dataset(EnvKind::glyph, spec, 21, 5, 16, 16, 13,
                                     "test_splits");
  CHECK(s.n_train == 15);
  CHECK(s.n_val == 3);
  CHECK(s.n_test == 3);
  Dataset train = read_dataset(s.train_path);
  Dataset test = read_dataset(s.test_path);
  CHECK(train.trajectories.size() == 15);
  CHECK(test.trajectories.size() == 3);
  // All splits share the training reward range.
  CHECK(train.header.r_min == test.header.r_min);
  CHECK(train.header.r_max == test.header.r_max);
  CHECK(s.u1_fraction >= 0.0);
  CHECK(s.u1_fraction <= 1.0);
  for (const auto& p : {s.train_path, s.val_path, s.test_path})
    std::remove(p.c_str());
}

TEST_CASE("short sequences are rejected") {
  ConfoundingSpec spec;
  CHECK_THROWS(generate_sequences(EnvKind::glyph, spec, 1, 2, 16, 16, 1));
}
