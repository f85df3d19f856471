#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "drl/causal.hpp"
#include "drl/random.hpp"
#include "drl/tensor.hpp"

namespace drl {

enum class EnvKind { pendulum, cartpole, glyph };

EnvKind env_kind_from_string(const std::string& s);
std::string to_string(EnvKind k);

// Binary confounder driving both the action-category choice and the extra
// mixture reward. Defaults are the bundled benchmark table.
struct ConfoundingSpec {
  double p_u = 0.2;  // p(u = 1)
  std::array<double, 2> p_T1_given_u = {0.24, 0.77};
  // p(r_c = R1 | category, u), indexed [category][u] with category 0 = T1.
  std::array<std::array<double, 2>, 2> p_R1 = {{{0.93, 0.73}, {0.87, 0.69}}};
  double mu_R1 = -1.0;
  double mu_R2 = -200.0;
  double sigma = 2.0;
  double noise_prob = 0.2;

  void validate() const;
  nlohmann::json to_json() const;
  static ConfoundingSpec from_json(const nlohmann::json& j);

  // Exact-enumeration view of the same tables.
  DiscreteCPT to_cpt() const;

  double expected_rc(int category, int u) const {
    return p_R1[category][u] * mu_R1 + (1.0 - p_R1[category][u]) * mu_R2;
  }
};

struct PendulumState {
  double theta = 0.0;  // wrapped to (-pi, pi]
  double theta_dot = 0.0;
};

struct CartpoleState {
  double x = 0.0, x_dot = 0.0, theta = 0.0, theta_dot = 0.0;
};

struct GlyphState {
  double rotation = 0.0;
  int glyph_id = 0;
};

double wrap_angle(double a);  // to (-pi, pi]

// Action bound and T1/T2 category boundary per environment.
double action_bound(EnvKind k);
double category_boundary(EnvKind k);
// 0 = T1 (the better treatment band), 1 = T2.
int action_category(EnvKind k, double a);

struct StepResult {
  double r_o = 0.0;
  bool done = false;
};

StepResult step_pendulum(PendulumState& s, double a);
StepResult step_cartpole(CartpoleState& s, int a);
StepResult step_glyph(GlyphState& s, double a);

// Grayscale H x W frame in [0, 1].
Tensor render_pendulum(const PendulumState& s, std::size_t H, std::size_t W);
Tensor render_cartpole(const CartpoleState& s, std::size_t H, std::size_t W);
Tensor render_glyph(const GlyphState& s, std::size_t H, std::size_t W);

// Binarize at 0.5, then flip each pixel independently with probability p.
Tensor corrupt(const Tensor& frame, RandomStream& rng, double p = 0.2);

// Draws the action category from p(T1|u), then the magnitude uniformly
// within the category band with uniform sign. Cartpole maps T1/T2 onto its
// two discrete actions.
double confounded_policy(int u, EnvKind kind, const ConfoundingSpec& spec,
                         RandomStream& rng);

// r = r_o + r_c, with r_c from the two-component Gaussian mixture.
double confounded_reward(double r_o, double action, int u, EnvKind kind,
                         const ConfoundingSpec& spec, RandomStream& rng);

struct Trajectory {
  std::vector<Tensor> obs;      // T frames, each (H, W)
  std::vector<double> actions;  // T
  std::vector<double> rewards;  // T (r_2 .. r_{T+1})
  std::uint8_t u_true = 0;
  std::uint16_t block_start = 0;
  // Top-left pixel of the superimposed 2x2 square. Ground truth for
  // detectors: the glyph's own cells are visually identical to the square,
  // so block analyses must key on this position.
  std::uint16_t block_row = 0, block_col = 0;
};

Trajectory generate_trajectory(EnvKind kind, const ConfoundingSpec& spec,
                               std::size_t T, std::size_t H, std::size_t W,
                               RandomStream rng);

// Child seeds are derived per sequence from (seed, index), so generation
// order is reproducible and parallelizable.
std::vector<Trajectory> generate_sequences(EnvKind kind,
                                           const ConfoundingSpec& spec,
                                           std::size_t n, std::size_t T,
                                           std::size_t H, std::size_t W,
                                           std::uint64_t seed);

}  // namespace drl
