#include "drl/envs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace drl {

EnvKind env_kind_from_string(const std::string& s) {
  if (s == "pendulum") return EnvKind::pendulum;
  if (s == "cartpole") return EnvKind::cartpole;
  if (s == "glyph") return EnvKind::glyph;
  throw std::invalid_argument("unknown env kind: " + s);
}

std::string to_string(EnvKind k) {
  switch (k) {
    case EnvKind::pendulum: return "pendulum";
    case EnvKind::cartpole: return "cartpole";
    case EnvKind::glyph: return "glyph";
  }
  return "?";
}

void ConfoundingSpec::validate() const {
  auto chk = [](double p, const char* what) {
    if (p < 0.0 || p > 1.0)
      throw std::invalid_argument(std::string("spec: ") + what + " out of [0,1]");
  };
  chk(p_u, "p_u");
  chk(noise_prob, "noise_prob");
  for (double p : p_T1_given_u) chk(p, "p_T1_given_u");
  for (const auto& row : p_R1)
    for (double p : row) chk(p, "mixture_probs");
  if (sigma < 0) throw std::invalid_argument("spec: sigma < 0");
}

nlohmann::json ConfoundingSpec::to_json() const {
  return {{"p_u", p_u},
          {"p_T1_given_u", p_T1_given_u},
          {"p_R1", p_R1},
          {"mu_R1", mu_R1},
          {"mu_R2", mu_R2},
          {"sigma", sigma},
          {"noise_prob", noise_prob}};
}

ConfoundingSpec ConfoundingSpec::from_json(const nlohmann::json& j) {
  ConfoundingSpec s;
  s.p_u = j.value("p_u", s.p_u);
  if (j.contains("p_T1_given_u")) j.at("p_T1_given_u").get_to(s.p_T1_given_u);
  if (j.contains("p_R1")) j.at("p_R1").get_to(s.p_R1);
  s.mu_R1 = j.value("mu_R1", s.mu_R1);
  s.mu_R2 = j.value("mu_R2", s.mu_R2);
  s.sigma = j.value("sigma", s.sigma);
  s.noise_prob = j.value("noise_prob", s.noise_prob);
  s.validate();
  return s;
}

DiscreteCPT ConfoundingSpec::to_cpt() const {
  return DiscreteCPT(
      {1.0 - p_u, p_u},
      {{p_T1_given_u[0], 1.0 - p_T1_given_u[0]},
       {p_T1_given_u[1], 1.0 - p_T1_given_u[1]}},
      {{{p_R1[0][0], 1.0 - p_R1[0][0]}, {p_R1[1][0], 1.0 - p_R1[1][0]}},
       {{p_R1[0][1], 1.0 - p_R1[0][1]}, {p_R1[1][1], 1.0 - p_R1[1][1]}}},
      {mu_R1, mu_R2});
}

double wrap_angle(double a) {
  a = std::fmod(a + M_PI, 2.0 * M_PI);
  if (a < 0) a += 2.0 * M_PI;
  return a - M_PI == -M_PI ? M_PI : a - M_PI;
}

double action_bound(EnvKind k) {
  switch (k) {
    case EnvKind::pendulum: return 2.0;
    case EnvKind::cartpole: return 1.0;
    case EnvKind::glyph: return M_PI / 4.0;
  }
  return 0;
}

double category_boundary(EnvKind k) {
  switch (k) {
    case EnvKind::pendulum: return 1.0;
    case EnvKind::cartpole: return 0.5;
    case EnvKind::glyph: return M_PI / 8.0;
  }
  return 0;
}

int action_category(EnvKind k, double a) {
  return std::abs(a) >= category_boundary(k) ? 0 : 1;
}

StepResult step_pendulum(PendulumState& s, double a) {
  if (std::abs(a) > 2.0 + 1e-12)
    throw std::out_of_range("pendulum: torque " + std::to_string(a) +
                            " outside [-2, 2]");
  constexpr double g = 10.0, m = 1.0, l = 1.0, dt = 0.05;
  const double cost = wrap_angle(s.theta) * wrap_angle(s.theta) +
                      0.1 * s.theta_dot * s.theta_dot + 0.001 * a * a;
  double new_dot = s.theta_dot +
                   (-(3.0 * g / (2.0 * l)) * std::sin(s.theta + M_PI) +
                    (3.0 / (m * l * l)) * a) *
                       dt;
  new_dot = std::clamp(new_dot, -8.0, 8.0);
  s.theta = wrap_angle(s.theta + new_dot * dt);
  s.theta_dot = new_dot;
  return {-cost, false};
}

StepResult step_cartpole(CartpoleState& s, int a) {
  if (a != 0 && a != 1) throw std::out_of_range("cartpole: action must be 0 or 1");
  constexpr double g = 9.8, m_cart = 1.0, m_pole = 0.1, total = m_cart + m_pole;
  constexpr double half_len = 0.5, pml = m_pole * half_len, force_mag = 10.0;
  constexpr double dt = 0.02;
  const double force = a == 1 ? force_mag : -force_mag;
  const double cos_t = std::cos(s.theta), sin_t = std::sin(s.theta);
  const double temp = (force + pml * s.theta_dot * s.theta_dot * sin_t) / total;
  const double theta_acc = (g * sin_t - cos_t * temp) /
                           (half_len * (4.0 / 3.0 - m_pole * cos_t * cos_t / total));
  const double x_acc = temp - pml * theta_acc * cos_t / total;
  s.x += dt * s.x_dot;
  s.x_dot += dt * x_acc;
  s.theta += dt * s.theta_dot;
  s.theta_dot += dt * theta_acc;
  const bool done = std::abs(s.x) > 2.4 || std::abs(s.theta) > 12.0 * M_PI / 180.0;
  return {1.0, done};
}

StepResult step_glyph(GlyphState& s, double a) {
  if (std::abs(a) > M_PI / 4.0 + 1e-12)
    throw std::out_of_range("glyph: rotation " + std::to_string(a) +
                            " outside [-pi/4, pi/4]");
  s.rotation = wrap_angle(s.rotation + a);
  return {-std::abs(s.rotation), false};
}

namespace {

void check_dims(std::size_t H, std::size_t W) {
  if (H < 8 || W < 8) throw std::invalid_argument("render: frame must be >= 8x8");
}

// Distance from pixel center to the segment (x0,y0)-(x1,y1).
double seg_dist(double px, double py, double x0, double y0, double x1, double y1) {
  const double dx = x1 - x0, dy = y1 - y0;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((px - x0) * dx + (py - y0) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double cx = x0 + t * dx, cy = y0 + t * dy;
  return std::hypot(px - cx, py - cy);
}

void draw_segment(Tensor& f, double x0, double y0, double x1, double y1,
                  double thickness) {
  const std::size_t H = f.shape[0], W = f.shape[1];
  for (std::size_t r = 0; r < H; ++r)
    for (std::size_t c = 0; c < W; ++c) {
      const double d = seg_dist(static_cast<double>(c), static_cast<double>(r),
                                x0, y0, x1, y1);
      const double v = std::clamp(1.0 + thickness - d, 0.0, 1.0);
      double& px = f.data[r * W + c];
      px = std::max(px, v);
    }
}

// Eight 8x8 binary stencils, one bitmask row per byte.
constexpr std::array<std::array<std::uint8_t, 8>, 8> kGlyphs = {{
    {0x3c, 0x42, 0x42, 0x42, 0x42, 0x42, 0x42, 0x3c},  // ring
    {0x08, 0x18, 0x08, 0x08, 0x08, 0x08, 0x08, 0x3e},  // one
    {0x3c, 0x42, 0x02, 0x0c, 0x10, 0x20, 0x40, 0x7e},  // two
    {0x7e, 0x02, 0x04, 0x1c, 0x02, 0x02, 0x42, 0x3c},  // three
    {0x04, 0x0c, 0x14, 0x24, 0x44, 0x7e, 0x04, 0x04},  // four
    {0x7e, 0x40, 0x40, 0x7c, 0x02, 0x02, 0x42, 0x3c},  // five
    {0x18, 0x24, 0x42, 0x42, 0x7e, 0x42, 0x42, 0x42},  // A-like
    {0x7e, 0x42, 0x42, 0x42, 0x42, 0x42, 0x42, 0x7e},  // box
}};

double stencil_at(int glyph_id, std::size_t H, std::size_t W, long r, long c) {
  if (r < 0 || c < 0 || r >= static_cast<long>(H) || c >= static_cast<long>(W))
    return 0.0;
  const std::size_t sr = static_cast<std::size_t>(r) * 8 / H;
  const std::size_t sc = static_cast<std::size_t>(c) * 8 / W;
  return (kGlyphs[glyph_id % 8][sr] >> (7 - sc)) & 1u ? 1.0 : 0.0;
}

}  // namespace

Tensor render_pendulum(const PendulumState& s, std::size_t H, std::size_t W) {
  check_dims(H, W);
  Tensor f({H, W});
  const double cx = (W - 1) / 2.0, cy = (H - 1) / 2.0;
  const double len = 0.4 * std::min(H, W);
  // theta = 0 points up; image rows grow downward.
  const double tip_x = cx + len * std::sin(s.theta);
  const double tip_y = cy - len * std::cos(s.theta);
  draw_segment(f, cx, cy, tip_x, tip_y, 0.6);
  return f;
}

Tensor render_cartpole(const CartpoleState& s, std::size_t H, std::size_t W) {
  check_dims(H, W);
  Tensor f({H, W});
  const double cart_y = H - 3.0;
  const double cart_x = (W - 1) / 2.0 + s.x / 2.4 * (W / 2.0 - 2.0);
  draw_segment(f, cart_x - 2.0, cart_y, cart_x + 2.0, cart_y, 0.6);
  const double len = 0.55 * H;
  draw_segment(f, cart_x, cart_y, cart_x + len * std::sin(s.theta),
               cart_y - len * std::cos(s.theta), 0.4);
  return f;
}

Tensor render_glyph(const GlyphState& s, std::size_t H, std::size_t W) {
  check_dims(H, W);
  Tensor f({H, W});
  const double cr = (H - 1) / 2.0, cc = (W - 1) / 2.0;
  const double cos_t = std::cos(-s.rotation), sin_t = std::sin(-s.rotation);
  for (std::size_t r = 0; r < H; ++r)
    for (std::size_t c = 0; c < W; ++c) {
      // Inverse-rotate the pixel into stencil space; nearest neighbor.
      const double dr = r - cr, dc = c - cc;
      const long sr = std::lround(cr + cos_t * dr - sin_t * dc);
      const long sc = std::lround(cc + sin_t * dr + cos_t * dc);
      f.data[r * W + c] = stencil_at(s.glyph_id, H, W, sr, sc);
    }
  return f;
}

Tensor corrupt(const Tensor& frame, RandomStream& rng, double p) {
  Tensor out(frame.shape);
  for (std::size_t i = 0; i < frame.size(); ++i) {
    const double bit = frame.data[i] >= 0.5 ? 1.0 : 0.0;
    out.data[i] = rng.uniform() < p ? 1.0 - bit : bit;
  }
  return out;
}

double confounded_policy(int u, EnvKind kind, const ConfoundingSpec& spec,
                         RandomStream& rng) {
  const bool t1 = rng.bernoulli(spec.p_T1_given_u[u]);
  if (kind == EnvKind::cartpole) return t1 ? 1.0 : 0.0;
  const double lo = t1 ? category_boundary(kind) : 0.0;
  const double hi = t1 ? action_bound(kind) : category_boundary(kind);
  const double mag = rng.uniform(lo, hi);
  return rng.bernoulli(0.5) ? mag : -mag;
}

double confounded_reward(double r_o, double action, int u, EnvKind kind,
                         const ConfoundingSpec& spec, RandomStream& rng) {
  const int cat = kind == EnvKind::cartpole
                      ? (action >= 0.5 ? 0 : 1)
                      : action_category(kind, action);
  const double mu = rng.bernoulli(spec.p_R1[cat][u]) ? spec.mu_R1 : spec.mu_R2;
  return r_o + mu + spec.sigma * rng.normal();
}

Trajectory generate_trajectory(EnvKind kind, const ConfoundingSpec& spec,
                               std::size_t T, std::size_t H, std::size_t W,
                               RandomStream rng) {
  if (T < 3) throw std::invalid_argument("generate: T must be >= 3");
  Trajectory traj;
  traj.u_true = rng.bernoulli(spec.p_u) ? 1 : 0;

  PendulumState pend{wrap_angle(rng.uniform(-M_PI, M_PI)), rng.uniform(-1, 1)};
  CartpoleState cart{rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05),
                     rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05)};
  GlyphState glyph{wrap_angle(rng.uniform(-M_PI / 2, M_PI / 2)),
                   static_cast<int>(rng.index(8))};

  for (std::size_t t = 0; t < T; ++t) {
    Tensor frame;
    switch (kind) {
      case EnvKind::pendulum: frame = render_pendulum(pend, H, W); break;
      case EnvKind::cartpole: frame = render_cartpole(cart, H, W); break;
      case EnvKind::glyph: frame = render_glyph(glyph, H, W); break;
    }
    traj.obs.push_back(corrupt(frame, rng, spec.noise_prob));

    const double a = confounded_policy(traj.u_true, kind, spec, rng);
    StepResult sr;
    switch (kind) {
      case EnvKind::pendulum: sr = step_pendulum(pend, a); break;
      case EnvKind::cartpole:
        sr = step_cartpole(cart, static_cast<int>(a));
        if (sr.done) cart = CartpoleState{};  // restart transparently
        break;
      case EnvKind::glyph: sr = step_glyph(glyph, a); break;
    }
    traj.actions.push_back(a);
    traj.rewards.push_back(
        confounded_reward(sr.r_o, a, traj.u_true, kind, spec, rng));
  }

  // One block of three consecutive 2x2 squares at a fixed random location,
  // applied after noise.
  traj.block_start = static_cast<std::uint16_t>(rng.index(T - 2));
  const std::size_t br = rng.index(H - 1), bc = rng.index(W - 1);
  traj.block_row = static_cast<std::uint16_t>(br);
  traj.block_col = static_cast<std::uint16_t>(bc);
  for (std::size_t t = traj.block_start; t < traj.block_start + 3u; ++t)
    for (std::size_t dr = 0; dr < 2; ++dr)
      for (std::size_t dc = 0; dc < 2; ++dc)
        traj.obs[t].data[(br + dr) * W + bc + dc] = 1.0;
  return traj;
}

std::vector<Trajectory> generate_sequences(EnvKind kind,
                                           const ConfoundingSpec& spec,
                                           std::size_t n, std::size_t T,
                                           std::size_t H, std::size_t W,
                                           std::uint64_t seed) {
  spec.validate();
  RandomStream master(seed);
  std::vector<Trajectory> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(generate_trajectory(kind, spec, T, H, W, master.child(i)));
  return out;
}

}  // namespace drl
