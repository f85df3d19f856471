#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "drl/dataset.hpp"
#include "drl/distributions.hpp"
#include "drl/optim.hpp"

namespace drl {

struct ModelDims {
  std::size_t H = 16, W = 16;
  std::size_t D_a = 1, D_r = 1, D_z = 16, D_u = 2, T = 5;
  std::size_t D_x() const { return H * W; }
};

struct ModelConfig {
  ModelDims dims;
  bool include_u = true;                // M_decon vs M_alt
  bool include_action_likelihood = true;
  // When false, the action head conditions on u alone. The bundled
  // generators draw actions from a behavior policy that depends only on the
  // confounder, so the z input is unnecessary there and lets the per-step
  // state absorb action statistics that belong to u. Ignored (z is always
  // used) when include_u is false, since the head needs some input.
  bool action_uses_z = true;
  bool bernoulli_u = false;             // prior draws only, for do-rewards
  double bernoulli_p = 0.5;
  std::size_t hidden = 64;
  std::size_t rnn_hidden = 32;
  std::size_t conv_layers = 2;          // 0 falls back to a dense encoder
  double action_bound = 2.0;
  double r_min = 0.0, r_max = 1.0;      // reward normalization constants

  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

struct ElboBreakdown {
  double recon_x = 0, recon_a = 0, recon_r = 0;
  double kl_u = 0, kl_z1 = 0, kl_z_transitions = 0;
  double aux_a = 0, aux_r = 0;
  double total = 0;
};

namespace detail {

struct Linear {
  Var W, b;
  void init(std::size_t in, std::size_t out, RandomStream& rng);
  Var operator()(const Var& x) const { return add_rowvec(matmul(x, W), b); }
  void collect(const std::string& prefix, std::vector<Param>& out) const;
};

enum class MeanHead { identity, sigmoid, tanh_scaled };

// Trunk shared by a (mean, variance) head pair; the heads differ only in
// their final projection.
struct MlpPair {
  std::vector<Linear> trunk;
  Linear head_mean, head_var;
  MeanHead mean_kind = MeanHead::identity;
  double mean_scale = 1.0;

  void init(std::size_t in, std::size_t hidden, std::size_t depth,
            std::size_t out, MeanHead kind, double scale, RandomStream& rng);
  DiagGaussian operator()(const Var& x) const;
  void collect(const std::string& prefix, std::vector<Param>& out) const;
};

struct ConvLayer {
  Var W, b;
  std::size_t stride = 2;
};

// Frame encoder: conv stack (or dense fallback) ending in a feature vector.
struct FrameEncoder {
  std::vector<ConvLayer> convs;
  Linear fc;
  std::size_t H = 0, W = 0;

  void init(std::size_t H, std::size_t W, std::size_t conv_layers,
            std::size_t out, RandomStream& rng);
  Var operator()(const Var& frames) const;  // (B, H*W) -> (B, out)
  void collect(const std::string& prefix, std::vector<Param>& out) const;
};

struct Lstm {
  Linear gates;  // (in + hid) -> 4 * hid
  std::size_t hid = 0;

  void init(std::size_t in, std::size_t hidden, RandomStream& rng);
  // Hidden state per step; reverse=true runs right-to-left but returns
  // states aligned to input positions.
  std::vector<Var> run(const std::vector<Var>& inputs, bool reverse) const;
  void collect(const std::string& prefix, std::vector<Param>& out) const;
};

// Per-frame feature trunk feeding a bidirectional LSTM.
struct SeqEncoder {
  FrameEncoder frame;
  Linear emb_a, emb_r, merge1, merge2;
  Lstm fwd, bwd;

  void init(const ModelConfig& cfg, RandomStream& rng);
  void collect(const std::string& prefix, std::vector<Param>& out) const;
};

}  // namespace detail

// Mini-batch view of trajectories: per-step (B, dim) tensors, rewards
// already normalized to [0, 1].
struct ModelBatch {
  std::vector<Var> x, a, r;
  std::size_t B = 0, T = 0;
};

class DeconModel {
 public:
  DeconModel(ModelConfig cfg, std::uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }
  std::vector<Param> parameters() const;

  // Generative heads (Gaussians; gen_x mean through sigmoid, gen_a tanh
  // scaled to the action bound, gen_r sigmoid over normalized rewards).
  DiagGaussian gen_x(const Var& z, const Var& u) const;
  DiagGaussian gen_a(const Var& z, const Var& u) const;
  DiagGaussian gen_r(const Var& z, const Var& a, const Var& u) const;
  DiagGaussian gen_z_transition(const Var& z, const Var& a) const;
  DiagGaussian prior_z(std::size_t batch) const;
  DiagGaussian prior_u(std::size_t batch) const;
  Tensor sample_u_prior(RandomStream& rng) const;  // honors bernoulli_u

  struct Encoding {
    DiagGaussian q_u;                     // batch x D_u (empty for M_alt)
    std::vector<Var> h_left, h_right;     // per step, batch x rnn_hidden
  };
  Encoding encode(const ModelBatch& batch) const;

  // Recurrent combiner: mean of four rnn_hidden-sized terms, with learned
  // initial embeddings replacing the z and a terms at t = 1.
  DiagGaussian infer_z_step(const Var& z_prev, const Var& a_prev,
                            const Var& h_left, const Var& h_right,
                            bool first) const;
  DiagGaussian infer_u(const Trajectory& traj) const;

  DiagGaussian aux_a(const Var& x) const;
  DiagGaussian aux_r(const Var& x, const Var& a) const;

  ModelBatch make_batch(const std::vector<const Trajectory*>& trajs) const;

  struct ElboResult {
    Var objective;  // the ELBO itself (maximize)
    ElboBreakdown breakdown;
  };
  // Single-sample reparameterized estimator, ancestral through
  // infer_z_step; KL terms in closed form; batch mean.
  ElboResult elbo(const ModelBatch& batch, RandomStream& rng) const;
  // -(elbo + per-step auxiliary log-densities).
  Var loss_drl(const ModelBatch& batch, RandomStream& rng,
               ElboBreakdown* breakdown = nullptr) const;

  std::vector<Tensor> reconstruct(const Trajectory& traj, RandomStream& rng) const;

  struct Rollout {
    std::vector<Tensor> frames;
    std::vector<double> actions;
    std::vector<double> rewards;
    double a_hat = 0, r_hat = 0;  // step-1 auxiliary estimates
  };
  // Four-step counterfactual procedure from a single unseen frame. Actions
  // beyond those supplied are drawn uniformly.
  Rollout counterfactual(const Tensor& frame, std::vector<double> actions,
                         std::size_t horizon, RandomStream& rng) const;

  double norm_reward(double r) const;
  double denorm_reward(double r01) const;

  void save(const std::string& path) const;
  static DeconModel load(const std::string& path);

 private:
  std::size_t gen_in() const;  // D_z (+ D_u)

  ModelConfig cfg_;
  detail::MlpPair gen_x_, gen_a_, gen_r_, gen_z_;
  detail::SeqEncoder enc_u_, enc_z_;
  detail::Linear head_u_mean_, head_u_var_;
  detail::Linear comb_z_, comb_a_;           // combiner projections
  Var init_z_term_, init_a_term_;            // learned t=1 embeddings
  detail::Linear head_z_mean_, head_z_var_;
  detail::FrameEncoder aux_a_enc_;
  detail::Linear aux_a_mean_, aux_a_var_;
  detail::FrameEncoder aux_r_enc_;
  detail::Linear aux_r_emb_a_, aux_r_merge_, aux_r_mean_, aux_r_var_;
};

}  // namespace drl
