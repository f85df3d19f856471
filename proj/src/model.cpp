#include "drl/model.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace drl {

void ModelConfig::validate() const {
  if (dims.D_z >= dims.D_x())
    throw std::invalid_argument("model: requires D_z < D_x");
  if (dims.T < 1) throw std::invalid_argument("model: T must be >= 1");
  if (!(r_max > r_min)) throw std::invalid_argument("model: r_max <= r_min");
}

nlohmann::json ModelConfig::to_json() const {
  return {{"H", dims.H},
          {"W", dims.W},
          {"D_a", dims.D_a},
          {"D_r", dims.D_r},
          {"D_z", dims.D_z},
          {"D_u", dims.D_u},
          {"T", dims.T},
          {"include_u", include_u},
          {"include_action_likelihood", include_action_likelihood},
          {"action_uses_z", action_uses_z},
          {"bernoulli_u", bernoulli_u},
          {"bernoulli_p", bernoulli_p},
          {"hidden", hidden},
          {"rnn_hidden", rnn_hidden},
          {"conv_layers", conv_layers},
          {"action_bound", action_bound},
          {"r_min", r_min},
          {"r_max", r_max}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.dims.H = j.value("H", c.dims.H);
  c.dims.W = j.value("W", c.dims.W);
  c.dims.D_a = j.value("D_a", c.dims.D_a);
  c.dims.D_r = j.value("D_r", c.dims.D_r);
  c.dims.D_z = j.value("D_z", c.dims.D_z);
  c.dims.D_u = j.value("D_u", c.dims.D_u);
  c.dims.T = j.value("T", c.dims.T);
  c.include_u = j.value("include_u", c.include_u);
  c.include_action_likelihood =
      j.value("include_action_likelihood", c.include_action_likelihood);
  c.action_uses_z = j.value("action_uses_z", c.action_uses_z);
  c.bernoulli_u = j.value("bernoulli_u", c.bernoulli_u);
  c.bernoulli_p = j.value("bernoulli_p", c.bernoulli_p);
  c.hidden = j.value("hidden", c.hidden);
  c.rnn_hidden = j.value("rnn_hidden", c.rnn_hidden);
  c.conv_layers = j.value("conv_layers", c.conv_layers);
  c.action_bound = j.value("action_bound", c.action_bound);
  c.r_min = j.value("r_min", c.r_min);
  c.r_max = j.value("r_max", c.r_max);
  c.validate();
  return c;
}

namespace detail {

void Linear::init(std::size_t in, std::size_t out, RandomStream& rng) {
  W = leaf(rng.normal_tensor({in, out}, 1.0 / std::sqrt(static_cast<double>(in))));
  b = leaf(Tensor({out}));
}

void Linear::collect(const std::string& prefix, std::vector<Param>& out) const {
  out.push_back({prefix + ".W", W});
  out.push_back({prefix + ".b", b});
}

void MlpPair::init(std::size_t in, std::size_t hidden, std::size_t depth,
                   std::size_t out, MeanHead kind, double scale,
                   RandomStream& rng) {
  mean_kind = kind;
  mean_scale = scale;
  trunk.resize(depth);
  std::size_t d = in;
  for (auto& l : trunk) {
    l.init(d, hidden, rng);
    d = hidden;
  }
  head_mean.init(d, out, rng);
  head_var.init(d, out, rng);
}

DiagGaussian MlpPair::operator()(const Var& x) const {
  Var h = x;
  for (const auto& l : trunk) h = tanh_v(l(h));
  Var m = head_mean(h);
  switch (mean_kind) {
    case MeanHead::identity: break;
    case MeanHead::sigmoid: m = sigmoid_v(m); break;
    case MeanHead::tanh_scaled: m = scale(tanh_v(m), mean_scale); break;
  }
  return gaussian_from_heads(m, head_var(h));
}

void MlpPair::collect(const std::string& prefix, std::vector<Param>& out) const {
  for (std::size_t i = 0; i < trunk.size(); ++i)
    trunk[i].collect(prefix + ".trunk" + std::to_string(i), out);
  head_mean.collect(prefix + ".mean", out);
  head_var.collect(prefix + ".var", out);
}

void FrameEncoder::init(std::size_t h, std::size_t w, std::size_t conv_layers,
                        std::size_t out, RandomStream& rng) {
  H = h;
  W = w;
  std::size_t ch = 1, hh = h, ww = w;
  const std::size_t kernels[2] = {5, 3};
  const std::size_t filters[2] = {4, 8};
  for (std::size_t i = 0; i < conv_layers && i < 2; ++i) {
    const std::size_t k = kernels[i];
    if (hh < k + 2 || ww < k + 2) break;  // spatial extent collapsed
    ConvLayer layer;
    const double sd = 1.0 / std::sqrt(static_cast<double>(ch * k * k));
    layer.W = leaf(rng.normal_tensor({filters[i], ch, k, k}, sd));
    layer.b = leaf(Tensor({filters[i]}));
    layer.stride = 2;
    convs.push_back(layer);
    hh = (hh - k) / 2 + 1;
    ww = (ww - k) / 2 + 1;
    ch = filters[i];
  }
  fc.init(ch * hh * ww, out, rng);
}

Var FrameEncoder::operator()(const Var& frames) const {
  Var h = frames;
  if (!convs.empty()) {
    const std::size_t B = frames->value.rows();
    std::size_t hh = H, ww = W;
    h = reshape(h, {B, 1, H, W});
    for (const auto& c : convs) {
      h = tanh_v(conv2d(h, c.W, c.b, c.stride));
      const std::size_t k = c.W->value.shape[2];
      hh = (hh - k) / c.stride + 1;
      ww = (ww - k) / c.stride + 1;
    }
    h = reshape(h, {B, h->value.size() / B});
  }
  return tanh_v(fc(h));
}

void FrameEncoder::collect(const std::string& prefix,
                           std::vector<Param>& out) const {
  for (std::size_t i = 0; i < convs.size(); ++i) {
    out.push_back({prefix + ".conv" + std::to_string(i) + ".W", convs[i].W});
    out.push_back({prefix + ".conv" + std::to_string(i) + ".b", convs[i].b});
  }
  fc.collect(prefix + ".fc", out);
}

void Lstm::init(std::size_t in, std::size_t hidden, RandomStream& rng) {
  hid = hidden;
  gates.init(in + hidden, 4 * hidden, rng);
  // forget-gate bias starts open
  for (std::size_t j = hidden; j < 2 * hidden; ++j) gates.b->value.data[j] = 1.0;
}

std::vector<Var> Lstm::run(const std::vector<Var>& inputs, bool reverse) const {
  const std::size_t T = inputs.size();
  const std::size_t B = inputs.empty() ? 0 : inputs[0]->value.rows();
  Var h = constant(Tensor({B, hid}));
  Var c = constant(Tensor({B, hid}));
  std::vector<Var> states(T);
  for (std::size_t step = 0; step < T; ++step) {
    const std::size_t t = reverse ? T - 1 - step : step;
    Var z = gates(concat_cols(inputs[t], h));
    Var i = sigmoid_v(slice_cols(z, 0, hid));
    Var f = sigmoid_v(slice_cols(z, hid, hid));
    Var g = tanh_v(slice_cols(z, 2 * hid, hid));
    Var o = sigmoid_v(slice_cols(z, 3 * hid, hid));
    c = add(mul(f, c), mul(i, g));
    h = mul(o, tanh_v(c));
    states[t] = h;
  }
  return states;
}

void Lstm::collect(const std::string& prefix, std::vector<Param>& out) const {
  gates.collect(prefix + ".gates", out);
}

void SeqEncoder::init(const ModelConfig& cfg, RandomStream& rng) {
  frame.init(cfg.dims.H, cfg.dims.W, cfg.conv_layers, cfg.hidden, rng);
  emb_a.init(cfg.dims.D_a, cfg.hidden, rng);
  emb_r.init(cfg.dims.D_r, cfg.hidden, rng);
  merge1.init(3 * cfg.hidden, cfg.hidden, rng);
  merge2.init(cfg.hidden, cfg.hidden, rng);
  fwd.init(cfg.hidden, cfg.rnn_hidden, rng);
  bwd.init(cfg.hidden, cfg.rnn_hidden, rng);
}

void SeqEncoder::collect(const std::string& prefix,
                         std::vector<Param>& out) const {
  frame.collect(prefix + ".frame", out);
  emb_a.collect(prefix + ".emb_a", out);
  emb_r.collect(prefix + ".emb_r", out);
  merge1.collect(prefix + ".merge1", out);
  merge2.collect(prefix + ".merge2", out);
  fwd.collect(prefix + ".fwd", out);
  bwd.collect(prefix + ".bwd", out);
}

namespace {
std::vector<Var> seq_features(const SeqEncoder& enc, const ModelBatch& batch) {
  std::vector<Var> feats(batch.T);
  for (std::size_t t = 0; t < batch.T; ++t) {
    Var fx = enc.frame(batch.x[t]);
    Var fa = tanh_v(enc.emb_a(batch.a[t]));
    Var fr = tanh_v(enc.emb_r(batch.r[t]));
    Var merged = concat_cols(concat_cols(fx, fa), fr);
    feats[t] = tanh_v(enc.merge2(tanh_v(enc.merge1(merged))));
  }
  return feats;
}
}  // namespace

}  // namespace detail

using detail::MeanHead;

std::size_t DeconModel::gen_in() const {
  return cfg_.dims.D_z + (cfg_.include_u ? cfg_.dims.D_u : 0);
}

DeconModel::DeconModel(ModelConfig cfg, std::uint64_t init_seed)
    : cfg_(std::move(cfg)) {
  cfg_.validate();
  RandomStream rng(init_seed ^ 0x6d0de5f1u);
  const auto& d = cfg_.dims;
  gen_x_.init(gen_in(), cfg_.hidden, 2, d.D_x(), MeanHead::sigmoid, 1.0, rng);
  const std::size_t a_in =
      cfg_.include_u && !cfg_.action_uses_z ? d.D_u : gen_in();
  gen_a_.init(a_in, cfg_.hidden, 2, d.D_a, MeanHead::tanh_scaled,
              cfg_.action_bound, rng);
  gen_r_.init(gen_in() + d.D_a, cfg_.hidden, 2, d.D_r, MeanHead::sigmoid, 1.0,
              rng);
  gen_z_.init(d.D_z + d.D_a, cfg_.hidden, 2, d.D_z, MeanHead::identity, 1.0, rng);
  if (cfg_.include_u) {
    enc_u_.init(cfg_, rng);
    head_u_mean_.init(2 * cfg_.rnn_hidden, d.D_u, rng);
    head_u_var_.init(2 * cfg_.rnn_hidden, d.D_u, rng);
  }
  enc_z_.init(cfg_, rng);
  comb_z_.init(d.D_z, cfg_.rnn_hidden, rng);
  comb_a_.init(d.D_a, cfg_.rnn_hidden, rng);
  init_z_term_ = leaf(rng.normal_tensor({cfg_.rnn_hidden}, 0.1));
  init_a_term_ = leaf(rng.normal_tensor({cfg_.rnn_hidden}, 0.1));
  head_z_mean_.init(cfg_.rnn_hidden, d.D_z, rng);
  head_z_var_.init(cfg_.rnn_hidden, d.D_z, rng);
  aux_a_enc_.init(d.H, d.W, cfg_.conv_layers, cfg_.hidden, rng);
  aux_a_mean_.init(cfg_.hidden, d.D_a, rng);
  aux_a_var_.init(cfg_.hidden, d.D_a, rng);
  aux_r_enc_.init(d.H, d.W, cfg_.conv_layers, cfg_.hidden, rng);
  aux_r_emb_a_.init(d.D_a, cfg_.hidden, rng);
  aux_r_merge_.init(2 * cfg_.hidden, cfg_.hidden, rng);
  aux_r_mean_.init(cfg_.hidden, d.D_r, rng);
  aux_r_var_.init(cfg_.hidden, d.D_r, rng);
}

std::vector<Param> DeconModel::parameters() const {
  std::vector<Param> out;
  gen_x_.collect("gen_x", out);
  gen_a_.collect("gen_a", out);
  gen_r_.collect("gen_r", out);
  gen_z_.collect("gen_z", out);
  if (cfg_.include_u) {
    enc_u_.collect("enc_u", out);
    head_u_mean_.collect("head_u_mean", out);
    head_u_var_.collect("head_u_var", out);
  }
  enc_z_.collect("enc_z", out);
  comb_z_.collect("comb_z", out);
  comb_a_.collect("comb_a", out);
  out.push_back({"init_z_term", init_z_term_});
  out.push_back({"init_a_term", init_a_term_});
  head_z_mean_.collect("head_z_mean", out);
  head_z_var_.collect("head_z_var", out);
  aux_a_enc_.collect("aux_a_enc", out);
  aux_a_mean_.collect("aux_a_mean", out);
  aux_a_var_.collect("aux_a_var", out);
  aux_r_enc_.collect("aux_r_enc", out);
  aux_r_emb_a_.collect("aux_r_emb_a", out);
  aux_r_merge_.collect("aux_r_merge", out);
  aux_r_mean_.collect("aux_r_mean", out);
  aux_r_var_.collect("aux_r_var", out);
  return out;
}

namespace {
Var maybe_concat_u(const Var& z, const Var& u, bool include_u) {
  return include_u ? concat_cols(z, u) : z;
}
}  // namespace

DiagGaussian DeconModel::gen_x(const Var& z, const Var& u) const {
  return gen_x_(maybe_concat_u(z, u, cfg_.include_u));
}

DiagGaussian DeconModel::gen_a(const Var& z, const Var& u) const {
  if (cfg_.include_u && !cfg_.action_uses_z) return gen_a_(u);
  return gen_a_(maybe_concat_u(z, u, cfg_.include_u));
}

DiagGaussian DeconModel::gen_r(const Var& z, const Var& a, const Var& u) const {
  return gen_r_(maybe_concat_u(concat_cols(z, a), u, cfg_.include_u));
}

DiagGaussian DeconModel::gen_z_transition(const Var& z, const Var& a) const {
  return gen_z_(concat_cols(z, a));
}

DiagGaussian DeconModel::prior_z(std::size_t batch) const {
  return standard_normal(batch, cfg_.dims.D_z);
}

DiagGaussian DeconModel::prior_u(std::size_t batch) const {
  return standard_normal(batch, cfg_.dims.D_u);
}

Tensor DeconModel::sample_u_prior(RandomStream& rng) const {
  Tensor u({1, cfg_.dims.D_u});
  for (auto& v : u.data)
    v = cfg_.bernoulli_u ? (rng.bernoulli(cfg_.bernoulli_p) ? 1.0 : 0.0)
                         : rng.normal();
  return u;
}

DeconModel::Encoding DeconModel::encode(const ModelBatch& batch) const {
  Encoding enc;
  auto z_feats = detail::seq_features(enc_z_, batch);
  enc.h_left = enc_z_.fwd.run(z_feats, false);
  enc.h_right = enc_z_.bwd.run(z_feats, true);
  if (cfg_.include_u) {
    auto u_feats = detail::seq_features(enc_u_, batch);
    auto fw = enc_u_.fwd.run(u_feats, false);
    auto bw = enc_u_.bwd.run(u_feats, true);
    Var summary = concat_cols(fw.back(), bw.front());
    enc.q_u = gaussian_from_heads(head_u_mean_(summary), head_u_var_(summary));
  }
  return enc;
}

DiagGaussian DeconModel::infer_z_step(const Var& z_prev, const Var& a_prev,
                                      const Var& h_left, const Var& h_right,
                                      bool first) const {
  const std::size_t B = h_left->value.rows();
  Var term_z, term_a;
  if (first) {
    Var zeros = constant(Tensor({B, cfg_.rnn_hidden}));
    term_z = add_rowvec(zeros, init_z_term_);
    term_a = add_rowvec(zeros, init_a_term_);
  } else {
    term_z = tanh_v(comb_z_(z_prev));
    term_a = tanh_v(comb_a_(a_prev));
  }
  Var h = scale(add(add(term_z, term_a), add(h_left, h_right)), 0.25);
  return gaussian_from_heads(head_z_mean_(h), head_z_var_(h));
}

DiagGaussian DeconModel::infer_u(const Trajectory& traj) const {
  if (!cfg_.include_u)
    throw std::logic_error("infer_u: model has no confounder");
  auto batch = make_batch({&traj});
  return encode(batch).q_u;
}

DiagGaussian DeconModel::aux_a(const Var& x) const {
  Var h = aux_a_enc_(x);
  return gaussian_from_heads(scale(tanh_v(aux_a_mean_(h)), cfg_.action_bound),
                             aux_a_var_(h));
}

DiagGaussian DeconModel::aux_r(const Var& x, const Var& a) const {
  Var h = concat_cols(aux_r_enc_(x), tanh_v(aux_r_emb_a_(a)));
  h = tanh_v(aux_r_merge_(h));
  return gaussian_from_heads(sigmoid_v(aux_r_mean_(h)), aux_r_var_(h));
}

double DeconModel::norm_reward(double r) const {
  return (r - cfg_.r_min) / (cfg_.r_max - cfg_.r_min);
}

double DeconModel::denorm_reward(double r01) const {
  return cfg_.r_min + r01 * (cfg_.r_max - cfg_.r_min);
}

ModelBatch DeconModel::make_batch(
    const std::vector<const Trajectory*>& trajs) const {
  const auto& d = cfg_.dims;
  ModelBatch b;
  b.B = trajs.size();
  b.T = d.T;
  for (const auto* t : trajs)
    if (t->obs.size() != d.T)
      throw std::invalid_argument("batch: trajectory length " +
                                  std::to_string(t->obs.size()) +
                                  " does not match model T " +
                                  std::to_string(d.T));
  for (std::size_t t = 0; t < d.T; ++t) {
    Tensor x({b.B, d.D_x()}), a({b.B, d.D_a}), r({b.B, d.D_r});
    for (std::size_t i = 0; i < b.B; ++i) {
      const auto& frame = trajs[i]->obs[t];
      if (frame.size() != d.D_x())
        throw std::invalid_argument("batch: frame size mismatch");
      std::copy(frame.data.begin(), frame.data.end(),
                x.data.begin() + i * d.D_x());
      a.data[i] = trajs[i]->actions[t];
      r.data[i] = norm_reward(trajs[i]->rewards[t]);
    }
    b.x.push_back(constant(std::move(x)));
    b.a.push_back(constant(std::move(a)));
    b.r.push_back(constant(std::move(r)));
  }
  return b;
}

namespace {
double check_term(const Var& v, const char* term) {
  double mean = 0;
  for (double x : v->value.data) mean += x;
  mean /= v->value.size();
  if (std::isnan(mean))
    throw std::runtime_error(std::string("elbo: NaN in term ") + term);
  return mean;
}
}  // namespace

DeconModel::ElboResult DeconModel::elbo(const ModelBatch& batch,
                                        RandomStream& rng) const {
  const std::size_t B = batch.B;
  Encoding enc = encode(batch);

  Var recon_x, recon_a, recon_r, kl_z1, kl_zt, kl_u;
  Var u;
  if (cfg_.include_u) {
    u = reparam_sample(enc.q_u, rng);
    kl_u = kl_diag_gaussians_rows(enc.q_u, prior_u(B));
  }

  Var z_prev, a_prev;
  for (std::size_t t = 0; t < batch.T; ++t) {
    DiagGaussian q_z = infer_z_step(z_prev, a_prev, enc.h_left[t],
                                    enc.h_right[t], t == 0);
    Var z = reparam_sample(q_z, rng);
    Var kl_t = t == 0 ? kl_diag_gaussians_rows(q_z, prior_z(B))
                      : kl_diag_gaussians_rows(
                            q_z, gen_z_transition(z_prev, a_prev));
    if (t == 0)
      kl_z1 = kl_t;
    else
      kl_zt = kl_zt ? add(kl_zt, kl_t) : kl_t;

    Var lx = gaussian_logpdf_rows(batch.x[t], gen_x(z, u));
    recon_x = recon_x ? add(recon_x, lx) : lx;
    if (cfg_.include_action_likelihood) {
      Var la = gaussian_logpdf_rows(batch.a[t], gen_a(z, u));
      recon_a = recon_a ? add(recon_a, la) : la;
    }
    Var lr = gaussian_logpdf_rows(batch.r[t], gen_r(z, batch.a[t], u));
    recon_r = recon_r ? add(recon_r, lr) : lr;

    z_prev = z;
    a_prev = batch.a[t];
  }

  ElboResult res;
  auto& bd = res.breakdown;
  bd.recon_x = check_term(recon_x, "recon_x");
  bd.recon_r = check_term(recon_r, "recon_r");
  bd.kl_z1 = check_term(kl_z1, "kl_z1");
  Var rows = sub(add(recon_x, recon_r), kl_z1);
  if (recon_a) {
    bd.recon_a = check_term(recon_a, "recon_a");
    rows = add(rows, recon_a);
  }
  if (kl_zt) {
    bd.kl_z_transitions = check_term(kl_zt, "kl_z_transitions");
    rows = sub(rows, kl_zt);
  }
  if (kl_u) {
    bd.kl_u = check_term(kl_u, "kl_u");
    rows = sub(rows, kl_u);
  }
  res.objective = scale(sum_all(rows), 1.0 / static_cast<double>(B));
  bd.total = res.objective->value.data[0];
  return res;
}

Var DeconModel::loss_drl(const ModelBatch& batch, RandomStream& rng,
                         ElboBreakdown* breakdown) const {
  ElboResult res = elbo(batch, rng);
  Var aux_a_rows, aux_r_rows;
  for (std::size_t t = 0; t < batch.T; ++t) {
    Var la = gaussian_logpdf_rows(batch.a[t], aux_a(batch.x[t]));
    Var lr = gaussian_logpdf_rows(batch.r[t], aux_r(batch.x[t], batch.a[t]));
    aux_a_rows = aux_a_rows ? add(aux_a_rows, la) : la;
    aux_r_rows = aux_r_rows ? add(aux_r_rows, lr) : lr;
  }
  res.breakdown.aux_a = check_term(aux_a_rows, "aux_a");
  res.breakdown.aux_r = check_term(aux_r_rows, "aux_r");
  const double invB = 1.0 / static_cast<double>(batch.B);
  Var aux = scale(sum_all(add(aux_a_rows, aux_r_rows)), invB);
  res.breakdown.total += aux->value.data[0];
  if (breakdown) *breakdown = res.breakdown;
  return neg(add(res.objective, aux));
}

std::vector<Tensor> DeconModel::reconstruct(const Trajectory& traj,
                                            RandomStream& rng) const {
  auto batch = make_batch({&traj});
  Encoding enc = encode(batch);
  Var u = cfg_.include_u ? reparam_sample(enc.q_u, rng) : Var{};
  std::vector<Tensor> out;
  Var z_prev, a_prev;
  for (std::size_t t = 0; t < batch.T; ++t) {
    DiagGaussian q_z = infer_z_step(z_prev, a_prev, enc.h_left[t],
                                    enc.h_right[t], t == 0);
    Var z = reparam_sample(q_z, rng);
    Tensor mean = gen_x(z, u).mean->value;
    mean.shape = {cfg_.dims.H, cfg_.dims.W};
    out.push_back(std::move(mean));
    z_prev = z;
    a_prev = batch.a[t];
  }
  return out;
}

DeconModel::Rollout DeconModel::counterfactual(const Tensor& frame,
                                               std::vector<double> actions,
                                               std::size_t horizon,
                                               RandomStream& rng) const {
  if (horizon < 1)
    throw std::invalid_argument("counterfactual: horizon must be >= 1");
  const auto& d = cfg_.dims;
  if (frame.size() != d.D_x())
    throw std::invalid_argument("counterfactual: frame size mismatch");

  // Step 1: auxiliary estimates of a_t and r_{t+1} from the lone frame.
  Var x = constant(Tensor({1, d.D_x()}, frame.data));
  Rollout roll;
  roll.a_hat = aux_a(x).mean->value.data[0];
  roll.r_hat =
      denorm_reward(aux_r(x, constant(Tensor({1, d.D_a}, roll.a_hat)))
                        .mean->value.data[0]);

  // Step 2: z_t from the inference network on the length-1 evidence.
  ModelBatch ev;
  ev.B = 1;
  ev.T = 1;
  ev.x.push_back(x);
  ev.a.push_back(constant(Tensor({1, d.D_a}, roll.a_hat)));
  ev.r.push_back(constant(Tensor({1, d.D_r}, norm_reward(roll.r_hat))));
  // The rollout propagates distribution means (the point estimates); the
  // rng is only consumed for the uniformly random actions.
  Encoding enc = encode(ev);
  Var z = infer_z_step({}, {}, enc.h_left[0], enc.h_right[0], true).mean;
  Var u = cfg_.include_u ? enc.q_u.mean : Var{};

  // Steps 3-4, repeated to the horizon.
  for (std::size_t h = 0; h < horizon; ++h) {
    const double a = h < actions.size()
                         ? actions[h]
                         : rng.uniform(-cfg_.action_bound, cfg_.action_bound);
    Var av = constant(Tensor({1, d.D_a}, a));
    z = gen_z_transition(z, av).mean;
    Tensor img = gen_x(z, u).mean->value;
    img.shape = {d.H, d.W};
    roll.frames.push_back(std::move(img));
    roll.actions.push_back(a);
    roll.rewards.push_back(denorm_reward(gen_r(z, av, u).mean->value.data[0]));
  }
  return roll;
}

void DeconModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  auto params = parameters();
  nlohmann::json header = {{"format_version", 1}, {"config", cfg_.to_json()}};
  auto& plist = header["params"] = nlohmann::json::array();
  for (const auto& p : params)
    plist.push_back({{"name", p.name}, {"shape", p.var->value.shape}});
  out << header.dump() << '\n';
  for (const auto& p : params)
    out.write(reinterpret_cast<const char*>(p.var->value.data.data()),
              p.var->value.data.size() * sizeof(double));
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

DeconModel DeconModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("checkpoint missing header: " + path);
  auto header = nlohmann::json::parse(line);
  DeconModel model(ModelConfig::from_json(header.at("config")), 0);
  auto params = model.parameters();
  const auto& plist = header.at("params");
  if (plist.size() != params.size())
    throw std::runtime_error("checkpoint parameter list mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (plist[i].at("name") != params[i].name)
      throw std::runtime_error("checkpoint parameter order mismatch at " +
                               params[i].name);
    auto& t = params[i].var->value;
    in.read(reinterpret_cast<char*>(t.data.data()),
            t.data.size() * sizeof(double));
  }
  if (!in) throw std::runtime_error("truncated checkpoint: " + path);
  return model;
}

}  // namespace drl
