#include "drl/deconfound.hpp"

#include <cmath>
#include <stdexcept>

namespace drl {

std::string to_string(USource s) {
  switch (s) {
    case USource::prior: return "prior";
    case USource::posterior: return "posterior";
    case USource::exact_enumeration: return "exact-enumeration";
  }
  return "?";
}

double LearnedRewardModel::expected_reward(const Tensor& z, double a,
                                           const Tensor& u) const {
  Var zv = constant(Tensor({1, z.size()}, z.data));
  Var av = constant(Tensor({1, 1}, a));
  Var uv = constant(Tensor({1, u.size()}, u.data));
  return model_.denorm_reward(model_.gen_r(zv, av, uv).mean->value.data[0]);
}

Tensor LearnedRewardModel::sample_u_prior(RandomStream& rng) const {
  return model_.sample_u_prior(rng);
}

Tensor LearnedRewardModel::sample_u_posterior(const Trajectory& evidence,
                                              RandomStream& rng) const {
  DiagGaussian q = model_.infer_u(evidence);
  Tensor out({1, q.dim()});
  for (std::size_t j = 0; j < q.dim(); ++j)
    out.data[j] = q.mean->value.data[j] +
                  std::sqrt(q.var->value.data[j]) * rng.normal();
  return out;
}

double OracleRewardModel::expected_reward(const Tensor&, double a,
                                          const Tensor& u) const {
  const int cat = kind_ == EnvKind::cartpole ? (a >= 0.5 ? 0 : 1)
                                             : action_category(kind_, a);
  return spec_.expected_rc(cat, u.data[0] >= 0.5 ? 1 : 0);
}

Tensor OracleRewardModel::sample_u_prior(RandomStream& rng) const {
  return Tensor({1}, {rng.bernoulli(spec_.p_u) ? 1.0 : 0.0});
}

Tensor OracleRewardModel::sample_u_posterior(const Trajectory& evidence,
                                             RandomStream&) const {
  // Ground-truth bit is recorded with every oracle trajectory.
  return Tensor({1}, {static_cast<double>(evidence.u_true)});
}

std::vector<std::pair<Tensor, double>> OracleRewardModel::enumerate_u() const {
  return {{Tensor({1}, {0.0}), 1.0 - spec_.p_u}, {Tensor({1}, {1.0}), spec_.p_u}};
}

DoRewardEstimate do_reward_mc(const RewardModel& model, const Tensor& z,
                              double a, std::size_t n, USource source,
                              RandomStream& rng, const Trajectory* evidence) {
  if (n < 1) throw std::invalid_argument("do_reward_mc: N must be >= 1");
  if (source == USource::posterior && evidence == nullptr)
    throw std::invalid_argument(
        "do_reward_mc: posterior u-source requires an evidence sequence");
  if (source == USource::exact_enumeration)
    return {do_reward_exact(model, z, a), 0.0, 1, source};

  double sum = 0, sum_sq = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Tensor u = source == USource::prior ? model.sample_u_prior(rng)
                                        : model.sample_u_posterior(*evidence, rng);
    const double r = model.expected_reward(z, a, u);
    sum += r;
    sum_sq += r * r;
  }
  DoRewardEstimate est;
  est.mean = sum / n;
  est.n_samples = n;
  est.u_source = source;
  if (n > 1) {
    const double var = std::max(0.0, (sum_sq - n * est.mean * est.mean) / (n - 1));
    est.std_error = std::sqrt(var / n);
  }
  return est;
}

double do_reward_exact(const RewardModel& model, const Tensor& z, double a) {
  auto support = model.enumerate_u();
  if (support.empty())
    throw std::domain_error("do_reward_exact: confounder space is not finite");
  double e = 0;
  for (const auto& [u, p] : support) e += p * model.expected_reward(z, a, u);
  return e;
}

double conditional_reward(const RewardModel& model, const Tensor& z, double a,
                          const Trajectory* evidence, std::size_t n,
                          RandomStream& rng) {
  if (const auto* oracle = dynamic_cast<const OracleRewardModel*>(&model)) {
    // p(u | category) by Bayes over the table, then the mixture mean.
    const auto& spec = oracle->spec();
    const int cat = oracle->kind() == EnvKind::cartpole
                        ? (a >= 0.5 ? 0 : 1)
                        : action_category(oracle->kind(), a);
    const double p_cat_u0 =
        cat == 0 ? spec.p_T1_given_u[0] : 1.0 - spec.p_T1_given_u[0];
    const double p_cat_u1 =
        cat == 0 ? spec.p_T1_given_u[1] : 1.0 - spec.p_T1_given_u[1];
    const double joint0 = p_cat_u0 * (1.0 - spec.p_u);
    const double joint1 = p_cat_u1 * spec.p_u;
    if (joint0 + joint1 <= 0.0)
      throw std::domain_error("conditional_reward: action never observed");
    const double w1 = joint1 / (joint0 + joint1);
    return (1.0 - w1) * spec.expected_rc(cat, 0) + w1 * spec.expected_rc(cat, 1);
  }
  if (evidence == nullptr) {
    // M_alt path: no u to marginalize.
    Tensor empty({0});
    return model.expected_reward(z, a, empty);
  }
  double sum = 0;
  for (std::size_t i = 0; i < n; ++i)
    sum += model.expected_reward(z, a, model.sample_u_posterior(*evidence, rng));
  return sum / n;
}

}  // namespace drl
