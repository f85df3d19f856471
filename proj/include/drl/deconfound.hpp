#pragma once

#include <memory>
#include <optional>
#include <string>

#include "drl/envs.hpp"
#include "drl/model.hpp"

namespace drl {

enum class USource { prior, posterior, exact_enumeration };
std::string to_string(USource s);

struct DoRewardEstimate {
  double mean = 0;
  double std_error = 0;
  std::size_t n_samples = 0;
  USource u_source = USource::prior;
};

// A model that can predict expected reward given (z, a, u) and supply
// confounder draws. The Monte-Carlo do-operator runs against this surface,
// so the same estimator covers learned nets and exact tables.
class RewardModel {
 public:
  virtual ~RewardModel() = default;
  virtual std::size_t u_dim() const = 0;
  virtual double expected_reward(const Tensor& z, double a,
                                 const Tensor& u) const = 0;
  virtual Tensor sample_u_prior(RandomStream& rng) const = 0;
  virtual Tensor sample_u_posterior(const Trajectory& evidence,
                                    RandomStream& rng) const = 0;
  // Finite-u enumeration support: empty when u is continuous.
  virtual std::vector<std::pair<Tensor, double>> enumerate_u() const { return {}; }
};

// Wraps a learned generative model; rewards are Rao-Blackwellized means of
// gen_r, denormalized.
class LearnedRewardModel : public RewardModel {
 public:
  explicit LearnedRewardModel(const DeconModel& model) : model_(model) {}
  std::size_t u_dim() const override { return model_.config().dims.D_u; }
  double expected_reward(const Tensor& z, double a, const Tensor& u) const override;
  Tensor sample_u_prior(RandomStream& rng) const override;
  Tensor sample_u_posterior(const Trajectory& evidence,
                            RandomStream& rng) const override;

 private:
  const DeconModel& model_;
};

// Exact benchmark-table model with a Bernoulli confounder: isolates the
// causal correction from model-fitting error.
class OracleRewardModel : public RewardModel {
 public:
  OracleRewardModel(ConfoundingSpec spec, EnvKind kind)
      : spec_(std::move(spec)), kind_(kind) {}
  std::size_t u_dim() const override { return 1; }
  double expected_reward(const Tensor& z, double a, const Tensor& u) const override;
  Tensor sample_u_prior(RandomStream& rng) const override;
  Tensor sample_u_posterior(const Trajectory& evidence,
                            RandomStream& rng) const override;
  std::vector<std::pair<Tensor, double>> enumerate_u() const override;

  const ConfoundingSpec& spec() const { return spec_; }
  EnvKind kind() const { return kind_; }

 private:
  ConfoundingSpec spec_;
  EnvKind kind_;
};

// Monte-Carlo interventional reward: average of expected
// rewards under N confounder draws.
DoRewardEstimate do_reward_mc(const RewardModel& model, const Tensor& z,
                              double a, std::size_t n, USource source,
                              RandomStream& rng,
                              const Trajectory* evidence = nullptr);

// Exact enumeration over a finite confounder; the test oracle for the
// Monte-Carlo path.
double do_reward_exact(const RewardModel& model, const Tensor& z, double a);

// Conditional (observational) expected reward: the quantity the vanilla
// baseline consumes. For learned models u is marginalized under the
// posterior given evidence (or absent for M_alt); for the oracle it uses
// p(u | category(a)).
double conditional_reward(const RewardModel& model, const Tensor& z, double a,
                          const Trajectory* evidence, std::size_t n,
                          RandomStream& rng);

}  // namespace drl
