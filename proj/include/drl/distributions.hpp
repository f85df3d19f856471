#pragma once

#include "drl/autodiff.hpp"
#include "drl/random.hpp"

namespace drl {

inline constexpr double kVarFloor = 1e-8;

// Diagonal Gaussian over the columns of a (batch x dim) pair of tensors.
// Variances are produced through softplus heads and floored at kVarFloor,
// so every entry is strictly positive by construction.
struct DiagGaussian {
  Var mean;
  Var var;

  std::size_t batch() const { return mean->value.rows(); }
  std::size_t dim() const { return mean->value.cols(); }
};

// Builds a DiagGaussian from a raw (pre-softplus) variance head.
inline DiagGaussian gaussian_from_heads(Var mean, const Var& var_raw) {
  return {std::move(mean), add_scalar(softplus_v(var_raw), kVarFloor)};
}

inline DiagGaussian standard_normal(std::size_t batch, std::size_t dim) {
  return {constant(Tensor({batch, dim}, 0.0)), constant(Tensor({batch, dim}, 1.0))};
}

// Per-row log N(x | mean, var): shape (batch).
Var gaussian_logpdf_rows(const Var& x, const DiagGaussian& g);
// Batch-summed scalar variant.
Var gaussian_logpdf(const Var& x, const DiagGaussian& g);

// Per-row KL(q || p) between diagonal Gaussians: shape (batch).
Var kl_diag_gaussians_rows(const DiagGaussian& q, const DiagGaussian& p);
Var kl_diag_gaussians(const DiagGaussian& q, const DiagGaussian& p);

// mean + sqrt(var) * eps, eps ~ N(0, I) from rng. Gradients flow to mean
// and var only.
Var reparam_sample(const DiagGaussian& g, RandomStream& rng);

}  // namespace drl
