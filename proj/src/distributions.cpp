#include "drl/distributions.hpp"

#include <cmath>

namespace drl {

namespace {
const double kLog2Pi = std::log(2.0 * M_PI);
}

Var gaussian_logpdf_rows(const Var& x, const DiagGaussian& g) {
  if (!x->value.same_shape(g.mean->value))
    throw ShapeError("gaussian_logpdf: shape mismatch " +
                     shape_str(x->value.shape) + " vs " +
                     shape_str(g.mean->value.shape));
  // sum_j [ -1/2 log(2 pi var_j) - (x_j - mu_j)^2 / (2 var_j) ]
  Var diff = sub(x, g.mean);
  Var quad = mul(square_v(diff), exp_v(neg(log_v(g.var))));
  Var logdet = add_scalar(log_v(g.var), kLog2Pi);
  return scale(rowsum(add(logdet, quad)), -0.5);
}

Var gaussian_logpdf(const Var& x, const DiagGaussian& g) {
  return sum_all(gaussian_logpdf_rows(x, g));
}

Var kl_diag_gaussians_rows(const DiagGaussian& q, const DiagGaussian& p) {
  if (!q.mean->value.same_shape(p.mean->value))
    throw ShapeError("kl_diag_gaussians: shape mismatch " +
                     shape_str(q.mean->value.shape) + " vs " +
                     shape_str(p.mean->value.shape));
  // sum_j [ 1/2 log(var_p/var_q) + (var_q + (mu_q - mu_p)^2) / (2 var_p) - 1/2 ]
  Var log_ratio = sub(log_v(p.var), log_v(q.var));
  Var num = add(q.var, square_v(sub(q.mean, p.mean)));
  Var frac = mul(num, exp_v(neg(log_v(p.var))));
  Var per_dim = add_scalar(add(log_ratio, frac), -1.0);
  return scale(rowsum(per_dim), 0.5);
}

Var kl_diag_gaussians(const DiagGaussian& q, const DiagGaussian& p) {
  return sum_all(kl_diag_gaussians_rows(q, p));
}

Var reparam_sample(const DiagGaussian& g, RandomStream& rng) {
  Var eps = constant(rng.normal_tensor(g.mean->value.shape));
  return add(g.mean, mul(sqrt_v(g.var), eps));
}

}  // namespace drl
