#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "drl/autodiff.hpp"
#include "drl/optim.hpp"

namespace testutil {

// Central finite differences against the analytic gradient of a scalar
// loss. `loss_fn` must rebuild the graph from the current leaf values on
// every call (common random numbers are the caller's responsibility).
// Returns the worst relative error over all checked entries.
inline double grad_check(const std::vector<drl::Var>& leaves,
                         const std::function<double()>& loss_fn,
                         const std::function<void()>& backward_fn,
                         double h = 1e-5) {
  drl::zero_grad(leaves);
  backward_fn();
  double worst = 0.0;
  for (const auto& leaf : leaves) {
    for (std::size_t i = 0; i < leaf->value.size(); ++i) {
      const double saved = leaf->value.data[i];
      leaf->value.data[i] = saved + h;
      const double up = loss_fn();
      leaf->value.data[i] = saved - h;
      const double down = loss_fn();
      leaf->value.data[i] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double an = leaf->grad.data.empty() ? 0.0 : leaf->grad.data[i];
      const double denom = std::max({std::fabs(fd), std::fabs(an), 1e-8});
      worst = std::max(worst, std::fabs(fd - an) / denom);
    }
  }
  return worst;
}

}  // namespace testutil
