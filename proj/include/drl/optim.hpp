#pragma once

#include <string>
#include <vector>

#include "drl/autodiff.hpp"

namespace drl {

struct Param {
  std::string name;
  Var var;
};

// Adam with bias correction and optional global-norm gradient clipping
// (applied before the moment updates).
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8, double clip_norm = 5.0)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), clip_norm_(clip_norm) {}

  void step(const std::vector<Param>& params);

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

 private:
  double lr_, beta1_, beta2_, eps_, clip_norm_;
  long t_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace drl
