#include "drl/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace drl {

void Adam::step(const std::vector<Param>& params) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.var->value.shape);
      v_.emplace_back(p.var->value.shape);
    }
  }
  if (m_.size() != params.size())
    throw std::runtime_error("adam: parameter group size changed");

  double sq_norm = 0.0;
  for (const auto& p : params) {
    if (p.var->grad.size() != p.var->value.size()) continue;  // no grad yet
    for (double g : p.var->grad.data) {
      if (std::isnan(g))
        throw std::runtime_error("adam: NaN gradient in parameter " + p.name);
      sq_norm += g * g;
    }
  }
  const double norm = std::sqrt(sq_norm);
  const double clip = (clip_norm_ > 0 && norm > clip_norm_) ? clip_norm_ / norm : 1.0;

  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i].var;
    if (p.grad.size() != p.value.size()) continue;
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double g = clip * p.grad.data[j];
      m_[i].data[j] = beta1_ * m_[i].data[j] + (1.0 - beta1_) * g;
      v_[i].data[j] = beta2_ * v_[i].data[j] + (1.0 - beta2_) * g * g;
      const double mhat = m_[i].data[j] / bc1;
      const double vhat = v_[i].data[j] / bc2;
      p.value.data[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

}  // namespace drl
