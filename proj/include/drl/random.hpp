#pragma once

#include <cstdint>
#include <cmath>

#include "drl/tensor.hpp"

namespace drl {

// Deterministic random stream: splitmix64-seeded xoshiro-style core with a
// hand-rolled Box-Muller so draws are bit-identical across standard
// libraries and platforms.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed = 0) : state_(seed) { next_u64(); }

  // Independent child stream, e.g. one per dataset sequence.
  RandomStream child(std::uint64_t index) const {
    return RandomStream(mix(state_ ^ (0x9e3779b97f4a7c15ULL * (index + 1))));
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  Tensor normal_tensor(std::vector<std::size_t> shape, double std_dev = 1.0) {
    Tensor t(std::move(shape));
    for (auto& v : t.data) v = std_dev * normal();
    return t;
  }

  std::size_t index(std::size_t n) { return static_cast<std::size_t>(next_u64() % n); }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace drl
