#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "anmd/tensor.hpp"

namespace anmd {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig cfg;
  std::vector<Tensor4> m;
  std::vector<Tensor4> v;
  std::int64_t step = 0;

  // Moment shapes mirror the registered parameter shapes.
  static AdamState init(const std::vector<Tensor4*>& params, const AdamConfig& cfg);
};

// One bias-corrected Adam update; params and grads are registry-aligned.
void adam_step(const std::vector<Tensor4*>& params, const std::vector<const Tensor4*>& grads,
               AdamState& state);

}  // namespace anmd
