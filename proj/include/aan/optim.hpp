#pragma once

#include <cstdint>
#include <vector>

#include "aan/tensor.hpp"

namespace aan {

// Bias-corrected Adam over a fixed list of parameter tensors.
struct AdamState {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step_count = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  void init_like(const std::vector<Tensor*>& params);
  bool initialized() const { return !m.empty(); }
};

// Heavy-ball SGD: v <- mu*v - lr*g, p <- p + v.
struct MomentumState {
  double lr = 0.001;
  double momentum = 0.8;
  std::vector<Tensor> velocity;

  void init_like(const std::vector<Tensor*>& params);
  bool initialized() const { return !velocity.empty(); }
};

// Both steps descend the given gradients and reject non-finite gradients
// before touching any state, so a failed step leaves params unchanged.
void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads, AdamState& state);
void sgd_momentum_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
                       MomentumState& state);

}  // namespace aan
