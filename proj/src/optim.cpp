#include "aan/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace aan {

namespace {

void check_lists(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
                 std::size_t state_n, const char* op) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument(std::string(op) + ": " + std::to_string(params.size()) + " params vs " +
                                std::to_string(grads.size()) + " grads");
  }
  if (params.size() != state_n) {
    throw std::invalid_argument(std::string(op) + ": optimizer state holds " + std::to_string(state_n) +
                                " buffers for " + std::to_string(params.size()) + " params");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(*grads[i])) {
      throw std::invalid_argument(std::string(op) + ": param " + std::to_string(i) + " shape " +
                                  params[i]->shape_str() + " vs grad " + grads[i]->shape_str());
    }
    require_finite(*grads[i], op);
  }
}

}  // namespace

void AdamState::init_like(const std::vector<Tensor*>& params) {
  m.clear();
  v.clear();
  for (const Tensor* p : params) {
    m.emplace_back(p->shape);
    v.emplace_back(p->shape);
  }
  step_count = 0;
}

void MomentumState::init_like(const std::vector<Tensor*>& params) {
  velocity.clear();
  for (const Tensor* p : params) velocity.emplace_back(p->shape);
}

void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads, AdamState& state) {
  if (!state.initialized()) state.init_like(params);
  check_lists(params, grads, state.m.size(), "adam_step");
  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    for (std::int64_t e = 0; e < p.numel(); ++e) {
      m[e] = state.beta1 * m[e] + (1.0 - state.beta1) * g[e];
      v[e] = state.beta2 * v[e] + (1.0 - state.beta2) * g[e] * g[e];
      const double mhat = m[e] / bc1;
      const double vhat = v[e] / bc2;
      p[e] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

void sgd_momentum_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
                       MomentumState& state) {
  if (!state.initialized()) state.init_like(params);
  check_lists(params, grads, state.velocity.size(), "sgd_momentum_step");
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    Tensor& vel = state.velocity[i];
    for (std::int64_t e = 0; e < p.numel(); ++e) {
      vel[e] = state.momentum * vel[e] - state.lr * g[e];
      p[e] += vel[e];
    }
  }
}

}  // namespace aan
