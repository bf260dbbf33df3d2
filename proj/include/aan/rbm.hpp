#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "aan/rng.hpp"
#include "aan/tensor.hpp"

namespace aan {

// Ising-spin RBM parameters: interaction matrix w [n_v, n_h], visible bias b
// [n_v], hidden bias c [n_h]. Spin states take values in {-1, +1}.
struct RbmParams {
  int n_v = 0;
  int n_h = 0;
  Tensor w;
  Tensor b;
  Tensor c;

  RbmParams() = default;
  RbmParams(int n_v_, int n_h_);
  static RbmParams init(int n_v, int n_h, double weight_std, Rng& rng);

  std::vector<Tensor*> param_list() { return {&w, &b, &c}; }
};

// Spin batches are [rows, dim] tensors whose entries are exactly -1 or +1.
void require_spins(const Tensor& t, const char* what);

// E(v,h) = 1/2 sum_i v_i^2 - sum_ij v_i h_j w_ij - sum_i v_i b_i - sum_j h_j c_j.
// The quadratic term is constant (n_v/2) on spin inputs; it is kept for
// fidelity to the model definition and cancels from every conditional.
double energy(std::span<const double> v, std::span<const double> h, const RbmParams& p);

// Pre-sigmoid fields: hidden_j = c_j + sum_i w_ij v_i, visible_i = b_i + sum_j w_ij h_j.
std::vector<double> hidden_field(std::span<const double> v, const RbmParams& p);
std::vector<double> visible_field(std::span<const double> h, const RbmParams& p);

// P(unit = +1 | other layer) = sigmoid(2 * field), so E[unit] = tanh(field).
std::vector<double> hidden_conditional(std::span<const double> v, const RbmParams& p);
std::vector<double> visible_conditional(std::span<const double> h, const RbmParams& p);

// Batched conditionals; input [N, n_v] or [N, n_h] spins.
Tensor hidden_conditional_batch(const Tensor& v, const RbmParams& p);
Tensor visible_conditional_batch(const Tensor& h, const RbmParams& p);
Tensor hidden_mean_batch(const Tensor& v, const RbmParams& p);   // tanh(field)
Tensor visible_mean_batch(const Tensor& h, const RbmParams& p);  // tanh(field)

// Each probability drives one spin: +1 with probability p[i], else -1.
Tensor sample_spins(const Tensor& probabilities, Rng& rng);

// Alternating-chain state. One step = sample h|v, then v|h.
struct GibbsChainState {
  Tensor v;  // [N, n_v] spins
  Tensor h;  // [N, n_h] spins
  std::int64_t steps_taken = 0;
  Rng rng;

  static GibbsChainState from_visible(const Tensor& v0, const RbmParams& p, Rng rng);
};

void gibbs_step(GibbsChainState& state, const RbmParams& p);

// Log-likelihood gradient split into its data-driven and model-driven parts;
// the learning signal is positive minus negative.
struct RbmGradients {
  Tensor pos_w, pos_b, pos_c;
  Tensor neg_w, neg_b, neg_c;

  explicit RbmGradients(const RbmParams& p);
  Tensor total_w() const;
  Tensor total_b() const;
  Tensor total_c() const;
};

struct CdResult {
  RbmGradients grads;
  Tensor negative_spins;         // [N, n_v], chain state after k steps
  Tensor negative_visible_mean;  // tanh fields that produced those spins
};

// CD-k: positive phase from the clamped data batch with hidden expectations,
// negative phase from the k-step chain started at the data.
CdResult cd_k_update(const Tensor& data, const RbmParams& p, int k, Rng& rng);

// Exact enumeration oracles, feasible only on tiny instances.
inline constexpr int kMaxEnumTotalUnits = 24;  // exact_partition: n_v + n_h
inline constexpr int kMaxEnumLayerUnits = 20;  // per-layer enumeration bound

double exact_partition(const RbmParams& p);                             // log Z
double free_energy(std::span<const double> v, const RbmParams& p);      // log sum_h e^{-E}
double exact_log_likelihood(const RbmParams& p, const Tensor& data);    // mean log P(v)
RbmGradients exact_gradient_oracle(const RbmParams& p, const Tensor& data);

// Spin vector for configuration index `bits`: bit i set -> +1, else -1.
std::vector<double> spins_from_bits(std::uint64_t bits, int n);

}  // namespace aan
