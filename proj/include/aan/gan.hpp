#pragma once

#include <string>

#include "aan/layers.hpp"
#include "aan/rng.hpp"
#include "aan/tensor.hpp"

namespace aan {

// Discriminator with an explicit F/C split: layers [0, split_index] form the
// feature map F (the split layer itself is the tanh whose output feeds the
// RBM), the rest form the classifier head C, so D(x) = C(F(x)).
struct DiscriminatorNet {
  Net net;
  int split_index = 0;
  int feature_dim = 0;

  void validate() const;
  // Single pass; the feature activations are captured mid-flight.
  struct ForwardResult {
    Tensor features;  // [N, feature_dim], tanh range
    Tensor logits;    // [N, 1]
  };
  ForwardResult forward(const Tensor& x);
  // Classifier head alone, pure (no cache side effects).
  Tensor classifier_forward(const Tensor& features) const;
};

struct GeneratorNet {
  Net net;
  int input_dim = 0;

  // Accepts tanh-range features or +-1 spin batches [N, input_dim].
  Tensor forward(const Tensor& f);
};

DiscriminatorNet::ForwardResult discriminator_forward(const Tensor& x, DiscriminatorNet& d);
Tensor generator_forward(const Tensor& f, GeneratorNet& g);

enum class BinarizeMode { stochastic, sign };

// Features in (-1,1) to spins. Stochastic mode samples +1 with probability
// (f+1)/2 so the spin mean equals f; sign mode thresholds at zero.
Tensor binarize_features(const Tensor& f, BinarizeMode mode, Rng& rng);

enum class GeneratorLossMode { minimax, nonsaturating };

struct ValueTerms {
  double e_logd_real = 0.0;    // E[log D(x)]
  double e_log1md_fake = 0.0;  // E[log(1 - D(G(f)))]
  double e_logd_fake = 0.0;    // E[log D(G(f))]
};

struct GanLosses {
  double d_loss = 0.0;
  double g_loss = 0.0;
  ValueTerms terms;
  Tensor d_grad_real;  // d(d_loss)/d(real logits)
  Tensor d_grad_fake;  // d(d_loss)/d(fake logits)
  Tensor g_grad_fake;  // d(g_loss)/d(fake logits)
};

GanLosses gan_losses(const Tensor& real_logits, const Tensor& fake_logits, GeneratorLossMode g_mode);

// Generator input source for the plain-GAN baseline.
struct NoiseSource {
  enum class Kind { uniform, spin };
  int dim = 0;
  Kind kind = Kind::uniform;

  Tensor sample(int n, Rng& rng) const;
};

// Architecture presets. `feature_dim` is the F/C boundary width (the RBM's
// visible dimension). `stride_literal` builds the stride = filter-width
// variant of the conv stacks instead of the overlapping stride-2 default.
struct ArchPreset {
  std::string name;          // toy2d | mnist-small | celeba-paper
  int feature_dim = 64;
  bool stride_literal = false;
  double leak = 0.2;
};

DiscriminatorNet make_discriminator(const ArchPreset& preset, Rng& rng);
GeneratorNet make_generator(const ArchPreset& preset, Rng& rng);
std::vector<int> preset_sample_shape(const ArchPreset& preset);  // per-sample, no batch dim

}  // namespace aan
