#include "aan/gan.hpp"

#include <cmath>
#include <stdexcept>

#include "aan/loss.hpp"

namespace aan {

void DiscriminatorNet::validate() const {
  if (net.layers.empty()) throw std::invalid_argument("DiscriminatorNet: empty layer list");
  if (split_index < 0 || split_index >= static_cast<int>(net.layers.size()) - 1) {
    throw std::invalid_argument("DiscriminatorNet: split index " + std::to_string(split_index) +
                                " leaves no classifier head");
  }
  const Layer& split = net.layers[static_cast<std::size_t>(split_index)];
  if (split.kind != LayerKind::activation || split.act != ActKind::tanh) {
    throw std::invalid_argument("DiscriminatorNet: split layer must be a tanh activation");
  }
  if (feature_dim < 1) throw std::invalid_argument("DiscriminatorNet: feature_dim must be positive");
}

DiscriminatorNet::ForwardResult DiscriminatorNet::forward(const Tensor& x) {
  ForwardResult r;
  r.logits = net.forward_captured(x, split_index, &r.features);
  const int n = x.dim(0);
  require_shape(r.features, {n, feature_dim}, "discriminator feature layer");
  require_shape(r.logits, {n, 1}, "discriminator logit layer");
  return r;
}

Tensor DiscriminatorNet::classifier_forward(const Tensor& features) const {
  return net.forward_range(features, static_cast<std::size_t>(split_index) + 1, net.layers.size());
}

DiscriminatorNet::ForwardResult discriminator_forward(const Tensor& x, DiscriminatorNet& d) {
  return d.forward(x);
}

Tensor GeneratorNet::forward(const Tensor& f) {
  if (f.ndim() != 2 || f.dim(1) != input_dim) {
    throw std::invalid_argument("generator_forward: expected [N, " + std::to_string(input_dim) + "], got " +
                                f.shape_str());
  }
  for (double v : f.data) {
    if (!(v >= -1.0 && v <= 1.0)) {
      throw std::invalid_argument("generator_forward: input value " + std::to_string(v) + " outside [-1, 1]");
    }
  }
  return net.forward(f);
}

Tensor generator_forward(const Tensor& f, GeneratorNet& g) { return g.forward(f); }

Tensor binarize_features(const Tensor& f, BinarizeMode mode, Rng& rng) {
  Tensor spins(f.shape);
  for (std::int64_t i = 0; i < f.numel(); ++i) {
    const double x = f[i];
    if (!(x >= -1.0 && x <= 1.0)) {
      throw std::invalid_argument("binarize_features: value " + std::to_string(x) + " outside [-1, 1]");
    }
    if (mode == BinarizeMode::stochastic) {
      spins[i] = rng.uniform() < (x + 1.0) / 2.0 ? 1.0 : -1.0;
    } else {
      spins[i] = x >= 0.0 ? 1.0 : -1.0;
    }
  }
  return spins;
}

GanLosses gan_losses(const Tensor& real_logits, const Tensor& fake_logits, GeneratorLossMode g_mode) {
  require_finite(real_logits, "gan_losses real logits");
  require_finite(fake_logits, "gan_losses fake logits");
  if (real_logits.numel() == 0 || fake_logits.numel() == 0) {
    throw std::invalid_argument("gan_losses: empty logit batch");
  }
  GanLosses out;
  const double nr = static_cast<double>(real_logits.numel());
  const double nf = static_cast<double>(fake_logits.numel());

  out.d_grad_real = Tensor(real_logits.shape);
  for (std::int64_t i = 0; i < real_logits.numel(); ++i) {
    const double l = real_logits[i];
    out.terms.e_logd_real += log_sigmoid(l) / nr;
    out.d_grad_real[i] = (sigmoid(l) - 1.0) / nr;
  }
  out.d_grad_fake = Tensor(fake_logits.shape);
  out.g_grad_fake = Tensor(fake_logits.shape);
  for (std::int64_t i = 0; i < fake_logits.numel(); ++i) {
    const double l = fake_logits[i];
    out.terms.e_log1md_fake += log_sigmoid(-l) / nf;
    out.terms.e_logd_fake += log_sigmoid(l) / nf;
    out.d_grad_fake[i] = sigmoid(l) / nf;
    // minimax: minimize E[log(1 - D)]; nonsaturating: minimize -E[log D]
    out.g_grad_fake[i] =
        g_mode == GeneratorLossMode::minimax ? -sigmoid(l) / nf : (sigmoid(l) - 1.0) / nf;
  }
  out.d_loss = -out.terms.e_logd_real - out.terms.e_log1md_fake;
  out.g_loss = g_mode == GeneratorLossMode::minimax ? out.terms.e_log1md_fake : -out.terms.e_logd_fake;
  return out;
}

Tensor NoiseSource::sample(int n, Rng& rng) const {
  if (dim < 1) throw std::invalid_argument("NoiseSource: dim must be positive");
  Tensor out({n, dim});
  if (kind == Kind::uniform) {
    for (double& v : out.data) v = rng.uniform(-1.0, 1.0);
  } else {
    for (double& v : out.data) v = rng.uniform() < 0.5 ? 1.0 : -1.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// presets
// ---------------------------------------------------------------------------

namespace {

void init_dense(Layer& l, double std_or_xavier, bool xavier, Rng& rng) {
  const double std = xavier ? 1.0 / std::sqrt(static_cast<double>(l.weights.dim(0))) : std_or_xavier;
  for (double& w : l.weights.data) w = rng.normal(0.0, std);
}

void init_conv(Layer& l, double std, Rng& rng) {
  for (double& w : l.weights.data) w = rng.normal(0.0, std);
}

}  // namespace

std::vector<int> preset_sample_shape(const ArchPreset& preset) {
  if (preset.name == "toy2d") return {2};
  if (preset.name == "mnist-small") return {1, 28, 28};
  if (preset.name == "celeba-paper") return {3, 64, 64};
  throw std::invalid_argument("unknown architecture preset: " + preset.name);
}

DiscriminatorNet make_discriminator(const ArchPreset& preset, Rng& rng) {
  DiscriminatorNet d;
  d.feature_dim = preset.feature_dim;
  const double leak = preset.leak;
  if (preset.name == "toy2d") {
    auto l0 = Layer::dense(2, 32);
    auto l1 = Layer::dense(32, preset.feature_dim);
    auto l2 = Layer::dense(preset.feature_dim, 32);
    auto l3 = Layer::dense(32, 1);
    init_dense(l0, 0, true, rng);
    init_dense(l1, 0, true, rng);
    init_dense(l2, 0, true, rng);
    init_dense(l3, 0, true, rng);
    d.net.layers = {l0, Layer::activation(ActKind::leaky_relu, leak),
                    l1, Layer::activation(ActKind::tanh),
                    l2, Layer::activation(ActKind::leaky_relu, leak),
                    l3};
    d.split_index = 3;
  } else if (preset.name == "mnist-small") {
    const int s1 = preset.stride_literal ? 5 : 2;
    auto c0 = Layer::conv2d(1, 16, 5, s1);
    auto c1 = Layer::conv2d(16, 32, 5, s1);
    // stride 2: 28 -> 12 -> 4, flatten 32*4*4; stride 5: 28 -> 5 -> 1, flatten 32
    const int flat = preset.stride_literal ? 32 : 32 * 4 * 4;
    auto f0 = Layer::dense(flat, preset.feature_dim);
    auto h0 = Layer::dense(preset.feature_dim, 64);
    auto h1 = Layer::dense(64, 1);
    init_conv(c0, 0.02, rng);
    init_conv(c1, 0.02, rng);
    init_dense(f0, 0.02, false, rng);
    init_dense(h0, 0.02, false, rng);
    init_dense(h1, 0.02, false, rng);
    d.net.layers = {c0, Layer::activation(ActKind::leaky_relu, leak),
                    c1, Layer::activation(ActKind::leaky_relu, leak),
                    f0, Layer::activation(ActKind::tanh),
                    h0, Layer::activation(ActKind::leaky_relu, leak),
                    h1};
    d.split_index = 5;
  } else if (preset.name == "celeba-paper") {
    const int s = preset.stride_literal ? 5 : 2;
    auto c0 = Layer::conv2d(3, 64, 5, s);
    auto c1 = Layer::conv2d(64, 128, 5, s);
    auto c2 = Layer::conv2d(128, 256, 5, s);
    auto c3 = Layer::conv2d(256, 512, 5, s);
    // stride 2 from 64x64: 30 -> 13 -> 5 -> 1
    if (preset.stride_literal) {
      throw std::invalid_argument(
          "celeba-paper with literal stride-5 convolutions: 64x64 inputs leave no valid geometry after two "
          "layers; use the stride-2 reading");
    }
    auto f0 = Layer::dense(512, preset.feature_dim);
    auto h0 = Layer::dense(preset.feature_dim, 500);
    auto h1 = Layer::dense(500, 500);
    auto h2 = Layer::dense(500, 1);
    init_conv(c0, 0.02, rng);
    init_conv(c1, 0.02, rng);
    init_conv(c2, 0.02, rng);
    init_conv(c3, 0.02, rng);
    init_dense(f0, 0.02, false, rng);
    init_dense(h0, 0.02, false, rng);
    init_dense(h1, 0.02, false, rng);
    init_dense(h2, 0.02, false, rng);
    d.net.layers = {c0, Layer::activation(ActKind::leaky_relu, leak),
                    c1, Layer::activation(ActKind::leaky_relu, leak),
                    c2, Layer::activation(ActKind::leaky_relu, leak),
                    c3, Layer::activation(ActKind::leaky_relu, leak),
                    f0, Layer::activation(ActKind::tanh),
                    h0, Layer::activation(ActKind::leaky_relu, leak),
                    h1, Layer::activation(ActKind::leaky_relu, leak),
                    h2};
    d.split_index = 9;
  } else {
    throw std::invalid_argument("unknown architecture preset: " + preset.name);
  }
  d.validate();
  return d;
}

GeneratorNet make_generator(const ArchPreset& preset, Rng& rng) {
  GeneratorNet g;
  g.input_dim = preset.feature_dim;
  if (preset.name == "toy2d") {
    auto l0 = Layer::dense(preset.feature_dim, 32);
    auto l1 = Layer::dense(32, 32);
    auto l2 = Layer::dense(32, 2);
    init_dense(l0, 0, true, rng);
    init_dense(l1, 0, true, rng);
    init_dense(l2, 0, true, rng);
    g.net.layers = {l0, Layer::activation(ActKind::relu),
                    l1, Layer::activation(ActKind::relu),
                    l2, Layer::activation(ActKind::tanh)};
  } else if (preset.name == "mnist-small") {
    auto l0 = Layer::dense(preset.feature_dim, 32 * 5 * 5);
    auto t0 = Layer::conv2d_transpose(32, 16, 4, 2);  // 5 -> 12
    auto t1 = Layer::conv2d_transpose(16, 1, 6, 2);   // 12 -> 28
    init_dense(l0, 0.02, false, rng);
    init_conv(t0, 0.02, rng);
    init_conv(t1, 0.02, rng);
    g.net.layers = {l0, Layer::activation(ActKind::relu),
                    Layer::reshape({32, 5, 5}),
                    t0, Layer::activation(ActKind::relu),
                    t1, Layer::activation(ActKind::tanh)};
  } else if (preset.name == "celeba-paper") {
    auto l0 = Layer::dense(preset.feature_dim, 512 * 4 * 4);
    auto t0 = Layer::conv2d_transpose(512, 256, 2, 2);  // 4 -> 8
    auto t1 = Layer::conv2d_transpose(256, 128, 2, 2);  // 8 -> 16
    auto t2 = Layer::conv2d_transpose(128, 64, 2, 2);   // 16 -> 32
    auto t3 = Layer::conv2d_transpose(64, 3, 2, 2);     // 32 -> 64
    init_dense(l0, 0.02, false, rng);
    init_conv(t0, 0.02, rng);
    init_conv(t1, 0.02, rng);
    init_conv(t2, 0.02, rng);
    init_conv(t3, 0.02, rng);
    g.net.layers = {l0, Layer::activation(ActKind::relu),
                    Layer::reshape({512, 4, 4}),
                    t0, Layer::activation(ActKind::relu),
                    t1, Layer::activation(ActKind::relu),
                    t2, Layer::activation(ActKind::relu),
                    t3, Layer::activation(ActKind::tanh)};
  } else {
    throw std::invalid_argument("unknown architecture preset: " + preset.name);
  }
  return g;
}

}  // namespace aan
