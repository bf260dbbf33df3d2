#pragma once

#include <optional>
#include <vector>

#include "aan/tensor.hpp"

namespace aan {

enum class Mode { forward, backward };

enum class ActKind { relu, leaky_relu, tanh, sigmoid };

enum class LayerKind { dense, conv2d, conv2d_transpose, activation, reshape };

// One layer of a sequential net. Parameter and gradient buffers always
// shape-match; `cache_in`/`cache_out` hold the most recent forward pass and
// are what backward mode consumes.
struct Layer {
  LayerKind kind = LayerKind::dense;

  // dense: weights [in, out], bias [out]
  // conv2d: weights [out_c, in_c, k, k], bias [out_c]
  // conv2d_transpose: weights [in_c, out_c, k, k], bias [out_c]
  Tensor weights;
  Tensor bias;
  Tensor grad_weights;
  Tensor grad_bias;

  ActKind act = ActKind::relu;
  double leak = 0.2;  // leaky_relu slope, 0 < leak < 1
  int stride = 1;
  std::vector<int> sample_shape;  // reshape target, per sample

  Tensor cache_in;
  Tensor cache_out;
  bool has_cache = false;

  static Layer dense(int in, int out);
  static Layer conv2d(int in_c, int out_c, int k, int stride);
  static Layer conv2d_transpose(int in_c, int out_c, int k, int stride);
  static Layer activation(ActKind a, double leak = 0.2);
  static Layer reshape(std::vector<int> sample_shape);

  bool has_params() const { return weights.numel() > 0 || bias.numel() > 0; }
  void zero_grad();
};

// Per-op entry points. In forward mode `input` is the activation; in backward
// mode it is the gradient w.r.t. the layer output, the return value is the
// gradient w.r.t. the layer input and parameter gradients are accumulated.
Tensor dense_apply(Layer& layer, const Tensor& input, Mode mode);
Tensor conv2d_apply(Layer& layer, const Tensor& input, Mode mode);
Tensor conv2d_transpose_apply(Layer& layer, const Tensor& input, Mode mode);
Tensor activation_apply(Layer& layer, const Tensor& input, Mode mode);
Tensor reshape_apply(Layer& layer, const Tensor& input, Mode mode);
Tensor layer_apply(Layer& layer, const Tensor& input, Mode mode);

// Pure forward pass that leaves the layer caches untouched.
Tensor layer_forward_pure(const Layer& layer, const Tensor& input);

std::vector<int> conv2d_output_shape(const Layer& layer, const std::vector<int>& input_shape);

// Sequential container used for both G and D.
struct Net {
  std::vector<Layer> layers;

  Tensor forward(const Tensor& x);
  // As forward, but also copies the output of layer `capture_layer` into *captured.
  Tensor forward_captured(const Tensor& x, int capture_layer, Tensor* captured);
  // Pure pass over layers [from, to), no cache updates.
  Tensor forward_range(const Tensor& x, std::size_t from, std::size_t to) const;
  // Propagates grad_out through all cached layers, accumulating parameter
  // gradients; returns the gradient w.r.t. the net input.
  Tensor backward(const Tensor& grad_out);

  void zero_grad();
  std::vector<Tensor*> params();
  std::vector<const Tensor*> grads() const;
  std::int64_t param_count() const;
};

// Central-difference check of every parameter gradient against the analytic
// backward pass. The scalar probe loss is a fixed random projection of the
// net output. Returns the worst relative error. `fault`, when set, scales one
// analytic gradient entry before comparison (negative-control hook).
struct GradFault {
  int param_tensor;
  std::int64_t element;
  double scale;
};
double finite_difference_check(Net& net, const Tensor& input, double eps,
                               std::optional<GradFault> fault = std::nullopt);

}  // namespace aan
