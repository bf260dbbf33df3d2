#include "aan/layers.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace aan {

namespace {

void require_backward_ready(const Layer& layer, const char* op) {
  if (!layer.has_cache) {
    throw std::runtime_error(std::string(op) + " backward: no cached forward activation");
  }
}

std::string dims4(const Tensor& t) { return t.shape_str(); }

}  // namespace

Layer Layer::dense(int in, int out) {
  if (in < 1 || out < 1) throw std::invalid_argument("dense layer dimensions must be positive");
  Layer l;
  l.kind = LayerKind::dense;
  l.weights = Tensor({in, out});
  l.bias = Tensor({out});
  l.grad_weights = Tensor({in, out});
  l.grad_bias = Tensor({out});
  return l;
}

Layer Layer::conv2d(int in_c, int out_c, int k, int stride) {
  if (in_c < 1 || out_c < 1 || k < 1) throw std::invalid_argument("conv2d channel/filter sizes must be positive");
  if (stride < 1) throw std::invalid_argument("conv2d stride must be >= 1, got " + std::to_string(stride));
  Layer l;
  l.kind = LayerKind::conv2d;
  l.weights = Tensor({out_c, in_c, k, k});
  l.bias = Tensor({out_c});
  l.grad_weights = Tensor({out_c, in_c, k, k});
  l.grad_bias = Tensor({out_c});
  l.stride = stride;
  return l;
}

Layer Layer::conv2d_transpose(int in_c, int out_c, int k, int stride) {
  if (in_c < 1 || out_c < 1 || k < 1) {
    throw std::invalid_argument("conv2d_transpose channel/filter sizes must be positive");
  }
  if (stride < 1) throw std::invalid_argument("conv2d_transpose stride must be >= 1, got " + std::to_string(stride));
  Layer l;
  l.kind = LayerKind::conv2d_transpose;
  l.weights = Tensor({in_c, out_c, k, k});
  l.bias = Tensor({out_c});
  l.grad_weights = Tensor({in_c, out_c, k, k});
  l.grad_bias = Tensor({out_c});
  l.stride = stride;
  return l;
}

Layer Layer::activation(ActKind a, double leak) {
  if (a == ActKind::leaky_relu && (leak <= 0.0 || leak >= 1.0)) {
    throw std::invalid_argument("leaky_relu slope must satisfy 0 < alpha < 1, got " + std::to_string(leak));
  }
  Layer l;
  l.kind = LayerKind::activation;
  l.act = a;
  l.leak = leak;
  return l;
}

Layer Layer::reshape(std::vector<int> sample_shape) {
  if (sample_shape.empty()) throw std::invalid_argument("reshape target shape must be non-empty");
  shape_numel(sample_shape);  // validates positivity
  Layer l;
  l.kind = LayerKind::reshape;
  l.sample_shape = std::move(sample_shape);
  return l;
}

void Layer::zero_grad() {
  for (double& v : grad_weights.data) v = 0.0;
  for (double& v : grad_bias.data) v = 0.0;
}

// ---------------------------------------------------------------------------
// dense
// ---------------------------------------------------------------------------

namespace {

// Flattens [N, ...] to N rows of `features` each; validates geometry.
std::int64_t dense_rows(const Tensor& input, const Layer& layer, const char* op) {
  if (input.ndim() < 2) {
    throw std::invalid_argument(std::string(op) + ": input must have a batch dimension, got " + input.shape_str());
  }
  std::int64_t rows = input.dim(0);
  std::int64_t features = input.numel() / rows;
  if (features != layer.weights.dim(0)) {
    throw std::invalid_argument(std::string(op) + ": input features " + std::to_string(features) +
                                " do not match weight input dimension " + std::to_string(layer.weights.dim(0)) +
                                " (input " + input.shape_str() + ", weights " + layer.weights.shape_str() + ")");
  }
  return rows;
}

Tensor dense_forward(const Layer& layer, const Tensor& input) {
  const std::int64_t n = dense_rows(input, layer, "dense forward");
  const int in = layer.weights.dim(0);
  const int out = layer.weights.dim(1);
  Tensor y({static_cast<int>(n), out});
  const double* w = layer.weights.data.data();
  const double* b = layer.bias.data.data();
  for (std::int64_t r = 0; r < n; ++r) {
    const double* x = input.data.data() + r * in;
    double* yr = y.data.data() + r * out;
    for (int o = 0; o < out; ++o) yr[o] = b[o];
    for (int i = 0; i < in; ++i) {
      const double xi = x[i];
      const double* wi = w + static_cast<std::int64_t>(i) * out;
      for (int o = 0; o < out; ++o) yr[o] += xi * wi[o];
    }
  }
  return y;
}

Tensor dense_backward(Layer& layer, const Tensor& grad_out) {
  const std::int64_t n = layer.cache_in.dim(0);
  const int in = layer.weights.dim(0);
  const int out = layer.weights.dim(1);
  require_shape(grad_out, {static_cast<int>(n), out}, "dense backward gradient");
  Tensor gx(layer.cache_in.shape);
  double* gw = layer.grad_weights.data.data();
  double* gb = layer.grad_bias.data.data();
  const double* w = layer.weights.data.data();
  for (std::int64_t r = 0; r < n; ++r) {
    const double* x = layer.cache_in.data.data() + r * in;
    const double* gy = grad_out.data.data() + r * out;
    double* gxr = gx.data.data() + r * in;
    for (int o = 0; o < out; ++o) gb[o] += gy[o];
    for (int i = 0; i < in; ++i) {
      const double* wi = w + static_cast<std::int64_t>(i) * out;
      double* gwi = gw + static_cast<std::int64_t>(i) * out;
      double acc = 0.0;
      for (int o = 0; o < out; ++o) {
        acc += gy[o] * wi[o];
        gwi[o] += x[i] * gy[o];
      }
      gxr[i] = acc;
    }
  }
  return gx;
}

}  // namespace

Tensor dense_apply(Layer& layer, const Tensor& input, Mode mode) {
  if (layer.kind != LayerKind::dense) throw std::invalid_argument("dense_apply: layer is not dense");
  if (mode == Mode::forward) {
    require_finite(input, "dense forward input");
    layer.cache_in = input;
    layer.has_cache = true;
    return dense_forward(layer, input);
  }
  require_backward_ready(layer, "dense");
  require_finite(input, "dense backward gradient");
  return dense_backward(layer, input);
}

// ---------------------------------------------------------------------------
// conv2d
// ---------------------------------------------------------------------------

namespace {

struct ConvGeom {
  int n, in_c, h, w, out_c, k, s, oh, ow;
};

ConvGeom conv_geometry(const Layer& layer, const Tensor& input, const char* op) {
  if (input.ndim() != 4) {
    throw std::invalid_argument(std::string(op) + ": input must be NCHW, got " + input.shape_str());
  }
  ConvGeom g;
  g.n = input.dim(0);
  g.in_c = input.dim(1);
  g.h = input.dim(2);
  g.w = input.dim(3);
  g.out_c = layer.weights.dim(0);
  g.k = layer.weights.dim(2);
  g.s = layer.stride;
  if (g.in_c != layer.weights.dim(1)) {
    throw std::invalid_argument(std::string(op) + ": input channels " + std::to_string(g.in_c) +
                                " do not match filter channels " + std::to_string(layer.weights.dim(1)) +
                                " (input " + dims4(input) + ", weights " + layer.weights.shape_str() + ")");
  }
  g.oh = (g.h - g.k) / g.s + 1;
  g.ow = (g.w - g.k) / g.s + 1;
  if (g.h < g.k || g.w < g.k) {
    throw std::invalid_argument(std::string(op) + ": spatial geometry " + dims4(input) +
                                " incompatible with filter " + std::to_string(g.k) + " stride " +
                                std::to_string(g.s) + "; computed output shape " +
                                shape_to_string({g.n, g.out_c, (g.h - g.k) / g.s + 1, (g.w - g.k) / g.s + 1}));
  }
  return g;
}

Tensor conv2d_forward(const Layer& layer, const Tensor& input) {
  const ConvGeom g = conv_geometry(layer, input, "conv2d forward");
  Tensor y({g.n, g.out_c, g.oh, g.ow});
  const double* w = layer.weights.data.data();
  const double* b = layer.bias.data.data();
  const std::int64_t in_plane = static_cast<std::int64_t>(g.h) * g.w;
  const std::int64_t in_sample = g.in_c * in_plane;
  const std::int64_t out_plane = static_cast<std::int64_t>(g.oh) * g.ow;
  const std::int64_t out_sample = g.out_c * out_plane;
  const std::int64_t w_per_oc = static_cast<std::int64_t>(g.in_c) * g.k * g.k;
  for (int n = 0; n < g.n; ++n) {
    const double* xs = input.data.data() + n * in_sample;
    double* ys = y.data.data() + n * out_sample;
    for (int oc = 0; oc < g.out_c; ++oc) {
      const double* woc = w + oc * w_per_oc;
      double* yp = ys + oc * out_plane;
      for (int oy = 0; oy < g.oh; ++oy) {
        for (int ox = 0; ox < g.ow; ++ox) {
          double acc = b[oc];
          for (int ic = 0; ic < g.in_c; ++ic) {
            const double* xp = xs + ic * in_plane + static_cast<std::int64_t>(oy) * g.s * g.w + ox * g.s;
            const double* wk = woc + static_cast<std::int64_t>(ic) * g.k * g.k;
            for (int ky = 0; ky < g.k; ++ky) {
              const double* xrow = xp + static_cast<std::int64_t>(ky) * g.w;
              const double* wrow = wk + static_cast<std::int64_t>(ky) * g.k;
              for (int kx = 0; kx < g.k; ++kx) acc += xrow[kx] * wrow[kx];
            }
          }
          yp[static_cast<std::int64_t>(oy) * g.ow + ox] = acc;
        }
      }
    }
  }
  return y;
}

Tensor conv2d_backward(Layer& layer, const Tensor& grad_out) {
  const ConvGeom g = conv_geometry(layer, layer.cache_in, "conv2d backward");
  require_shape(grad_out, {g.n, g.out_c, g.oh, g.ow}, "conv2d backward gradient");
  Tensor gx(layer.cache_in.shape);
  const double* w = layer.weights.data.data();
  double* gw = layer.grad_weights.data.data();
  double* gb = layer.grad_bias.data.data();
  const std::int64_t in_plane = static_cast<std::int64_t>(g.h) * g.w;
  const std::int64_t in_sample = g.in_c * in_plane;
  const std::int64_t out_plane = static_cast<std::int64_t>(g.oh) * g.ow;
  const std::int64_t out_sample = g.out_c * out_plane;
  const std::int64_t w_per_oc = static_cast<std::int64_t>(g.in_c) * g.k * g.k;
  for (int n = 0; n < g.n; ++n) {
    const double* xs = layer.cache_in.data.data() + n * in_sample;
    double* gxs = gx.data.data() + n * in_sample;
    const double* gys = grad_out.data.data() + n * out_sample;
    for (int oc = 0; oc < g.out_c; ++oc) {
      const double* woc = w + oc * w_per_oc;
      double* gwoc = gw + oc * w_per_oc;
      const double* gyp = gys + oc * out_plane;
      for (int oy = 0; oy < g.oh; ++oy) {
        for (int ox = 0; ox < g.ow; ++ox) {
          const double gy = gyp[static_cast<std::int64_t>(oy) * g.ow + ox];
          gb[oc] += gy;
          for (int ic = 0; ic < g.in_c; ++ic) {
            const std::int64_t base = ic * in_plane + static_cast<std::int64_t>(oy) * g.s * g.w + ox * g.s;
            const double* xp = xs + base;
            double* gxp = gxs + base;
            const double* wk = woc + static_cast<std::int64_t>(ic) * g.k * g.k;
            double* gwk = gwoc + static_cast<std::int64_t>(ic) * g.k * g.k;
            for (int ky = 0; ky < g.k; ++ky) {
              const std::int64_t row = static_cast<std::int64_t>(ky) * g.w;
              for (int kx = 0; kx < g.k; ++kx) {
                gxp[row + kx] += gy * wk[static_cast<std::int64_t>(ky) * g.k + kx];
                gwk[static_cast<std::int64_t>(ky) * g.k + kx] += gy * xp[row + kx];
              }
            }
          }
        }
      }
    }
  }
  return gx;
}

}  // namespace

std::vector<int> conv2d_output_shape(const Layer& layer, const std::vector<int>& input_shape) {
  Tensor probe(input_shape);
  const ConvGeom g = conv_geometry(layer, probe, "conv2d shape");
  return {g.n, g.out_c, g.oh, g.ow};
}

Tensor conv2d_apply(Layer& layer, const Tensor& input, Mode mode) {
  if (layer.kind != LayerKind::conv2d) throw std::invalid_argument("conv2d_apply: layer is not conv2d");
  if (mode == Mode::forward) {
    require_finite(input, "conv2d forward input");
    layer.cache_in = input;
    layer.has_cache = true;
    return conv2d_forward(layer, input);
  }
  require_backward_ready(layer, "conv2d");
  require_finite(input, "conv2d backward gradient");
  return conv2d_backward(layer, input);
}

// ---------------------------------------------------------------------------
// conv2d_transpose
// ---------------------------------------------------------------------------

namespace {

struct TConvGeom {
  int n, in_c, h, w, out_c, k, s, oh, ow;
};

TConvGeom tconv_geometry(const Layer& layer, const Tensor& input, const char* op) {
  if (input.ndim() != 4) {
    throw std::invalid_argument(std::string(op) + ": input must be NCHW, got " + input.shape_str());
  }
  TConvGeom g;
  g.n = input.dim(0);
  g.in_c = input.dim(1);
  g.h = input.dim(2);
  g.w = input.dim(3);
  g.out_c = layer.weights.dim(1);
  g.k = layer.weights.dim(2);
  g.s = layer.stride;
  if (g.in_c != layer.weights.dim(0)) {
    throw std::invalid_argument(std::string(op) + ": input channels " + std::to_string(g.in_c) +
                                " do not match filter channels " + std::to_string(layer.weights.dim(0)) +
                                " (input " + dims4(input) + ", weights " + layer.weights.shape_str() + ")");
  }
  g.oh = (g.h - 1) * g.s + g.k;
  g.ow = (g.w - 1) * g.s + g.k;
  return g;
}

Tensor tconv_forward(const Layer& layer, const Tensor& input) {
  const TConvGeom g = tconv_geometry(layer, input, "conv2d_transpose forward");
  Tensor y({g.n, g.out_c, g.oh, g.ow});
  const double* w = layer.weights.data.data();
  const double* b = layer.bias.data.data();
  const std::int64_t in_plane = static_cast<std::int64_t>(g.h) * g.w;
  const std::int64_t in_sample = g.in_c * in_plane;
  const std::int64_t out_plane = static_cast<std::int64_t>(g.oh) * g.ow;
  const std::int64_t out_sample = g.out_c * out_plane;
  const std::int64_t w_per_ic = static_cast<std::int64_t>(g.out_c) * g.k * g.k;
  for (int n = 0; n < g.n; ++n) {
    double* ys = y.data.data() + n * out_sample;
    for (int oc = 0; oc < g.out_c; ++oc) {
      double* yp = ys + oc * out_plane;
      for (std::int64_t i = 0; i < out_plane; ++i) yp[i] = b[oc];
    }
    const double* xs = input.data.data() + n * in_sample;
    for (int ic = 0; ic < g.in_c; ++ic) {
      const double* xp = xs + ic * in_plane;
      const double* wic = w + ic * w_per_ic;
      for (int iy = 0; iy < g.h; ++iy) {
        for (int ix = 0; ix < g.w; ++ix) {
          const double xv = xp[static_cast<std::int64_t>(iy) * g.w + ix];
          if (xv == 0.0) continue;
          for (int oc = 0; oc < g.out_c; ++oc) {
            double* yp = ys + oc * out_plane + static_cast<std::int64_t>(iy) * g.s * g.ow + ix * g.s;
            const double* wk = wic + static_cast<std::int64_t>(oc) * g.k * g.k;
            for (int ky = 0; ky < g.k; ++ky) {
              double* yrow = yp + static_cast<std::int64_t>(ky) * g.ow;
              const double* wrow = wk + static_cast<std::int64_t>(ky) * g.k;
              for (int kx = 0; kx < g.k; ++kx) yrow[kx] += xv * wrow[kx];
            }
          }
        }
      }
    }
  }
  return y;
}

Tensor tconv_backward(Layer& layer, const Tensor& grad_out) {
  const TConvGeom g = tconv_geometry(layer, layer.cache_in, "conv2d_transpose backward");
  require_shape(grad_out, {g.n, g.out_c, g.oh, g.ow}, "conv2d_transpose backward gradient");
  Tensor gx(layer.cache_in.shape);
  const double* w = layer.weights.data.data();
  double* gw = layer.grad_weights.data.data();
  double* gb = layer.grad_bias.data.data();
  const std::int64_t in_plane = static_cast<std::int64_t>(g.h) * g.w;
  const std::int64_t in_sample = g.in_c * in_plane;
  const std::int64_t out_plane = static_cast<std::int64_t>(g.oh) * g.ow;
  const std::int64_t out_sample = g.out_c * out_plane;
  const std::int64_t w_per_ic = static_cast<std::int64_t>(g.out_c) * g.k * g.k;
  for (int n = 0; n < g.n; ++n) {
    const double* gys = grad_out.data.data() + n * out_sample;
    for (int oc = 0; oc < g.out_c; ++oc) {
      const double* gyp = gys + oc * out_plane;
      double acc = 0.0;
      for (std::int64_t i = 0; i < out_plane; ++i) acc += gyp[i];
      gb[oc] += acc;
    }
    const double* xs = layer.cache_in.data.data() + n * in_sample;
    double* gxs = gx.data.data() + n * in_sample;
    for (int ic = 0; ic < g.in_c; ++ic) {
      const double* xp = xs + ic * in_plane;
      double* gxp = gxs + ic * in_plane;
      const double* wic = w + ic * w_per_ic;
      double* gwic = gw + ic * w_per_ic;
      for (int iy = 0; iy < g.h; ++iy) {
        for (int ix = 0; ix < g.w; ++ix) {
          const double xv = xp[static_cast<std::int64_t>(iy) * g.w + ix];
          double acc = 0.0;
          for (int oc = 0; oc < g.out_c; ++oc) {
            const double* gyp = gys + oc * out_plane + static_cast<std::int64_t>(iy) * g.s * g.ow + ix * g.s;
            const double* wk = wic + static_cast<std::int64_t>(oc) * g.k * g.k;
            double* gwk = gwic + static_cast<std::int64_t>(oc) * g.k * g.k;
            for (int ky = 0; ky < g.k; ++ky) {
              const double* gyrow = gyp + static_cast<std::int64_t>(ky) * g.ow;
              const double* wrow = wk + static_cast<std::int64_t>(ky) * g.k;
              double* gwrow = gwk + static_cast<std::int64_t>(ky) * g.k;
              for (int kx = 0; kx < g.k; ++kx) {
                acc += gyrow[kx] * wrow[kx];
                gwrow[kx] += xv * gyrow[kx];
              }
            }
          }
          gxp[static_cast<std::int64_t>(iy) * g.w + ix] = acc;
        }
      }
    }
  }
  return gx;
}

}  // namespace

Tensor conv2d_transpose_apply(Layer& layer, const Tensor& input, Mode mode) {
  if (layer.kind != LayerKind::conv2d_transpose) {
    throw std::invalid_argument("conv2d_transpose_apply: layer is not conv2d_transpose");
  }
  if (mode == Mode::forward) {
    require_finite(input, "conv2d_transpose forward input");
    layer.cache_in = input;
    layer.has_cache = true;
    return tconv_forward(layer, input);
  }
  require_backward_ready(layer, "conv2d_transpose");
  require_finite(input, "conv2d_transpose backward gradient");
  return tconv_backward(layer, input);
}

// ---------------------------------------------------------------------------
// activation
// ---------------------------------------------------------------------------

namespace {

double act_forward_scalar(ActKind a, double leak, double x) {
  switch (a) {
    case ActKind::relu:
      return x > 0.0 ? x : 0.0;
    case ActKind::leaky_relu:
      return x > 0.0 ? x : leak * x;
    case ActKind::tanh:
      return std::tanh(x);
    case ActKind::sigmoid:
      return 1.0 / (1.0 + std::exp(-x));
  }
  return 0.0;
}

double act_derivative_scalar(ActKind a, double leak, double x, double y) {
  switch (a) {
    case ActKind::relu:
      return x > 0.0 ? 1.0 : 0.0;
    case ActKind::leaky_relu:
      return x > 0.0 ? 1.0 : leak;
    case ActKind::tanh:
      return 1.0 - y * y;
    case ActKind::sigmoid:
      return y * (1.0 - y);
  }
  return 0.0;
}

}  // namespace

Tensor activation_apply(Layer& layer, const Tensor& input, Mode mode) {
  if (layer.kind != LayerKind::activation) throw std::invalid_argument("activation_apply: layer is not an activation");
  if (mode == Mode::forward) {
    require_finite(input, "activation forward input");
    Tensor y(input.shape);
    for (std::int64_t i = 0; i < input.numel(); ++i) y[i] = act_forward_scalar(layer.act, layer.leak, input[i]);
    layer.cache_in = input;
    layer.cache_out = y;
    layer.has_cache = true;
    return y;
  }
  require_backward_ready(layer, "activation");
  require_finite(input, "activation backward gradient");
  require_shape(input, layer.cache_in.shape, "activation backward gradient");
  Tensor gx(input.shape);
  for (std::int64_t i = 0; i < input.numel(); ++i) {
    gx[i] = input[i] * act_derivative_scalar(layer.act, layer.leak, layer.cache_in[i], layer.cache_out[i]);
  }
  return gx;
}

// ---------------------------------------------------------------------------
// reshape
// ---------------------------------------------------------------------------

Tensor reshape_apply(Layer& layer, const Tensor& input, Mode mode) {
  if (layer.kind != LayerKind::reshape) throw std::invalid_argument("reshape_apply: layer is not a reshape");
  if (mode == Mode::forward) {
    require_finite(input, "reshape forward input");
    if (input.ndim() < 1) throw std::invalid_argument("reshape forward: input needs a batch dimension");
    const std::int64_t n = input.dim(0);
    const std::int64_t per_sample = input.numel() / n;
    if (per_sample != shape_numel(layer.sample_shape)) {
      throw std::invalid_argument("reshape forward: per-sample size " + std::to_string(per_sample) +
                                  " does not match target " + shape_to_string(layer.sample_shape));
    }
    std::vector<int> out_shape;
    out_shape.push_back(static_cast<int>(n));
    out_shape.insert(out_shape.end(), layer.sample_shape.begin(), layer.sample_shape.end());
    layer.cache_in = input;
    layer.has_cache = true;
    return Tensor(std::move(out_shape), input.data);
  }
  require_backward_ready(layer, "reshape");
  require_finite(input, "reshape backward gradient");
  if (input.numel() != layer.cache_in.numel()) {
    throw std::invalid_argument("reshape backward: gradient size " + std::to_string(input.numel()) +
                                " does not match cached input " + layer.cache_in.shape_str());
  }
  return Tensor(layer.cache_in.shape, input.data);
}

// ---------------------------------------------------------------------------
// dispatch & net
// ---------------------------------------------------------------------------

Tensor layer_apply(Layer& layer, const Tensor& input, Mode mode) {
  switch (layer.kind) {
    case LayerKind::dense:
      return dense_apply(layer, input, mode);
    case LayerKind::conv2d:
      return conv2d_apply(layer, input, mode);
    case LayerKind::conv2d_transpose:
      return conv2d_transpose_apply(layer, input, mode);
    case LayerKind::activation:
      return activation_apply(layer, input, mode);
    case LayerKind::reshape:
      return reshape_apply(layer, input, mode);
  }
  throw std::logic_error("layer_apply: unknown layer kind");
}

Tensor layer_forward_pure(const Layer& layer, const Tensor& input) {
  Layer scratch = layer;  // desk-scale copies; caches stay untouched
  return layer_apply(scratch, input, Mode::forward);
}

Tensor Net::forward(const Tensor& x) {
  Tensor cur = x;
  for (Layer& l : layers) cur = layer_apply(l, cur, Mode::forward);
  return cur;
}

Tensor Net::forward_captured(const Tensor& x, int capture_layer, Tensor* captured) {
  if (capture_layer < 0 || capture_layer >= static_cast<int>(layers.size())) {
    throw std::invalid_argument("forward_captured: layer index " + std::to_string(capture_layer) + " out of range");
  }
  Tensor cur = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    cur = layer_apply(layers[i], cur, Mode::forward);
    if (static_cast<int>(i) == capture_layer && captured != nullptr) *captured = cur;
  }
  return cur;
}

Tensor Net::forward_range(const Tensor& x, std::size_t from, std::size_t to) const {
  if (from > to || to > layers.size()) throw std::invalid_argument("forward_range: bad layer range");
  Tensor cur = x;
  for (std::size_t i = from; i < to; ++i) cur = layer_forward_pure(layers[i], cur);
  return cur;
}

Tensor Net::backward(const Tensor& grad_out) {
  Tensor cur = grad_out;
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) cur = layer_apply(*it, cur, Mode::backward);
  return cur;
}

void Net::zero_grad() {
  for (Layer& l : layers) l.zero_grad();
}

std::vector<Tensor*> Net::params() {
  std::vector<Tensor*> out;
  for (Layer& l : layers) {
    if (!l.has_params()) continue;
    out.push_back(&l.weights);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<const Tensor*> Net::grads() const {
  std::vector<const Tensor*> out;
  for (const Layer& l : layers) {
    if (!l.has_params()) continue;
    out.push_back(&l.grad_weights);
    out.push_back(&l.grad_bias);
  }
  return out;
}

std::int64_t Net::param_count() const {
  std::int64_t n = 0;
  for (const Layer& l : layers) n += l.weights.numel() + l.bias.numel();
  return n;
}

// ---------------------------------------------------------------------------
// finite differences
// ---------------------------------------------------------------------------

double finite_difference_check(Net& net, const Tensor& input, double eps, std::optional<GradFault> fault) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) {
    throw std::invalid_argument("finite_difference_check: eps must lie in [1e-7, 1e-3]");
  }
  net.zero_grad();
  Tensor out = net.forward(input);

  Rng prng = Rng::stream(0x0fdc0fdc, "fd-probe");
  Tensor proj(out.shape);
  for (double& v : proj.data) v = prng.uniform(-1.0, 1.0);

  net.backward(proj);

  auto params = net.params();
  auto grads = net.grads();
  std::vector<Tensor> analytic;
  analytic.reserve(grads.size());
  for (const Tensor* g : grads) analytic.push_back(*g);
  if (fault) {
    if (fault->param_tensor < 0 || fault->param_tensor >= static_cast<int>(analytic.size()) ||
        fault->element < 0 || fault->element >= analytic[static_cast<std::size_t>(fault->param_tensor)].numel()) {
      throw std::invalid_argument("finite_difference_check: fault location out of range");
    }
    analytic[static_cast<std::size_t>(fault->param_tensor)][fault->element] *= fault->scale;
  }

  auto probe_loss = [&]() {
    Tensor y = net.forward(input);
    double loss = 0.0;
    for (std::int64_t i = 0; i < y.numel(); ++i) loss += proj[i] * y[i];
    return loss;
  };

  double worst = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor* p = params[pi];
    for (std::int64_t e = 0; e < p->numel(); ++e) {
      const double orig = (*p)[e];
      (*p)[e] = orig + eps;
      const double lp = probe_loss();
      (*p)[e] = orig - eps;
      const double lm = probe_loss();
      (*p)[e] = orig;
      const double fd = (lp - lm) / (2.0 * eps);
      const double an = analytic[pi][e];
      const double denom = std::max({std::fabs(fd), std::fabs(an), 1e-3});
      worst = std::max(worst, std::fabs(fd - an) / denom);
    }
  }
  return worst;
}

}  // namespace aan
