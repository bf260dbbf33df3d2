#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "aan/layers.hpp"
#include "aan/rng.hpp"

using namespace aan;

namespace {

Tensor random_tensor(const std::vector<int>& shape, Rng& rng, double scale = 1.0) {
  Tensor t(shape);
  for (double& v : t.data) v = rng.uniform(-scale, scale);
  return t;
}

void randomize_layer(Layer& l, Rng& rng, double wscale = 0.5, double bscale = 0.1) {
  for (double& w : l.weights.data) w = rng.normal(0.0, wscale);
  for (double& b : l.bias.data) b = rng.normal(0.0, bscale);
}

// Independent cross-correlation oracle: plain quadruple loop, no stride
// arithmetic shared with the implementation.
Tensor conv_oracle(const Tensor& x, const Tensor& w, const Tensor& b, int stride) {
  const int n = x.dim(0), ic = x.dim(1), h = x.dim(2), ww = x.dim(3);
  const int oc = w.dim(0), k = w.dim(2);
  const int oh = (h - k) / stride + 1, ow = (ww - k) / stride + 1;
  Tensor y({n, oc, oh, ow});
  for (int ni = 0; ni < n; ++ni)
    for (int o = 0; o < oc; ++o)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          double acc = b[o];
          for (int c = 0; c < ic; ++c)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = oy * stride + ky, ix = ox * stride + kx;
                acc += x[((ni * ic + c) * h + iy) * ww + ix] * w[((o * ic + c) * k + ky) * k + kx];
              }
          y[((ni * oc + o) * oh + oy) * ow + ox] = acc;
        }
  return y;
}

}  // namespace

TEST_CASE("dense forward: identity weights pass input through") {
  Layer l = Layer::dense(2, 2);
  l.weights.data = {1.0, 0.0, 0.0, 1.0};
  Tensor x({1, 2}, {3.0, -1.0});
  Tensor y = dense_apply(l, x, Mode::forward);
  CHECK(y.data == std::vector<double>{3.0, -1.0});
}

TEST_CASE("dense forward: zero weights output the bias") {
  Layer l = Layer::dense(3, 2);
  l.bias.data = {5.0, 5.0};
  Tensor x({1, 3}, {0.3, -0.7, 2.0});
  Tensor y = dense_apply(l, x, Mode::forward);
  CHECK(y.data == std::vector<double>{5.0, 5.0});
}

TEST_CASE("dense rejects shape mismatches with a dimension report") {
  Layer l = Layer::dense(3, 2);
  Tensor x({1, 4});
  CHECK_THROWS_WITH_AS(dense_apply(l, x, Mode::forward), doctest::Contains("input features 4"),
                       std::invalid_argument);
}

TEST_CASE("dense rejects non-finite input") {
  Layer l = Layer::dense(2, 2);
  Tensor x({1, 2}, {1.0, std::numeric_limits<double>::infinity()});
  CHECK_THROWS_AS(dense_apply(l, x, Mode::forward), std::runtime_error);
}

TEST_CASE("dense backward requires a cached forward pass") {
  Layer l = Layer::dense(2, 2);
  Tensor g({1, 2}, {1.0, 1.0});
  CHECK_THROWS_WITH_AS(dense_apply(l, g, Mode::backward), doctest::Contains("cached"), std::runtime_error);
}

TEST_CASE("dense backward matches central finite differences on a random 4x3 layer") {
  Rng rng(11);
  Net net;
  net.layers = {Layer::dense(4, 3)};
  randomize_layer(net.layers[0], rng);
  Tensor x = random_tensor({2, 4}, rng);
  CHECK(finite_difference_check(net, x, 1e-5) < 1e-6);
}

TEST_CASE("conv2d: all-ones 4x4 input, 2x2 ones filter, stride 2 gives all 4s") {
  Layer l = Layer::conv2d(1, 1, 2, 2);
  for (double& w : l.weights.data) w = 1.0;
  Tensor x({1, 1, 4, 4}, std::vector<double>(16, 1.0));
  Tensor y = conv2d_apply(l, x, Mode::forward);
  CHECK(y.shape == std::vector<int>{1, 1, 2, 2});
  for (double v : y.data) CHECK(v == 4.0);
}

TEST_CASE("conv2d: zero filter and bias give zero output") {
  Layer l = Layer::conv2d(2, 3, 3, 1);
  Rng rng(5);
  Tensor x = random_tensor({2, 2, 5, 5}, rng);
  Tensor y = conv2d_apply(l, x, Mode::forward);
  for (double v : y.data) CHECK(v == 0.0);
}

TEST_CASE("conv2d forward agrees with the direct-summation oracle") {
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const int stride = 1 + static_cast<int>(rng.next_below(3));
    const int k = 2 + static_cast<int>(rng.next_below(3));
    const int h = k + static_cast<int>(rng.next_below(6));
    Layer l = Layer::conv2d(2, 3, k, stride);
    randomize_layer(l, rng);
    Tensor x = random_tensor({2, 2, h, h}, rng);
    Tensor got = conv2d_apply(l, x, Mode::forward);
    Tensor want = conv_oracle(x, l.weights, l.bias, stride);
    REQUIRE(got.shape == want.shape);
    for (std::int64_t i = 0; i < got.numel(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
}

TEST_CASE("conv2d output shape follows floor((H-K)/S)+1 on randomized geometries") {
  Rng rng(23);
  for (int trial = 0; trial < 25; ++trial) {
    const int stride = 1 + static_cast<int>(rng.next_below(4));
    const int k = 1 + static_cast<int>(rng.next_below(4));
    const int h = k + static_cast<int>(rng.next_below(9));
    const int w = k + static_cast<int>(rng.next_below(9));
    Layer l = Layer::conv2d(1, 2, k, stride);
    Tensor x({1, 1, h, w});
    Tensor y = conv2d_apply(l, x, Mode::forward);
    CHECK(y.dim(2) == (h - k) / stride + 1);
    CHECK(y.dim(3) == (w - k) / stride + 1);
  }
}

TEST_CASE("conv2d rejects incompatible geometry with computed output shape") {
  Layer l = Layer::conv2d(1, 1, 5, 2);
  Tensor x({1, 1, 3, 3});
  CHECK_THROWS_WITH_AS(conv2d_apply(l, x, Mode::forward), doctest::Contains("output shape"),
                       std::invalid_argument);
}

TEST_CASE("conv2d backward matches finite differences on a 1x2x6x6 instance") {
  Rng rng(31);
  Net net;
  net.layers = {Layer::conv2d(2, 2, 3, 2)};
  randomize_layer(net.layers[0], rng);
  Tensor x = random_tensor({1, 2, 6, 6}, rng);
  CHECK(finite_difference_check(net, x, 1e-5) < 1e-6);
}

TEST_CASE("conv2d_transpose doubles spatial size when k equals stride") {
  Layer l = Layer::conv2d_transpose(1, 1, 2, 2);
  Tensor x({1, 1, 3, 3}, std::vector<double>(9, 1.0));
  Tensor y = conv2d_transpose_apply(l, x, Mode::forward);
  CHECK(y.shape == std::vector<int>{1, 1, 6, 6});
}

TEST_CASE("conv2d_transpose is the adjoint of conv2d") {
  // <conv(x), y> == <x, tconv(y)> with shared weights and zero bias.
  Rng rng(41);
  Layer conv = Layer::conv2d(2, 3, 3, 2);
  randomize_layer(conv, rng, 0.5, 0.0);
  for (double& b : conv.bias.data) b = 0.0;
  Layer tconv = Layer::conv2d_transpose(3, 2, 3, 2);
  for (double& b : tconv.bias.data) b = 0.0;
  // conv weights [oc, ic, k, k] -> tconv weights [oc(as in), ic(as out), k, k]
  tconv.weights = Tensor({3, 2, 3, 3});
  for (int o = 0; o < 3; ++o)
    for (int c = 0; c < 2; ++c)
      for (int i = 0; i < 9; ++i) tconv.weights[(o * 2 + c) * 9 + i] = conv.weights[(o * 2 + c) * 9 + i];

  Tensor x = random_tensor({1, 2, 7, 7}, rng);
  Tensor cx = conv2d_apply(conv, x, Mode::forward);  // [1,3,3,3]
  Tensor y = random_tensor({1, 3, 3, 3}, rng);
  Tensor ty = conv2d_transpose_apply(tconv, y, Mode::forward);  // [1,2,7,7]

  double lhs = 0.0, rhs = 0.0;
  for (std::int64_t i = 0; i < cx.numel(); ++i) lhs += cx[i] * y[i];
  for (std::int64_t i = 0; i < x.numel(); ++i) rhs += x[i] * ty[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("conv2d_transpose backward matches finite differences") {
  Rng rng(43);
  Net net;
  net.layers = {Layer::conv2d_transpose(2, 2, 3, 2)};
  randomize_layer(net.layers[0], rng);
  Tensor x = random_tensor({1, 2, 4, 4}, rng);
  CHECK(finite_difference_check(net, x, 1e-5) < 1e-6);
}

TEST_CASE("activations: hand-checked values") {
  Layer leaky = Layer::activation(ActKind::leaky_relu, 0.2);
  Tensor x({1, 2}, {-1.0, 3.0});
  Tensor y = activation_apply(leaky, x, Mode::forward);
  CHECK(y[0] == doctest::Approx(-0.2));
  CHECK(y[1] == 3.0);

  Layer th = Layer::activation(ActKind::tanh);
  Tensor z({1, 1}, {0.0});
  CHECK(activation_apply(th, z, Mode::forward)[0] == 0.0);
}

TEST_CASE("sigmoid derivative at zero is 0.25, matching finite differences") {
  Layer sig = Layer::activation(ActKind::sigmoid);
  Tensor x({1, 1}, {0.0});
  activation_apply(sig, x, Mode::forward);
  Tensor up({1, 1}, {1.0});
  Tensor grad = activation_apply(sig, up, Mode::backward);
  const double eps = 1e-6;
  auto s = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  const double fd = (s(eps) - s(-eps)) / (2.0 * eps);
  CHECK(grad[0] == doctest::Approx(0.25).epsilon(1e-10));
  CHECK(grad[0] == doctest::Approx(fd).epsilon(1e-8));
}

TEST_CASE("leaky_relu slope is validated") {
  CHECK_THROWS_AS(Layer::activation(ActKind::leaky_relu, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(Layer::activation(ActKind::leaky_relu, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(Layer::conv2d(1, 1, 3, 0), std::invalid_argument);
}

TEST_CASE("reshape round-trips shapes and validates sizes") {
  Layer r = Layer::reshape({2, 3});
  Tensor x({4, 6});
  Tensor y = reshape_apply(r, x, Mode::forward);
  CHECK(y.shape == std::vector<int>{4, 2, 3});
  Tensor gx = reshape_apply(r, y, Mode::backward);
  CHECK(gx.shape == x.shape);
  Tensor bad({4, 7});
  CHECK_THROWS_AS(reshape_apply(r, bad, Mode::forward), std::invalid_argument);
}

TEST_CASE("finite_difference_check: linear net is exact to machine precision") {
  Rng rng(53);
  Net net;
  net.layers = {Layer::dense(3, 2)};
  randomize_layer(net.layers[0], rng);
  Tensor x = random_tensor({2, 3}, rng);
  CHECK(finite_difference_check(net, x, 1e-3) < 1e-10);
}

TEST_CASE("finite_difference_check: random 3-layer MLP passes at 1e-6") {
  Rng rng(59);
  Net net;
  net.layers = {Layer::dense(4, 6), Layer::activation(ActKind::tanh),
                Layer::dense(6, 5), Layer::activation(ActKind::sigmoid),
                Layer::dense(5, 2)};
  for (Layer& l : net.layers) randomize_layer(l, rng);
  Tensor x = random_tensor({3, 4}, rng);
  CHECK(finite_difference_check(net, x, 1e-5) < 1e-6);
}

TEST_CASE("finite_difference_check: corrupted gradient is caught (negative control)") {
  Rng rng(61);
  Net net;
  net.layers = {Layer::dense(4, 4), Layer::activation(ActKind::tanh), Layer::dense(4, 2)};
  for (Layer& l : net.layers) randomize_layer(l, rng);
  Tensor x = random_tensor({2, 4}, rng);
  CHECK(finite_difference_check(net, x, 1e-5, GradFault{0, 3, 1.05}) > 1e-2);
}

TEST_CASE("finite_difference_check validates eps range") {
  Net net;
  net.layers = {Layer::dense(2, 2)};
  Tensor x({1, 2});
  CHECK_THROWS_AS(finite_difference_check(net, x, 1e-8), std::invalid_argument);
  CHECK_THROWS_AS(finite_difference_check(net, x, 1e-2), std::invalid_argument);
}

TEST_CASE("property: every layer kind passes finite differences on random instances") {
  Rng rng(67);
  for (int trial = 0; trial < 12; ++trial) {
    Net net;
    Tensor x;
    switch (trial % 4) {
      case 0:
        net.layers = {Layer::dense(5, 4), Layer::activation(ActKind::leaky_relu, 0.2), Layer::dense(4, 2)};
        x = random_tensor({3, 5}, rng);
        break;
      case 1:
        net.layers = {Layer::conv2d(2, 3, 3, 1), Layer::activation(ActKind::relu)};
        x = random_tensor({2, 2, 5, 5}, rng);
        break;
      case 2:
        net.layers = {Layer::conv2d_transpose(2, 2, 2, 2), Layer::activation(ActKind::tanh)};
        x = random_tensor({2, 2, 3, 3}, rng);
        break;
      case 3:
        net.layers = {Layer::dense(6, 8), Layer::activation(ActKind::relu), Layer::reshape({2, 2, 2}),
                      Layer::conv2d_transpose(2, 1, 2, 2), Layer::activation(ActKind::tanh)};
        x = random_tensor({2, 6}, rng);
        break;
    }
    for (Layer& l : net.layers) {
      if (l.has_params()) randomize_layer(l, rng);
    }
    CHECK(finite_difference_check(net, x, 1e-5) < 1e-5);
  }
}

TEST_CASE("property: forward passes are pure (bit-identical on identical inputs)") {
  Rng rng(71);
  Net net;
  net.layers = {Layer::conv2d(1, 2, 3, 2), Layer::activation(ActKind::leaky_relu, 0.2),
                Layer::dense(2 * 3 * 3, 4), Layer::activation(ActKind::tanh)};
  for (Layer& l : net.layers) {
    if (l.has_params()) randomize_layer(l, rng);
  }
  Tensor x = random_tensor({2, 1, 8, 8}, rng);
  Tensor y1 = net.forward(x);
  Tensor y2 = net.forward(x);
  CHECK(y1.data == y2.data);
}
