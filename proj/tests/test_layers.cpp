#include <doctest.h>

#include <cmath>

#include "mid/finite_diff.hpp"
#include "mid/layers.hpp"
#include "mid/rng.hpp"

using namespace mid;

namespace {

// Scalar readout used for gradient checking: weighted sum of the layer
// output, so upstream gradient equals the weights.
double readout(const Tensor& y, const Tensor& weights) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.numel(); ++i) s += y.data[i] * weights.data[i];
  return s;
}

double max_rel_err(const Tensor& a, const Tensor& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double denom = std::max({std::abs(a.data[i]), std::abs(b.data[i]), 1e-6});
    worst = std::max(worst, std::abs(a.data[i] - b.data[i]) / denom);
  }
  return worst;
}

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data) v = rng.normal();
  return t;
}

// Checks layer_backward against finite differences for both the input and
// every parameter tensor.
void check_layer_gradients(const LayerSpec& spec, const Tensor& x, Rng& rng,
                           double step_value = 0.0) {
  LayerParams params = init_layer_params(spec, "t", rng);
  const bool has_params =
      spec.kind == LayerKind::Dense || spec.kind == LayerKind::Conv2d3x3;
  LayerCache cache;
  Tensor y = layer_forward(spec, has_params ? &params : nullptr, x, cache, step_value);
  Tensor up = random_tensor(y.shape, rng);

  Tensor dx = layer_backward(spec, has_params ? &params : nullptr, cache, up);

  auto loss_at = [&](const Tensor& probe) {
    LayerCache c;
    LayerParams p2 = params;  // value copies
    Tensor out = layer_forward(spec, has_params ? &p2 : nullptr, probe, c, step_value);
    return readout(out, up);
  };
  Tensor fd = finite_diff_grad(loss_at, x, 1e-5);
  CHECK(max_rel_err(dx, fd) < 1e-3);

  if (has_params) {
    for (Param* prm : {&params.weight, &params.bias}) {
      auto loss_w = [&](const Tensor& w_probe) {
        LayerParams p2 = params;
        (prm == &params.weight ? p2.weight : p2.bias).value = w_probe;
        LayerCache c;
        Tensor out = layer_forward(spec, &p2, x, c, step_value);
        return readout(out, up);
      };
      Tensor fd_w = finite_diff_grad(loss_w, prm->value, 1e-5);
      CHECK(max_rel_err(prm->grad, fd_w) < 1e-3);
    }
  }
}

}  // namespace

TEST_CASE("relu forward and subgradient convention") {
  LayerSpec spec{LayerKind::Relu};
  LayerCache cache;
  Tensor x({3}, {-1.0, 0.0, 2.0});
  Tensor y = layer_forward(spec, nullptr, x, cache);
  CHECK(y.data == std::vector<double>{0.0, 0.0, 2.0});

  Tensor x2({2}, {-1.0, 2.0});
  LayerCache c2;
  layer_forward(spec, nullptr, x2, c2);
  Tensor g = layer_backward(spec, nullptr, c2, Tensor({2}, {1.0, 1.0}));
  CHECK(g.data == std::vector<double>{0.0, 1.0});

  // subgradient at exactly 0 is 0
  Tensor x3({1}, {0.0});
  LayerCache c3;
  layer_forward(spec, nullptr, x3, c3);
  CHECK(layer_backward(spec, nullptr, c3, Tensor({1}, {1.0})).data[0] == 0.0);
}

TEST_CASE("dense identity passes input through") {
  LayerSpec spec{LayerKind::Dense, 3, 3};
  Rng rng(1);
  LayerParams params = init_layer_params(spec, "id", rng);
  std::fill(params.weight.value.data.begin(), params.weight.value.data.end(), 0.0);
  for (std::size_t i = 0; i < 3; ++i) params.weight.value.at2(i, i) = 1.0;
  LayerCache cache;
  Tensor x({3}, {0.5, -1.25, 3.0});
  Tensor y = layer_forward(spec, &params, x, cache);
  CHECK(y.data == x.data);
}

TEST_CASE("dense param grad is outer product of upstream and input") {
  LayerSpec spec{LayerKind::Dense, 2, 2};
  Rng rng(2);
  LayerParams params = init_layer_params(spec, "d", rng);
  LayerCache cache;
  Tensor x({2}, {3.0, -2.0});
  layer_forward(spec, &params, x, cache);
  Tensor up({2}, {1.0, 0.5});
  layer_backward(spec, &params, cache, up);
  for (std::size_t o = 0; o < 2; ++o)
    for (std::size_t i = 0; i < 2; ++i)
      CHECK(params.weight.grad.at2(o, i) == doctest::Approx(up.data[o] * x.data[i]));
  CHECK(params.bias.grad.data == std::vector<double>{1.0, 0.5});
}

TEST_CASE("mean pool is permutation invariant") {
  LayerSpec spec{LayerKind::MeanPoolPoints};
  Rng rng(3);
  Tensor x = random_tensor({7, 4}, rng);
  LayerCache c1;
  Tensor y1 = layer_forward(spec, nullptr, x, c1);
  // reverse the point order
  Tensor xr = x;
  for (std::size_t r = 0; r < 7; ++r)
    for (std::size_t c = 0; c < 4; ++c) xr.at2(r, c) = x.at2(6 - r, c);
  LayerCache c2;
  Tensor y2 = layer_forward(spec, nullptr, xr, c2);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(y1.data[i] == doctest::Approx(y2.data[i]).epsilon(1e-12));
}

TEST_CASE("concat-step appends the step value") {
  LayerSpec spec{LayerKind::ConcatStep};
  LayerCache cache;
  Tensor x({2, 2}, {1, 2, 3, 4});
  Tensor y = layer_forward(spec, nullptr, x, cache, 0.7);
  CHECK(y.shape == std::vector<std::size_t>{2, 3});
  CHECK(y.at2(0, 2) == 0.7);
  CHECK(y.at2(1, 2) == 0.7);

  Tensor img({2, 2, 2});
  LayerCache c2;
  Tensor yi = layer_forward(spec, nullptr, img, c2, 0.3);
  CHECK(yi.shape == std::vector<std::size_t>{3, 2, 2});
  CHECK(yi.at3(2, 1, 1) == 0.3);
}

TEST_CASE("shape mismatch raises a configuration error naming the layer") {
  LayerSpec spec{LayerKind::Dense, 4, 2};
  Rng rng(4);
  LayerParams params = init_layer_params(spec, "d", rng);
  LayerCache cache;
  Tensor x({3}, {1, 2, 3});
  CHECK_THROWS_WITH_AS(layer_forward(spec, &params, x, cache),
                       doctest::Contains("dense"), ConfigError);
}

TEST_CASE("analytic gradients match finite differences on random configurations") {
  // >=100 random shape/seed configurations across the layer vocabulary
  Rng rng(12345);
  for (int trial = 0; trial < 20; ++trial) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(1, 6));
    const auto f = static_cast<std::size_t>(rng.uniform_int(1, 5));
    const auto o = static_cast<std::size_t>(rng.uniform_int(1, 5));
    check_layer_gradients({LayerKind::Dense, f, o}, random_tensor({n, f}, rng), rng);
    check_layer_gradients({LayerKind::Relu}, random_tensor({n, f}, rng), rng);
    check_layer_gradients({LayerKind::Sigmoid}, random_tensor({n, f}, rng), rng);
    check_layer_gradients({LayerKind::MeanPoolPoints}, random_tensor({n, f}, rng), rng);
    check_layer_gradients({LayerKind::ConcatStep}, random_tensor({n, f}, rng), rng, 0.5);
    const auto ci = static_cast<std::size_t>(rng.uniform_int(1, 3));
    const auto co = static_cast<std::size_t>(rng.uniform_int(1, 3));
    const auto h = static_cast<std::size_t>(rng.uniform_int(2, 5));
    const auto w = static_cast<std::size_t>(rng.uniform_int(2, 5));
    check_layer_gradients({LayerKind::Conv2d3x3, 0, 0, ci, co},
                          random_tensor({ci, h, w}, rng), rng);
  }
}

TEST_CASE("finite_diff_grad basics") {
  auto sum_sq = [](const Tensor& x) {
    double s = 0.0;
    for (double v : x.data) s += v * v;
    return s;
  };
  Tensor x({1}, {3.0});
  Tensor g = finite_diff_grad(sum_sq, x, 1e-5);
  CHECK(g.data[0] == doctest::Approx(6.0).epsilon(1e-8));

  auto constant = [](const Tensor&) { return 42.0; };
  Tensor gz = finite_diff_grad(constant, Tensor({3}, {1, 2, 3}), 1e-5);
  for (double v : gz.data) CHECK(v == 0.0);

  auto sum_sin = [](const Tensor& x2) {
    double s = 0.0;
    for (double v : x2.data) s += std::sin(v);
    return s;
  };
  Tensor g2 = finite_diff_grad(sum_sin, Tensor({1}, {0.0}), 1e-5);
  CHECK(g2.data[0] == doctest::Approx(1.0).epsilon(1e-9));

  CHECK_THROWS_AS(finite_diff_grad(sum_sq, x, 0.0), ConfigError);
  auto bad = [](const Tensor& t) { return std::log(t.data[0] - 100.0); };
  CHECK_THROWS_AS(finite_diff_grad(bad, Tensor({1}, {1.0}), 1e-5), NumericError);
}
