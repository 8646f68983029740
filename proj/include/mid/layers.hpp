#pragma once

#include <optional>
#include <string>

#include "mid/optim.hpp"
#include "mid/rng.hpp"
#include "mid/tensor.hpp"

namespace mid {

// Fixed layer vocabulary. Output shape is a deterministic function of the
// input shape and the spec.
enum class LayerKind {
  Dense,            // [*, in] -> [*, out], shared weights over leading dim
  Conv2d3x3,        // [Cin,H,W] -> [Cout,H,W], zero "same" padding
  Relu,             // elementwise; subgradient at 0 is 0
  Sigmoid,          // elementwise
  MeanPoolPoints,   // [N,F] -> [F], mean over points
  ConcatStep,       // appends the normalized step as an extra feature/channel
};

struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  std::size_t in_dim = 0;   // Dense
  std::size_t out_dim = 0;  // Dense
  std::size_t in_ch = 0;    // Conv2d3x3
  std::size_t out_ch = 0;   // Conv2d3x3
};

std::string layer_kind_name(LayerKind k);

/// Weight/bias for Dense and Conv layers; empty for the rest.
struct LayerParams {
  Param weight;
  Param bias;
};

/// Glorot-uniform initialization, seeded.
LayerParams init_layer_params(const LayerSpec& spec, const std::string& name, Rng& rng);

struct LayerCache {
  Tensor input;
  Tensor output;
  double step_value = 0.0;  // ConcatStep only
};

/// Runs one layer; fills `cache` with what backward needs.
/// `step_value` is only read by ConcatStep.
Tensor layer_forward(const LayerSpec& spec, const LayerParams* params, const Tensor& x,
                     LayerCache& cache, double step_value = 0.0);

/// Vector-Jacobian product of the forward map. Parameter gradients are
/// accumulated into params->weight.grad / params->bias.grad when present.
Tensor layer_backward(const LayerSpec& spec, LayerParams* params, const LayerCache& cache,
                      const Tensor& upstream);

}  // namespace mid
