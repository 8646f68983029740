#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mid/tensor.hpp"

namespace mid {

/// One trainable tensor with its gradient and Adam moment buffers.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor adam_m;
  Tensor adam_v;
  std::uint64_t step_count = 0;

  Param() = default;
  Param(std::string n, Tensor v)
      : name(std::move(n)),
        value(std::move(v)),
        grad(Tensor::zeros(value.shape)),
        adam_m(Tensor::zeros(value.shape)),
        adam_v(Tensor::zeros(value.shape)) {}

  void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }
};

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Decoupled-weight-decay AdamW update over a param set. Grads are zeroed
/// and step counts incremented afterwards. A non-finite gradient aborts the
/// step before any parameter is touched.
void adamw_step(std::vector<Param*>& params, const AdamWConfig& cfg);
void adamw_step(std::vector<Param>& params, const AdamWConfig& cfg);

}  // namespace mid
