#pragma once

#include <memory>
#include <vector>

#include "mid/layers.hpp"
#include "mid/tensor.hpp"

namespace mid {

enum class ModelKind { Image, Points };
enum class NoiseMode { Regression, Classification };

std::string model_kind_name(ModelKind k);
ModelKind model_kind_from_name(const std::string& s);
std::string noise_mode_name(NoiseMode m);
NoiseMode noise_mode_from_name(const std::string& s);

/// Desk-scale architecture knobs for both networks.
struct ModelSpec {
  ModelKind kind = ModelKind::Image;
  NoiseMode mode = NoiseMode::Regression;
  std::size_t image_h = 16;
  std::size_t image_w = 16;
  std::size_t psi_channels = 12;   // image step net conv width
  std::size_t psi_hidden = 16;     // step net FC width
  std::size_t phi_channels = 16;   // image noise net conv width
  std::size_t point_hidden = 48;   // points trunk width

  void validate() const;
};

namespace detail {

// Sequential chain of vocabulary layers plus a CHW->[HW,C] transpose glue
// stage used to feed conv features into the point pooling layer.
struct Stage {
  enum class Op { Layer, TransposeChw };
  Op op = Op::Layer;
  LayerSpec spec;
  LayerParams params;
  LayerCache cache;
  std::vector<std::size_t> cached_in_shape;  // TransposeChw
};

class Stack {
 public:
  void add(LayerSpec spec, const std::string& name, Rng& rng);
  void add_transpose();
  Tensor forward(const Tensor& x, double step_value);
  Tensor backward(const Tensor& upstream);
  void collect_params(std::vector<Param*>& out);

  std::vector<Stage> stages;
};

}  // namespace detail

/// Step-prediction network. Maps a state to a scalar in (0,1), read as t/T.
class StepPredictor {
 public:
  StepPredictor(const ModelSpec& spec, Rng& rng);

  double predict(const Tensor& s);

  // Training interface: forward keeps caches, backward accumulates grads.
  double forward(const Tensor& s);
  void backward(double upstream);

  std::vector<Param*> params();
  const ModelSpec& spec() const { return spec_; }

 private:
  ModelSpec spec_;
  detail::Stack stack_;
};

/// Noise-prediction network conditioned on the normalized step. Regression
/// mode outputs the predicted increment with the input's shape;
/// classification mode outputs one probability per point.
class NoisePredictor {
 public:
  NoisePredictor(const ModelSpec& spec, Rng& rng);

  Tensor predict(const Tensor& s_t, std::size_t t, std::size_t total_steps);

  Tensor forward(const Tensor& s_t, std::size_t t, std::size_t total_steps);
  void backward(const Tensor& upstream);

  std::vector<Param*> params();
  const ModelSpec& spec() const { return spec_; }

 private:
  ModelSpec spec_;
  detail::Stack trunk_;
  detail::Stack head_;   // Points only
  // cached point-mode intermediates
  Tensor cached_trunk_out_;
};

// Losses (unit-weight multi-task objective).
double loss_step(std::size_t t, std::size_t total_steps, double t_hat);
double loss_step_grad(std::size_t t, std::size_t total_steps, double t_hat);
double loss_noise_mse(const Tensor& eps, const Tensor& eps_hat);
Tensor loss_noise_mse_grad(const Tensor& eps, const Tensor& eps_hat);
double loss_noise_bce(const Tensor& labels, const Tensor& probs);
Tensor loss_noise_bce_grad(const Tensor& labels, const Tensor& probs);
double loss_total(double loss_noise, double loss_step);

}  // namespace mid
