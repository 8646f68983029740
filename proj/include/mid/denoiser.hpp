#pragma once

#include <functional>
#include <vector>

#include "mid/tensor.hpp"
#include "mid/trainer.hpp"

namespace mid {

/// Step estimator: returns the normalized step in (0,1).
using StepFn = std::function<double(const Tensor&)>;
/// Noise estimator: predicted increment (regression) or per-point noise
/// probability (classification) at step t.
using NoiseFn = std::function<Tensor(const Tensor&, std::size_t)>;

/// clamp(round(psi(s) * T), 0, T); rounding is half-away-from-zero.
std::size_t estimate_step(const StepFn& psi, const Tensor& s, std::size_t total_steps);
std::size_t estimate_step(Checkpoint& ckpt, const Tensor& s);

struct DenoiseResult {
  Tensor output;
  std::vector<Tensor> trace;  // state after each subtraction, length == t_hat
  std::size_t t_hat = 0;
};

/// Iterative subtraction from the estimated step down to 1.
DenoiseResult denoise(const StepFn& psi, const NoiseFn& phi, const Tensor& s,
                      std::size_t total_steps);
DenoiseResult denoise(Checkpoint& ckpt, const Tensor& s);

/// Ablation baseline: exactly one prediction/subtraction at the estimated
/// step (identity when t_hat == 0).
DenoiseResult denoise_oneshot(const StepFn& psi, const NoiseFn& phi, const Tensor& s,
                              std::size_t total_steps);
DenoiseResult denoise_oneshot(Checkpoint& ckpt, const Tensor& s);

struct PointPartition {
  Tensor kept;                        // [K,2]
  Tensor removed;                     // [R,2]
  std::vector<std::size_t> kept_idx;  // indices into the input point set
  std::vector<std::size_t> removed_idx;
  std::size_t t_hat = 0;
};

/// Classification-mode loop: at each step, points with predicted noise
/// probability above the threshold are removed and never re-admitted.
PointPartition denoise_points(const StepFn& psi, const NoiseFn& phi, const Tensor& points,
                              std::size_t total_steps, double threshold = 0.5);
PointPartition denoise_points(Checkpoint& ckpt, const Tensor& points,
                              double threshold = 0.5);

/// Single-pass pruning counterpart of denoise_oneshot.
PointPartition denoise_points_oneshot(const StepFn& psi, const NoiseFn& phi,
                                      const Tensor& points, std::size_t total_steps,
                                      double threshold = 0.5);
PointPartition denoise_points_oneshot(Checkpoint& ckpt, const Tensor& points,
                                      double threshold = 0.5);

}  // namespace mid
