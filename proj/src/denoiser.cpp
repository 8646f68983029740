#include "mid/denoiser.hpp"

#include <cmath>

namespace mid {

namespace {

StepFn step_fn(Checkpoint& ckpt) {
  return [&ckpt](const Tensor& s) { return ckpt.psi->predict(s); };
}

NoiseFn noise_fn(Checkpoint& ckpt) {
  return [&ckpt](const Tensor& s, std::size_t t) {
    return ckpt.phi->predict(s, t, ckpt.process.total_steps);
  };
}

std::size_t round_step(double psi_out, std::size_t total_steps) {
  // round-half-away-from-zero, then clamp to [0, T]
  const double scaled = psi_out * static_cast<double>(total_steps);
  const double rounded = std::round(scaled);
  if (rounded <= 0.0) return 0;
  const auto t = static_cast<std::size_t>(rounded);
  return t > total_steps ? total_steps : t;
}

}  // namespace

std::size_t estimate_step(const StepFn& psi, const Tensor& s, std::size_t total_steps) {
  return round_step(psi(s), total_steps);
}

std::size_t estimate_step(Checkpoint& ckpt, const Tensor& s) {
  return estimate_step(step_fn(ckpt), s, ckpt.process.total_steps);
}

DenoiseResult denoise(const StepFn& psi, const NoiseFn& phi, const Tensor& s,
                      std::size_t total_steps) {
  DenoiseResult result;
  result.t_hat = estimate_step(psi, s, total_steps);
  Tensor state = s;
  for (std::size_t t = result.t_hat; t >= 1; --t) {
    state -= phi(state, t);
    if (!state.all_finite())
      throw NumericError("denoise: non-finite state at step " + std::to_string(t));
    result.trace.push_back(state);
  }
  result.output = std::move(state);
  return result;
}

DenoiseResult denoise(Checkpoint& ckpt, const Tensor& s) {
  if (ckpt.model.mode != NoiseMode::Regression)
    throw ConfigError("denoise: checkpoint is not regression-mode");
  return denoise(step_fn(ckpt), noise_fn(ckpt), s, ckpt.process.total_steps);
}

DenoiseResult denoise_oneshot(const StepFn& psi, const NoiseFn& phi, const Tensor& s,
                              std::size_t total_steps) {
  DenoiseResult result;
  result.t_hat = estimate_step(psi, s, total_steps);
  Tensor state = s;
  if (result.t_hat >= 1) {
    state -= phi(state, result.t_hat);
    if (!state.all_finite())
      throw NumericError("denoise_oneshot: non-finite state at step " +
                         std::to_string(result.t_hat));
    result.trace.push_back(state);
  }
  result.output = std::move(state);
  return result;
}

DenoiseResult denoise_oneshot(Checkpoint& ckpt, const Tensor& s) {
  if (ckpt.model.mode != NoiseMode::Regression)
    throw ConfigError("denoise_oneshot: checkpoint is not regression-mode");
  return denoise_oneshot(step_fn(ckpt), noise_fn(ckpt), s, ckpt.process.total_steps);
}

namespace {

PointPartition prune(const StepFn& psi, const NoiseFn& phi, const Tensor& points,
                     std::size_t total_steps, double threshold, bool oneshot) {
  if (points.rank() != 2 || points.shape[1] != 2)
    throw ConfigError("denoise_points: expected [N,2], got " + shape_to_string(points.shape));
  PointPartition part;
  const std::size_t n = points.shape[0];
  if (n == 0) {
    part.kept = Tensor({0, 2});
    part.removed = Tensor({0, 2});
    return part;
  }
  part.t_hat = estimate_step(psi, points, total_steps);
  std::vector<std::size_t> active(n);
  for (std::size_t i = 0; i < n; ++i) active[i] = i;

  for (std::size_t t = part.t_hat; t >= 1 && !active.empty(); --t) {
    Tensor state({active.size(), 2});
    for (std::size_t i = 0; i < active.size(); ++i) {
      state.at2(i, 0) = points.at2(active[i], 0);
      state.at2(i, 1) = points.at2(active[i], 1);
    }
    Tensor probs = phi(state, t);
    if (probs.numel() != active.size())
      throw NumericError("denoise_points: predictor returned " +
                         std::to_string(probs.numel()) + " probabilities for " +
                         std::to_string(active.size()) + " points");
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < active.size(); ++i) {
      if (probs.data[i] > threshold)
        part.removed_idx.push_back(active[i]);
      else
        keep.push_back(active[i]);
    }
    active = std::move(keep);
    if (oneshot) break;
  }

  part.kept_idx = active;
  part.kept = Tensor({part.kept_idx.size(), 2});
  for (std::size_t i = 0; i < part.kept_idx.size(); ++i) {
    part.kept.at2(i, 0) = points.at2(part.kept_idx[i], 0);
    part.kept.at2(i, 1) = points.at2(part.kept_idx[i], 1);
  }
  part.removed = Tensor({part.removed_idx.size(), 2});
  for (std::size_t i = 0; i < part.removed_idx.size(); ++i) {
    part.removed.at2(i, 0) = points.at2(part.removed_idx[i], 0);
    part.removed.at2(i, 1) = points.at2(part.removed_idx[i], 1);
  }
  return part;
}

}  // namespace

PointPartition denoise_points(const StepFn& psi, const NoiseFn& phi, const Tensor& points,
                              std::size_t total_steps, double threshold) {
  return prune(psi, phi, points, total_steps, threshold, false);
}

PointPartition denoise_points(Checkpoint& ckpt, const Tensor& points, double threshold) {
  if (ckpt.model.mode != NoiseMode::Classification)
    throw ConfigError("denoise_points: checkpoint is not classification-mode");
  return prune(step_fn(ckpt), noise_fn(ckpt), points, ckpt.process.total_steps, threshold,
               false);
}

PointPartition denoise_points_oneshot(const StepFn& psi, const NoiseFn& phi,
                                      const Tensor& points, std::size_t total_steps,
                                      double threshold) {
  return prune(psi, phi, points, total_steps, threshold, true);
}

PointPartition denoise_points_oneshot(Checkpoint& ckpt, const Tensor& points,
                                      double threshold) {
  if (ckpt.model.mode != NoiseMode::Classification)
    throw ConfigError("denoise_points: checkpoint is not classification-mode");
  return prune(step_fn(ckpt), noise_fn(ckpt), points, ckpt.process.total_steps, threshold,
               true);
}

}  // namespace mid
