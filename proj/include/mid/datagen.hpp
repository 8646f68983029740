#pragma once

#include <vector>

#include "mid/metrics.hpp"
#include "mid/rng.hpp"
#include "mid/tensor.hpp"

namespace mid {

/// Multi-line scene recipe. Defaults follow the 2D line-fitting evaluation
/// setup; the ranges are configurable so training corpora can use milder
/// contamination than the evaluation scenes.
struct SceneSpec {
  std::size_t n_lines = 2;             // 1..10
  std::size_t min_points = 40;         // per line
  std::size_t max_points = 100;
  double noise_std_lo = 0.007;         // perpendicular inlier jitter
  double noise_std_hi = 0.008;
  double outlier_fraction_lo = 0.40;   // fraction of total points
  double outlier_fraction_hi = 0.60;

  void validate() const;
};

struct Scene {
  Tensor points;             // [N,2] in the unit square, inliers first
  std::vector<int> labels;   // 0 inlier, 1 outlier
  std::vector<LineModel> lines;
  std::vector<int> line_index;  // per point, -1 for outliers
  double sigma = 0.0;
  double outlier_fraction = 0.0;
};

Scene gen_scene(const SceneSpec& spec, Rng& rng);

/// Smooth multi-scale texture with step edges, normalized to [0,1].
/// Returned as [1,H,W].
Tensor gen_texture_image(std::size_t width, std::size_t height, Rng& rng);

struct SignalSpec {
  double sample_rate = 1000.0;
  double duration_s = 2.0;
  double semg_band_lo_hz = 20.0;
  double semg_band_hi_hz = 150.0;
  double ecg_rate_hz = 1.2;       // beat rate
  double ecg_rate_jitter = 0.05;  // relative period jitter
  double ecg_amp_jitter = 0.1;    // relative amplitude jitter

  void validate() const;
};

struct SignalPair {
  Tensor semg;  // surrogate clean signal, zero mean
  Tensor ecg;   // surrogate interference, zero mean
};

SignalPair gen_signal_pair(const SignalSpec& spec, Rng& rng);

}  // namespace mid
