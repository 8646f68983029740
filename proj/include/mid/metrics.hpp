#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mid/rng.hpp"
#include "mid/tensor.hpp"

namespace mid {

/// Mean squared magnitude, P = (1/L) * sum |x|^2.
double power(const Tensor& x);

double mse(const Tensor& a, const Tensor& b);

/// 10*log10(max^2 / MSE); identical inputs yield the +infinity sentinel.
double psnr(const Tensor& clean, const Tensor& test, double max_value);

/// Full-image-statistics SSIM with C1=(0.01*max)^2, C2=(0.03*max)^2.
double ssim(const Tensor& clean, const Tensor& test, double max_value);

/// Area under the recall-vs-error step curve over [0, e_max], normalized by
/// e_max so a perfect method scores 1.0.
double recall_auc(const std::vector<double>& errors_deg, double e_max_deg);

/// Mean over scenes of the per-scene fraction of errors below the threshold.
double maa(const std::vector<std::vector<double>>& errors_per_scene, double threshold);

/// 10 log10(P_noisy/P_noise) - 10 log10(P_denoise/P_noise), in dB.
double snr_improvement(const Tensor& noisy, const Tensor& denoised, const Tensor& noise_ref);

double rmse(const Tensor& clean, const Tensor& test);

/// Per-window average rectified value; window must divide the signal length
/// into at least one full window (trailing remainder is dropped).
Tensor arv(const Tensor& signal, std::size_t window);

/// Per-window mean frequency of the one-sided power spectrum, DC excluded.
Tensor mf(const Tensor& signal, std::size_t window, double sample_rate);

struct SnrCnr {
  double snr_db;  // +infinity sentinel when residual power is zero
  double cnr;
};
SnrCnr snr_cnr(const Tensor& noisy, const Tensor& denoised);

/// 2D line n.x == d with unit normal, plus its consensus set.
struct LineModel {
  double nx = 0.0, ny = 1.0;
  double d = 0.0;
  std::vector<std::size_t> inliers;

  double distance(double x, double y) const;
};

/// Angular difference between two lines in degrees, modulo 180.
double line_angular_error_deg(const LineModel& a, const LineModel& b);

/// Greedy sequential RANSAC: repeatedly fit the max-consensus 2-point line,
/// refine on its inliers, remove them, and continue. Stops early when fewer
/// than 2 points remain.
std::vector<LineModel> sequential_line_fit(const Tensor& points, std::size_t n_models,
                                           double inlier_tol, Rng& rng,
                                           std::size_t iterations = 256);

/// Named scalar metrics plus reproducibility metadata.
struct MetricReport {
  std::map<std::string, double> values;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::size_t sample_count = 0;
};

}  // namespace mid
