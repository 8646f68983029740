#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mid/rng.hpp"
#include "mid/tensor.hpp"

namespace mid {

enum class NoiseKind {
  GaussianAdditive,
  MultiplicativeLog,
  PoissonLike,
  OutlierPoints,
  SignalInterference,
};

std::string noise_kind_name(NoiseKind k);
NoiseKind noise_kind_from_name(const std::string& s);

/// Per-step magnitudes at or below this threshold produce an identity step
/// with exactly zero effective noise ("zero-noise" test mode).
inline constexpr double kZeroNoiseThreshold = 1e-290;

/// Declarative description of a forward noising process.
struct NoiseProcessSpec {
  NoiseKind kind = NoiseKind::GaussianAdditive;
  std::size_t total_steps = 10;
  // sigma_t for gaussian/log kinds, photon scale lambda_t for poisson-like,
  // injected point count n_t for outlier-points, SNR decrement (dB) for
  // signal-interference.
  std::vector<double> per_step_magnitude;

  // outlier-points payload: sampling bounds {lo_x, lo_y, hi_x, hi_y}
  std::array<double, 4> bounds{0.0, 0.0, 1.0, 1.0};

  // signal-interference payload
  Tensor interference_template;
  double interference_start_snr_db = 40.0;  // cumulative SNR before step 1
  double reference_power = 1.0;             // clean-signal power the schedule refers to

  void validate() const;

  /// Constant per-step sigma so the cumulative std over T steps is sigma_total.
  static NoiseProcessSpec gaussian(std::size_t steps, double sigma_total);
  static NoiseProcessSpec multiplicative_log(std::size_t steps, double sigma_step);
  static NoiseProcessSpec poisson_like(std::size_t steps, double photon_scale);
  static NoiseProcessSpec outlier_points(std::size_t steps, std::size_t points_per_step,
                                         std::array<double, 4> bounds = {0, 0, 1, 1});
};

/// One training tuple. For regression kinds s_t == s_prev + eps_eff exactly
/// (eps_eff stores the realized difference). For outlier-points, eps_eff is a
/// 0/1 label per point of s_t marking exactly the points injected this step.
struct TrajectorySample {
  Tensor s_prev;
  Tensor s_t;
  Tensor eps_eff;
  std::size_t t = 0;
};

/// Counters incremented instead of raising for recoverable oddities.
struct NoiseWarnings {
  std::uint64_t negative_poisson_inputs = 0;
};

TrajectorySample noise_step(const Tensor& s_prev, std::size_t t, const NoiseProcessSpec& spec,
                            Rng& rng, NoiseWarnings* warnings = nullptr);

/// Composition of noise_step for steps 1..t; t == 0 returns s0 unchanged.
Tensor noise_to(const Tensor& s0, std::size_t t, const NoiseProcessSpec& spec, Rng& rng,
                NoiseWarnings* warnings = nullptr);

/// signal + alpha * interference with alpha chosen so
/// 10 log10(P_signal / P_scaled_interference) == snr_db exactly.
Tensor mix_at_snr(const Tensor& signal, const Tensor& interference, double snr_db);

// NoiseProcessSpec <-> bytes, embedded verbatim in checkpoints.
void spec_to_bytes(const NoiseProcessSpec& spec, std::vector<std::uint8_t>& out);
NoiseProcessSpec spec_from_bytes(const std::uint8_t* data, std::size_t size,
                                 std::size_t* consumed);

}  // namespace mid
