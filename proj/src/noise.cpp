#include "mid/noise.hpp"

#include <cmath>
#include <cstring>

#include "mid/io.hpp"
#include "mid/metrics.hpp"

namespace mid {

std::string noise_kind_name(NoiseKind k) {
  switch (k) {
    case NoiseKind::GaussianAdditive: return "gaussian-additive";
    case NoiseKind::MultiplicativeLog: return "multiplicative-log";
    case NoiseKind::PoissonLike: return "poisson-like";
    case NoiseKind::OutlierPoints: return "outlier-points";
    case NoiseKind::SignalInterference: return "signal-interference";
  }
  return "?";
}

NoiseKind noise_kind_from_name(const std::string& s) {
  if (s == "gaussian-additive") return NoiseKind::GaussianAdditive;
  if (s == "multiplicative-log") return NoiseKind::MultiplicativeLog;
  if (s == "poisson-like") return NoiseKind::PoissonLike;
  if (s == "outlier-points") return NoiseKind::OutlierPoints;
  if (s == "signal-interference") return NoiseKind::SignalInterference;
  throw ConfigError(
      "unknown noise kind '" + s +
      "' (accepted: gaussian-additive, multiplicative-log, poisson-like, outlier-points, "
      "signal-interference)");
}

void NoiseProcessSpec::validate() const {
  if (total_steps < 1) throw ConfigError("noise process: total_steps must be >= 1");
  if (per_step_magnitude.size() != total_steps)
    throw ConfigError("noise process: per_step_magnitude length " +
                      std::to_string(per_step_magnitude.size()) + " != total_steps " +
                      std::to_string(total_steps));
  for (double m : per_step_magnitude)
    if (!(m > 0.0)) throw ConfigError("noise process: per-step magnitudes must be > 0");
  if (kind == NoiseKind::OutlierPoints) {
    if (!(bounds[2] > bounds[0]) || !(bounds[3] > bounds[1]))
      throw ConfigError("noise process: degenerate outlier bounds");
  }
  if (kind == NoiseKind::SignalInterference) {
    if (interference_template.numel() == 0)
      throw ConfigError("noise process: signal-interference requires a template");
    if (!(reference_power > 0.0))
      throw ConfigError("noise process: reference_power must be > 0");
  }
}

NoiseProcessSpec NoiseProcessSpec::gaussian(std::size_t steps, double sigma_total) {
  NoiseProcessSpec s;
  s.kind = NoiseKind::GaussianAdditive;
  s.total_steps = steps;
  s.per_step_magnitude.assign(steps, sigma_total / std::sqrt(static_cast<double>(steps)));
  return s;
}

NoiseProcessSpec NoiseProcessSpec::multiplicative_log(std::size_t steps, double sigma_step) {
  NoiseProcessSpec s;
  s.kind = NoiseKind::MultiplicativeLog;
  s.total_steps = steps;
  s.per_step_magnitude.assign(steps, sigma_step);
  return s;
}

NoiseProcessSpec NoiseProcessSpec::poisson_like(std::size_t steps, double photon_scale) {
  NoiseProcessSpec s;
  s.kind = NoiseKind::PoissonLike;
  s.total_steps = steps;
  s.per_step_magnitude.assign(steps, photon_scale);
  return s;
}

NoiseProcessSpec NoiseProcessSpec::outlier_points(std::size_t steps,
                                                  std::size_t points_per_step,
                                                  std::array<double, 4> bounds) {
  NoiseProcessSpec s;
  s.kind = NoiseKind::OutlierPoints;
  s.total_steps = steps;
  s.per_step_magnitude.assign(steps, static_cast<double>(points_per_step));
  s.bounds = bounds;
  return s;
}

TrajectorySample noise_step(const Tensor& s_prev, std::size_t t, const NoiseProcessSpec& spec,
                            Rng& rng, NoiseWarnings* warnings) {
  spec.validate();
  if (t < 1 || t > spec.total_steps)
    throw ConfigError("noise_step: t=" + std::to_string(t) + " out of range [1," +
                      std::to_string(spec.total_steps) + "]");
  const double mag = spec.per_step_magnitude[t - 1];

  TrajectorySample out;
  out.t = t;
  out.s_prev = s_prev;

  if (mag <= kZeroNoiseThreshold && spec.kind != NoiseKind::OutlierPoints) {
    out.s_t = s_prev;
    out.eps_eff = Tensor::zeros(s_prev.shape);
    return out;
  }

  switch (spec.kind) {
    case NoiseKind::GaussianAdditive: {
      Tensor eps(s_prev.shape);
      for (double& v : eps.data) v = mag * rng.normal();
      out.s_t = s_prev + eps;
      out.eps_eff = std::move(eps);
      break;
    }
    case NoiseKind::MultiplicativeLog: {
      Tensor st = s_prev;
      for (double& v : st.data) v *= std::exp(mag * rng.normal());
      out.eps_eff = st - s_prev;  // realized Taylor-effective increment
      out.s_t = std::move(st);
      break;
    }
    case NoiseKind::PoissonLike: {
      Tensor st = s_prev;
      for (double& v : st.data) {
        double base = v;
        if (base < 0.0) {
          base = 0.0;
          if (warnings) warnings->negative_poisson_inputs += 1;
        }
        v = static_cast<double>(rng.poisson(mag * base)) / mag;
      }
      out.eps_eff = st - s_prev;
      out.s_t = std::move(st);
      break;
    }
    case NoiseKind::OutlierPoints: {
      if (s_prev.rank() != 2 || s_prev.shape[1] != 2)
        throw ConfigError("noise_step: outlier-points expects [N,2] state, got " +
                          shape_to_string(s_prev.shape));
      const std::size_t n_prev = s_prev.shape[0];
      const std::size_t n_add = static_cast<std::size_t>(std::llround(mag));
      Tensor st({n_prev + n_add, 2});
      std::copy(s_prev.data.begin(), s_prev.data.end(), st.data.begin());
      for (std::size_t i = 0; i < n_add; ++i) {
        st.at2(n_prev + i, 0) = rng.uniform(spec.bounds[0], spec.bounds[2]);
        st.at2(n_prev + i, 1) = rng.uniform(spec.bounds[1], spec.bounds[3]);
      }
      Tensor labels({n_prev + n_add});
      for (std::size_t i = 0; i < n_add; ++i) labels.data[n_prev + i] = 1.0;
      out.s_t = std::move(st);
      out.eps_eff = std::move(labels);
      break;
    }
    case NoiseKind::SignalInterference: {
      if (!s_prev.same_shape(spec.interference_template))
        throw ConfigError("noise_step: state shape " + shape_to_string(s_prev.shape) +
                          " != interference template " +
                          shape_to_string(spec.interference_template.shape));
      // Cumulative scale at step k makes SNR(reference_power vs scaled
      // template) equal start_snr - sum of decrements through k.
      const double p_tpl = power(spec.interference_template);
      if (!(p_tpl > 0.0)) throw ConfigError("noise_step: zero-power interference template");
      auto alpha_at = [&](std::size_t k) {
        if (k == 0) return 0.0;
        double snr = spec.interference_start_snr_db;
        for (std::size_t i = 0; i < k; ++i) snr -= spec.per_step_magnitude[i];
        return std::sqrt(spec.reference_power / (p_tpl * std::pow(10.0, snr / 10.0)));
      };
      const double delta = alpha_at(t) - alpha_at(t - 1);
      Tensor eps = spec.interference_template;
      eps *= delta;
      out.s_t = s_prev + eps;
      out.eps_eff = std::move(eps);
      break;
    }
  }
  return out;
}

Tensor noise_to(const Tensor& s0, std::size_t t, const NoiseProcessSpec& spec, Rng& rng,
                NoiseWarnings* warnings) {
  spec.validate();
  if (t > spec.total_steps)
    throw ConfigError("noise_to: t=" + std::to_string(t) + " out of range [0," +
                      std::to_string(spec.total_steps) + "]");
  Tensor s = s0;
  for (std::size_t k = 1; k <= t; ++k) s = noise_step(s, k, spec, rng, warnings).s_t;
  return s;
}

Tensor mix_at_snr(const Tensor& signal, const Tensor& interference, double snr_db) {
  if (!signal.same_shape(interference))
    throw ConfigError("mix_at_snr: shape mismatch " + shape_to_string(signal.shape) + " vs " +
                      shape_to_string(interference.shape));
  const double p_sig = power(signal);
  const double p_int = power(interference);
  if (!(p_int > 0.0)) throw ConfigError("mix_at_snr: zero-power interference");
  const double alpha = std::sqrt(p_sig / (p_int * std::pow(10.0, snr_db / 10.0)));
  Tensor scaled = interference;
  scaled *= alpha;
  return signal + scaled;
}

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<std::uint8_t>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put<std::uint64_t>(out, bits);
}

template <typename T>
T get(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return static_cast<T>(v);
}

double get_f64(const std::uint8_t* p) {
  std::uint64_t bits = get<std::uint64_t>(p);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void spec_to_bytes(const NoiseProcessSpec& spec, std::vector<std::uint8_t>& out) {
  put<std::uint16_t>(out, static_cast<std::uint16_t>(spec.kind));
  put<std::uint64_t>(out, spec.total_steps);
  for (double m : spec.per_step_magnitude) put_f64(out, m);
  for (double b : spec.bounds) put_f64(out, b);
  put_f64(out, spec.interference_start_snr_db);
  put_f64(out, spec.reference_power);
  const bool has_tpl = spec.interference_template.numel() > 0;
  put<std::uint8_t>(out, has_tpl ? 1 : 0);
  if (has_tpl) {
    auto blob = tensor_to_bytes(spec.interference_template);
    put<std::uint64_t>(out, blob.size());
    out.insert(out.end(), blob.begin(), blob.end());
  }
}

NoiseProcessSpec spec_from_bytes(const std::uint8_t* data, std::size_t size,
                                 std::size_t* consumed) {
  NoiseProcessSpec spec;
  std::size_t off = 0;
  auto need = [&](std::size_t n) {
    if (off + n > size) throw DataError("noise spec: truncated");
  };
  need(10);
  spec.kind = static_cast<NoiseKind>(get<std::uint16_t>(data + off));
  off += 2;
  spec.total_steps = static_cast<std::size_t>(get<std::uint64_t>(data + off));
  off += 8;
  need(8 * spec.total_steps);
  spec.per_step_magnitude.resize(spec.total_steps);
  for (auto& m : spec.per_step_magnitude) {
    m = get_f64(data + off);
    off += 8;
  }
  need(4 * 8 + 16 + 1);
  for (auto& b : spec.bounds) {
    b = get_f64(data + off);
    off += 8;
  }
  spec.interference_start_snr_db = get_f64(data + off);
  off += 8;
  spec.reference_power = get_f64(data + off);
  off += 8;
  const bool has_tpl = data[off] != 0;
  off += 1;
  if (has_tpl) {
    need(8);
    const auto blob_size = static_cast<std::size_t>(get<std::uint64_t>(data + off));
    off += 8;
    need(blob_size);
    std::size_t used = 0;
    spec.interference_template = tensor_from_bytes(data + off, blob_size, &used);
    off += blob_size;
  }
  if (consumed) *consumed = off;
  return spec;
}

}  // namespace mid
