#include "mid/datagen.hpp"

#include <algorithm>
#include <cmath>

namespace mid {

namespace {
constexpr double kPi = 3.14159265358979323846;

void subtract_mean(Tensor& t) {
  double m = 0.0;
  for (double v : t.data) m += v;
  m /= static_cast<double>(t.numel());
  for (double& v : t.data) v -= m;
}
}  // namespace

void SceneSpec::validate() const {
  if (n_lines < 1 || n_lines > 10) throw ConfigError("scene: n_lines must be in [1,10]");
  if (min_points < 1 || max_points < min_points)
    throw ConfigError("scene: invalid points-per-line range");
  if (!(noise_std_lo > 0.0) || noise_std_hi < noise_std_lo)
    throw ConfigError("scene: invalid noise std range");
  if (outlier_fraction_lo < 0.0 || outlier_fraction_hi < outlier_fraction_lo ||
      outlier_fraction_hi >= 1.0)
    throw ConfigError("scene: invalid outlier fraction range");
}

Scene gen_scene(const SceneSpec& spec, Rng& rng) {
  spec.validate();
  Scene scene;
  scene.sigma = rng.uniform(spec.noise_std_lo, spec.noise_std_hi);
  scene.outlier_fraction = rng.uniform(spec.outlier_fraction_lo, spec.outlier_fraction_hi);

  // Segments span a good fraction of the unit square and lines are kept
  // angularly separated: short stubs and near-parallel pairs make the angular
  // error of any fit ill-conditioned regardless of outlier handling.
  constexpr double kMinSegmentLen = 0.8;
  constexpr double kMinSeparationDeg = 20.0;
  struct Segment {
    double x1, y1, x2, y2;
  };
  auto direction_deg = [](const Segment& s) {
    return std::atan2(s.y2 - s.y1, s.x2 - s.x1) * 180.0 / M_PI;
  };
  auto angular_gap = [&](const Segment& a, const Segment& b) {
    double d = std::fmod(std::abs(direction_deg(a) - direction_deg(b)), 180.0);
    return std::min(d, 180.0 - d);
  };
  std::vector<Segment> segments;
  for (std::size_t l = 0; l < spec.n_lines; ++l) {
    Segment seg{};
    bool ok = false;
    for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
      seg = {rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
      ok = std::hypot(seg.x2 - seg.x1, seg.y2 - seg.y1) >= kMinSegmentLen;
      for (const Segment& prev : segments)
        ok = ok && angular_gap(seg, prev) >= kMinSeparationDeg;
    }
    if (!ok) throw DataError("gen_scene: could not sample a well-separated segment");
    segments.push_back(seg);
  }

  std::vector<double> xy;
  for (std::size_t l = 0; l < spec.n_lines; ++l) {
    const auto& seg = segments[l];
    const double dx = seg.x2 - seg.x1, dy = seg.y2 - seg.y1;
    const double len = std::hypot(dx, dy);
    const double nx = -dy / len, ny = dx / len;

    LineModel line;
    line.nx = nx;
    line.ny = ny;
    line.d = nx * seg.x1 + ny * seg.y1;

    const auto count = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(spec.min_points),
                        static_cast<std::int64_t>(spec.max_points)));
    for (std::size_t p = 0; p < count; ++p) {
      const double u = rng.uniform();
      const double off = scene.sigma * rng.normal();
      xy.push_back(std::clamp(seg.x1 + u * dx + off * nx, 0.0, 1.0));
      xy.push_back(std::clamp(seg.y1 + u * dy + off * ny, 0.0, 1.0));
      line.inliers.push_back(scene.labels.size());
      scene.labels.push_back(0);
      scene.line_index.push_back(static_cast<int>(l));
    }
    scene.lines.push_back(std::move(line));
  }

  // outliers = round(f/(1-f) * inliers) so the final outlier share of the
  // total point count matches the drawn fraction
  const std::size_t n_inliers = scene.labels.size();
  const double f = scene.outlier_fraction;
  const auto n_outliers = static_cast<std::size_t>(
      std::llround(f / (1.0 - f) * static_cast<double>(n_inliers)));
  for (std::size_t p = 0; p < n_outliers; ++p) {
    xy.push_back(rng.uniform());
    xy.push_back(rng.uniform());
    scene.labels.push_back(1);
    scene.line_index.push_back(-1);
  }

  scene.points = Tensor({scene.labels.size(), 2}, std::move(xy));
  return scene;
}

Tensor gen_texture_image(std::size_t width, std::size_t height, Rng& rng) {
  if (width == 0 || height == 0) throw ConfigError("gen_texture_image: zero dimension");
  Tensor img({1, height, width});
  const int n_gratings = 6;
  for (int g = 0; g < n_gratings; ++g) {
    const double fx = rng.uniform(0.5, 3.5);
    const double fy = rng.uniform(0.5, 3.5);
    const double phase = rng.uniform(0.0, 2.0 * kPi);
    const double amp = 1.0 / (1.0 + fx + fy);
    for (std::size_t r = 0; r < height; ++r) {
      for (std::size_t c = 0; c < width; ++c) {
        const double arg = 2.0 * kPi * (fx * static_cast<double>(c) / static_cast<double>(width) +
                                        fy * static_cast<double>(r) / static_cast<double>(height)) +
                           phase;
        img.at3(0, r, c) += amp * std::sin(arg);
      }
    }
  }
  // a couple of straight step edges for structure
  for (int e = 0; e < 2; ++e) {
    const double nx = std::cos(rng.uniform(0.0, kPi));
    const double ny = std::sin(rng.uniform(0.0, kPi));
    const double d = rng.uniform(0.2, 0.8) * (nx + ny);
    const double step = rng.uniform(-0.5, 0.5);
    for (std::size_t r = 0; r < height; ++r)
      for (std::size_t c = 0; c < width; ++c) {
        const double px = (static_cast<double>(c) + 0.5) / static_cast<double>(width);
        const double py = (static_cast<double>(r) + 0.5) / static_cast<double>(height);
        if (nx * px + ny * py > d) img.at3(0, r, c) += step;
      }
  }
  double lo = img.data[0], hi = img.data[0];
  for (double v : img.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi - lo < 1e-9) {
    std::fill(img.data.begin(), img.data.end(), 0.5);
  } else {
    for (double& v : img.data) v = (v - lo) / (hi - lo);
  }
  return img;
}

void SignalSpec::validate() const {
  if (!(sample_rate > 0.0) || !(duration_s > 0.0))
    throw ConfigError("signal: sample_rate and duration must be positive");
  if (!(semg_band_lo_hz > 0.0) || semg_band_hi_hz <= semg_band_lo_hz ||
      semg_band_hi_hz >= sample_rate / 2.0)
    throw ConfigError("signal: invalid sEMG band");
  if (!(ecg_rate_hz > 0.0)) throw ConfigError("signal: ecg rate must be positive");
}

SignalPair gen_signal_pair(const SignalSpec& spec, Rng& rng) {
  spec.validate();
  const auto n = static_cast<std::size_t>(spec.sample_rate * spec.duration_s);
  if (n < 8) throw ConfigError("signal: too short");

  // Band-limited Gaussian surrogate: random-phase sum over the band's DFT
  // bins, shaped by a slow amplitude envelope.
  SignalPair pair;
  pair.semg = Tensor({n});
  const auto k_lo = static_cast<std::size_t>(
      std::ceil(spec.semg_band_lo_hz * static_cast<double>(n) / spec.sample_rate));
  const auto k_hi = static_cast<std::size_t>(
      std::floor(spec.semg_band_hi_hz * static_cast<double>(n) / spec.sample_rate));
  std::vector<double> amp(k_hi - k_lo + 1), phase(k_hi - k_lo + 1);
  for (std::size_t k = 0; k < amp.size(); ++k) {
    amp[k] = std::abs(rng.normal());
    phase[k] = rng.uniform(0.0, 2.0 * kPi);
  }
  const double env_phase = rng.uniform(0.0, 2.0 * kPi);
  for (std::size_t i = 0; i < n; ++i) {
    double v = 0.0;
    for (std::size_t k = 0; k < amp.size(); ++k) {
      const double f = static_cast<double>(k_lo + k) / static_cast<double>(n);
      v += amp[k] * std::cos(2.0 * kPi * f * static_cast<double>(i) + phase[k]);
    }
    const double env =
        0.6 + 0.4 * std::sin(2.0 * kPi * 1.5 * static_cast<double>(i) /
                                 static_cast<double>(n) +
                             env_phase);
    pair.semg.data[i] = v * env;
  }
  subtract_mean(pair.semg);
  // scale to unit RMS so SNR mixing starts from a known reference
  const double rms = std::sqrt(power(pair.semg));
  if (rms > 0.0)
    for (double& v : pair.semg.data) v /= rms;

  // Spike-template train: three-lobe QRS-like template repeated at the beat
  // period with rate and amplitude jitter.
  pair.ecg = Tensor({n});
  const double period = spec.sample_rate / spec.ecg_rate_hz;
  const double w1 = 0.025 * spec.sample_rate;
  const double w2 = 0.012 * spec.sample_rate;
  const double w3 = 0.030 * spec.sample_rate;
  auto template_at = [&](double u) {
    auto lobe = [](double x, double c, double w, double a) {
      const double z = (x - c) / w;
      return a * std::exp(-0.5 * z * z);
    };
    return lobe(u, -0.04 * spec.sample_rate, w1, -0.15) + lobe(u, 0.0, w2, 1.0) +
           lobe(u, 0.05 * spec.sample_rate, w3, -0.25);
  };
  double center = period * 0.5;
  while (center < static_cast<double>(n) + period) {
    const double amp_beat = 1.0 + spec.ecg_amp_jitter * rng.normal();
    const std::size_t lo = center > 4.0 * w3 ? static_cast<std::size_t>(center - 4.0 * w3) : 0;
    const std::size_t hi = std::min(n, static_cast<std::size_t>(center + 4.0 * w3) + 1);
    for (std::size_t i = lo; i < hi; ++i)
      pair.ecg.data[i] += amp_beat * template_at(static_cast<double>(i) - center);
    center += period * (1.0 + spec.ecg_rate_jitter * rng.normal());
  }
  subtract_mean(pair.ecg);
  return pair;
}

}  // namespace mid
