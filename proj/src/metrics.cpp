#include "mid/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mid {

namespace {
constexpr double kPi = 3.14159265358979323846;

double mean(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data) s += v;
  return s / static_cast<double>(x.numel());
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b))
    throw ConfigError(std::string(what) + ": shape mismatch " + shape_to_string(a.shape) +
                      " vs " + shape_to_string(b.shape));
}
}  // namespace

double power(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data) s += v * v;
  return s / static_cast<double>(x.numel());
}

double mse(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double d = a.data[i] - b.data[i];
    s += d * d;
  }
  return s / static_cast<double>(a.numel());
}

double psnr(const Tensor& clean, const Tensor& test, double max_value) {
  if (!(max_value > 0.0)) throw ConfigError("psnr: max_value must be > 0");
  const double e = mse(clean, test);
  if (e == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(max_value * max_value / e);
}

double ssim(const Tensor& clean, const Tensor& test, double max_value) {
  check_same_shape(clean, test, "ssim");
  const double c1 = (0.01 * max_value) * (0.01 * max_value);
  const double c2 = (0.03 * max_value) * (0.03 * max_value);
  const double n = static_cast<double>(clean.numel());
  const double mu_a = mean(clean), mu_b = mean(test);
  double var_a = 0.0, var_b = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < clean.numel(); ++i) {
    const double da = clean.data[i] - mu_a;
    const double db = test.data[i] - mu_b;
    var_a += da * da;
    var_b += db * db;
    cov += da * db;
  }
  var_a /= n;
  var_b /= n;
  cov /= n;
  const double lum = (2.0 * mu_a * mu_b + c1) / (mu_a * mu_a + mu_b * mu_b + c1);
  const double str = (2.0 * cov + c2) / (var_a + var_b + c2);
  return lum * str;
}

double recall_auc(const std::vector<double>& errors_deg, double e_max_deg) {
  if (!(e_max_deg > 0.0)) throw ConfigError("recall_auc: e_max must be > 0");
  if (errors_deg.empty()) throw ConfigError("recall_auc: empty error list");
  // Exact integral of the empirical recall step curve: each error below
  // e_max contributes (e_max - e)/n to the raw area.
  double area = 0.0;
  for (double e : errors_deg) {
    if (e < 0.0) throw ConfigError("recall_auc: negative error");
    if (e <= e_max_deg) area += e_max_deg - e;
  }
  return area / (e_max_deg * static_cast<double>(errors_deg.size()));
}

double maa(const std::vector<std::vector<double>>& errors_per_scene, double threshold) {
  if (errors_per_scene.empty()) throw ConfigError("maa: no scenes");
  double acc = 0.0;
  for (const auto& scene : errors_per_scene) {
    if (scene.empty()) throw ConfigError("maa: empty scene");
    double hits = 0.0;
    for (double e : scene)
      if (e < threshold) hits += 1.0;
    acc += hits / static_cast<double>(scene.size());
  }
  return acc / static_cast<double>(errors_per_scene.size());
}

double snr_improvement(const Tensor& noisy, const Tensor& denoised, const Tensor& noise_ref) {
  check_same_shape(noisy, denoised, "snr_improvement");
  check_same_shape(noisy, noise_ref, "snr_improvement");
  const double p_noise = power(noise_ref);
  if (!(p_noise > 0.0)) throw ConfigError("snr_improvement: zero noise power");
  return 10.0 * std::log10(power(noisy) / p_noise) -
         10.0 * std::log10(power(denoised) / p_noise);
}

double rmse(const Tensor& clean, const Tensor& test) { return std::sqrt(mse(clean, test)); }

Tensor arv(const Tensor& signal, std::size_t window) {
  if (window < 1 || signal.numel() < window)
    throw ConfigError("arv: need at least one full window");
  const std::size_t n_win = signal.numel() / window;
  Tensor out({n_win});
  for (std::size_t w = 0; w < n_win; ++w) {
    double s = 0.0;
    for (std::size_t i = 0; i < window; ++i) s += std::abs(signal.data[w * window + i]);
    out.data[w] = s / static_cast<double>(window);
  }
  return out;
}

Tensor mf(const Tensor& signal, std::size_t window, double sample_rate) {
  if (window < 2 || signal.numel() < window)
    throw ConfigError("mf: need at least one full window of length >= 2");
  const std::size_t n_win = signal.numel() / window;
  Tensor out({n_win});
  const std::size_t half = window / 2;
  for (std::size_t w = 0; w < n_win; ++w) {
    const double* x = signal.data.data() + w * window;
    double num = 0.0, den = 0.0;
    for (std::size_t k = 1; k <= half; ++k) {
      double re = 0.0, im = 0.0;
      for (std::size_t i = 0; i < window; ++i) {
        const double a = 2.0 * kPi * static_cast<double>(k * i) / static_cast<double>(window);
        re += x[i] * std::cos(a);
        im -= x[i] * std::sin(a);
      }
      const double p = re * re + im * im;
      const double f = static_cast<double>(k) * sample_rate / static_cast<double>(window);
      num += f * p;
      den += p;
    }
    out.data[w] = den > 0.0 ? num / den : 0.0;
  }
  return out;
}

SnrCnr snr_cnr(const Tensor& noisy, const Tensor& denoised) {
  check_same_shape(noisy, denoised, "snr_cnr");
  const double p_s = power(denoised);
  const double p_n = mse(noisy, denoised);
  const double mu_noisy = mean(noisy);
  double var_noisy = 0.0;
  for (double v : noisy.data) var_noisy += (v - mu_noisy) * (v - mu_noisy);
  var_noisy /= static_cast<double>(noisy.numel());
  const double sd = std::sqrt(var_noisy);
  if (!(sd > 0.0)) throw NumericError("snr_cnr: zero std of noisy input");
  SnrCnr out;
  out.snr_db = p_n > 0.0 ? 10.0 * std::log10(p_s / p_n)
                         : std::numeric_limits<double>::infinity();
  out.cnr = (mean(denoised) - mu_noisy) / sd;
  return out;
}

double LineModel::distance(double x, double y) const { return std::abs(nx * x + ny * y - d); }

double line_angular_error_deg(const LineModel& a, const LineModel& b) {
  const double dot = std::abs(a.nx * b.nx + a.ny * b.ny);
  return std::acos(std::clamp(dot, 0.0, 1.0)) * 180.0 / kPi;
}

namespace {

// Total-least-squares line through the given points.
LineModel tls_fit(const Tensor& pts, const std::vector<std::size_t>& idx) {
  double mx = 0.0, my = 0.0;
  for (auto i : idx) {
    mx += pts.at2(i, 0);
    my += pts.at2(i, 1);
  }
  const double n = static_cast<double>(idx.size());
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (auto i : idx) {
    const double dx = pts.at2(i, 0) - mx;
    const double dy = pts.at2(i, 1) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  // Normal = eigenvector of the smaller eigenvalue of the scatter matrix.
  const double tr = sxx + syy;
  const double det = sxx * syy - sxy * sxy;
  const double lam = tr / 2.0 - std::sqrt(std::max(tr * tr / 4.0 - det, 0.0));
  double nx, ny;
  if (std::abs(sxy) > 1e-18) {
    nx = lam - syy;
    ny = sxy;
  } else if (sxx <= syy) {
    nx = 1.0;
    ny = 0.0;
  } else {
    nx = 0.0;
    ny = 1.0;
  }
  const double norm = std::hypot(nx, ny);
  LineModel m;
  m.nx = nx / norm;
  m.ny = ny / norm;
  m.d = m.nx * mx + m.ny * my;
  return m;
}

}  // namespace

std::vector<LineModel> sequential_line_fit(const Tensor& points, std::size_t n_models,
                                           double inlier_tol, Rng& rng,
                                           std::size_t iterations) {
  if (points.rank() != 2 || points.shape[1] != 2)
    throw ConfigError("sequential_line_fit: expected [N,2], got " +
                      shape_to_string(points.shape));
  if (n_models < 1) throw ConfigError("sequential_line_fit: n_models must be >= 1");
  if (points.shape[0] < 2) return {};

  std::vector<std::size_t> active(points.shape[0]);
  for (std::size_t i = 0; i < active.size(); ++i) active[i] = i;

  std::vector<LineModel> models;
  for (std::size_t m = 0; m < n_models; ++m) {
    if (active.size() < 2) break;
    LineModel best;
    std::size_t best_count = 0;
    for (std::size_t it = 0; it < iterations; ++it) {
      const std::size_t a = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(active.size()) - 1));
      std::size_t b = a;
      while (b == a)
        b = static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(active.size()) - 1));
      const double x1 = points.at2(active[a], 0), y1 = points.at2(active[a], 1);
      const double x2 = points.at2(active[b], 0), y2 = points.at2(active[b], 1);
      const double dx = x2 - x1, dy = y2 - y1;
      const double len = std::hypot(dx, dy);
      if (len < 1e-12) continue;
      LineModel cand;
      cand.nx = -dy / len;
      cand.ny = dx / len;
      cand.d = cand.nx * x1 + cand.ny * y1;
      std::size_t count = 0;
      for (auto i : active)
        if (cand.distance(points.at2(i, 0), points.at2(i, 1)) <= inlier_tol) ++count;
      if (count > best_count) {
        best_count = count;
        best = cand;
      }
    }
    if (best_count < 2) break;
    // Refine on the consensus set, then recollect inliers.
    std::vector<std::size_t> consensus;
    for (auto i : active)
      if (best.distance(points.at2(i, 0), points.at2(i, 1)) <= inlier_tol)
        consensus.push_back(i);
    LineModel refined = tls_fit(points, consensus);
    refined.inliers.clear();
    std::vector<std::size_t> remaining;
    for (auto i : active) {
      if (refined.distance(points.at2(i, 0), points.at2(i, 1)) <= inlier_tol)
        refined.inliers.push_back(i);
      else
        remaining.push_back(i);
    }
    if (refined.inliers.size() < 2) {
      // refinement collapsed; fall back to the raw consensus line
      refined = best;
      refined.inliers = consensus;
      remaining.clear();
      for (auto i : active)
        if (std::find(consensus.begin(), consensus.end(), i) == consensus.end())
          remaining.push_back(i);
    }
    models.push_back(refined);
    active = std::move(remaining);
  }
  return models;
}

}  // namespace mid
