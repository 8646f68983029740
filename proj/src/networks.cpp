#include "mid/networks.hpp"

#include <algorithm>
#include <cmath>

namespace mid {

std::string model_kind_name(ModelKind k) {
  return k == ModelKind::Image ? "image" : "points";
}

ModelKind model_kind_from_name(const std::string& s) {
  if (s == "image") return ModelKind::Image;
  if (s == "points") return ModelKind::Points;
  throw ConfigError("unknown model kind '" + s + "' (accepted: image, points)");
}

std::string noise_mode_name(NoiseMode m) {
  return m == NoiseMode::Regression ? "regression" : "classification";
}

NoiseMode noise_mode_from_name(const std::string& s) {
  if (s == "regression") return NoiseMode::Regression;
  if (s == "classification") return NoiseMode::Classification;
  throw ConfigError("unknown noise mode '" + s + "' (accepted: regression, classification)");
}

void ModelSpec::validate() const {
  if (kind == ModelKind::Image && mode != NoiseMode::Regression)
    throw ConfigError("model: image kind supports regression mode only");
  if (kind == ModelKind::Points && mode != NoiseMode::Classification)
    throw ConfigError("model: points kind supports classification mode only");
  if (kind == ModelKind::Image && (image_h == 0 || image_w == 0))
    throw ConfigError("model: image dimensions must be positive");
  if (psi_channels == 0 || psi_hidden == 0 || phi_channels == 0 || point_hidden == 0)
    throw ConfigError("model: widths must be positive");
}

namespace {

// Width of the per-point input embedding used by the point networks: raw
// coordinates plus scale-normalized nearest-neighbor distances and a local
// total-least-squares line residual/anisotropy. Pooling alone cannot resolve
// whether a point sits on a high-density structure, so the pairwise geometry a
// transformer trunk would recover through attention is supplied here as a
// deterministic featurization.
constexpr std::size_t kPointFeatures = 7;
constexpr std::size_t kNeighbors = 12;
constexpr double kFeatureCap = 8.0;

Tensor point_embed(const Tensor& s) {
  const std::size_t n = s.shape[0];
  Tensor out({n, kPointFeatures});
  const std::size_t m = std::min<std::size_t>(kNeighbors, n > 0 ? n - 1 : 0);

  std::vector<double> nn1(n, 0.0);
  std::vector<double> d1(n, 0.0), d3(n, 0.0), d6(n, 0.0);
  std::vector<double> resid(n, 0.0), aniso(n, 0.0);
  std::vector<std::pair<double, std::size_t>> dist;
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = s.at2(i, 0), yi = s.at2(i, 1);
    dist.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double dx = s.at2(j, 0) - xi, dy = s.at2(j, 1) - yi;
      dist.emplace_back(dx * dx + dy * dy, j);
    }
    if (m == 0) continue;
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(m - 1),
                     dist.end());
    std::sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(m));
    d1[i] = std::sqrt(dist[0].first);
    d3[i] = std::sqrt(dist[std::min<std::size_t>(2, m - 1)].first);
    d6[i] = std::sqrt(dist[std::min<std::size_t>(5, m - 1)].first);
    nn1[i] = d1[i];
    if (m < 2) continue;
    // total-least-squares line through the m nearest neighbors
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      mx += s.at2(dist[k].second, 0);
      my += s.at2(dist[k].second, 1);
    }
    mx /= static_cast<double>(m);
    my /= static_cast<double>(m);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const double ux = s.at2(dist[k].second, 0) - mx;
      const double uy = s.at2(dist[k].second, 1) - my;
      sxx += ux * ux;
      sxy += ux * uy;
      syy += uy * uy;
    }
    const double tr = sxx + syy;
    const double det = sxx * syy - sxy * sxy;
    const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
    const double l_max = tr / 2.0 + disc, l_min = tr / 2.0 - disc;
    // principal direction of the neighbor scatter; normal gives the residual
    double vx, vy;
    if (std::abs(sxy) > 1e-18) {
      vx = l_max - syy;
      vy = sxy;
    } else {
      vx = sxx >= syy ? 1.0 : 0.0;
      vy = sxx >= syy ? 0.0 : 1.0;
    }
    const double vn = std::hypot(vx, vy);
    if (vn > 0.0) {
      const double nx = -vy / vn, ny = vx / vn;
      resid[i] = std::abs(nx * (xi - mx) + ny * (yi - my));
    }
    aniso[i] = l_max > 0.0 ? std::max(0.0, l_min) / l_max : 0.0;
  }

  // scene scale: median nearest-neighbor distance
  std::vector<double> med_buf = nn1;
  double med = 1.0;
  if (n > 0) {
    std::nth_element(med_buf.begin(), med_buf.begin() + static_cast<std::ptrdiff_t>(n / 2),
                     med_buf.end());
    med = std::max(med_buf[n / 2], 1e-12);
  }

  for (std::size_t i = 0; i < n; ++i) {
    out.at2(i, 0) = s.at2(i, 0);
    out.at2(i, 1) = s.at2(i, 1);
    out.at2(i, 2) = std::min(d1[i] / med, kFeatureCap);
    out.at2(i, 3) = std::min(d3[i] / med, kFeatureCap);
    out.at2(i, 4) = std::min(d6[i] / med, kFeatureCap);
    out.at2(i, 5) = std::min(resid[i] / med, kFeatureCap);
    out.at2(i, 6) = aniso[i];
  }
  return out;
}

}  // namespace

namespace detail {

void Stack::add(LayerSpec spec, const std::string& name, Rng& rng) {
  Stage st;
  st.spec = spec;
  st.params = init_layer_params(spec, name, rng);
  stages.push_back(std::move(st));
}

void Stack::add_transpose() {
  Stage st;
  st.op = Stage::Op::TransposeChw;
  stages.push_back(std::move(st));
}

Tensor Stack::forward(const Tensor& x, double step_value) {
  Tensor cur = x;
  for (auto& st : stages) {
    if (st.op == Stage::Op::TransposeChw) {
      if (cur.rank() != 3)
        throw ConfigError("transpose stage expects [C,H,W], got " +
                          shape_to_string(cur.shape));
      st.cached_in_shape = cur.shape;
      const std::size_t C = cur.shape[0], HW = cur.shape[1] * cur.shape[2];
      Tensor y({HW, C});
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t p = 0; p < HW; ++p) y.at2(p, c) = cur.data[c * HW + p];
      cur = std::move(y);
    } else {
      const bool has_params = st.spec.kind == LayerKind::Dense ||
                              st.spec.kind == LayerKind::Conv2d3x3;
      cur = layer_forward(st.spec, has_params ? &st.params : nullptr, cur, st.cache,
                          step_value);
    }
  }
  return cur;
}

Tensor Stack::backward(const Tensor& upstream) {
  Tensor grad = upstream;
  for (auto it = stages.rbegin(); it != stages.rend(); ++it) {
    if (it->op == Stage::Op::TransposeChw) {
      const auto& s = it->cached_in_shape;
      const std::size_t C = s[0], HW = s[1] * s[2];
      Tensor g(s);
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t p = 0; p < HW; ++p) g.data[c * HW + p] = grad.at2(p, c);
      grad = std::move(g);
    } else {
      const bool has_params = it->spec.kind == LayerKind::Dense ||
                              it->spec.kind == LayerKind::Conv2d3x3;
      grad = layer_backward(it->spec, has_params ? &it->params : nullptr, it->cache, grad);
    }
  }
  return grad;
}

void Stack::collect_params(std::vector<Param*>& out) {
  for (auto& st : stages) {
    if (st.op != Stage::Op::Layer) continue;
    if (st.spec.kind == LayerKind::Dense || st.spec.kind == LayerKind::Conv2d3x3) {
      out.push_back(&st.params.weight);
      out.push_back(&st.params.bias);
    }
  }
}

}  // namespace detail

using detail::Stack;

StepPredictor::StepPredictor(const ModelSpec& spec, Rng& rng) : spec_(spec) {
  spec_.validate();
  if (spec_.kind == ModelKind::Image) {
    const auto c = spec_.psi_channels;
    stack_.add({LayerKind::Conv2d3x3, 0, 0, 1, c}, "psi.conv1", rng);
    stack_.add({LayerKind::Relu}, "psi.relu1", rng);
    stack_.add({LayerKind::Conv2d3x3, 0, 0, c, c}, "psi.conv2", rng);
    stack_.add({LayerKind::Relu}, "psi.relu2", rng);
    stack_.add_transpose();
    stack_.add({LayerKind::MeanPoolPoints}, "psi.pool", rng);
    stack_.add({LayerKind::Dense, c, spec_.psi_hidden}, "psi.fc1", rng);
    stack_.add({LayerKind::Relu}, "psi.relu3", rng);
    stack_.add({LayerKind::Dense, spec_.psi_hidden, 1}, "psi.fc2", rng);
    stack_.add({LayerKind::Sigmoid}, "psi.sig", rng);
  } else {
    const auto h = spec_.point_hidden;
    stack_.add({LayerKind::Dense, kPointFeatures, h}, "psi.fc1", rng);
    stack_.add({LayerKind::Relu}, "psi.relu1", rng);
    stack_.add({LayerKind::Dense, h, h}, "psi.fc2", rng);
    stack_.add({LayerKind::Relu}, "psi.relu2", rng);
    stack_.add({LayerKind::MeanPoolPoints}, "psi.pool", rng);
    stack_.add({LayerKind::Dense, h, spec_.psi_hidden}, "psi.fc3", rng);
    stack_.add({LayerKind::Relu}, "psi.relu3", rng);
    stack_.add({LayerKind::Dense, spec_.psi_hidden, 1}, "psi.fc4", rng);
    stack_.add({LayerKind::Sigmoid}, "psi.sig", rng);
  }
}

double StepPredictor::forward(const Tensor& s) {
  if (spec_.kind == ModelKind::Image) {
    if (s.rank() != 3 || s.shape[0] != 1)
      throw ConfigError("step predictor: expected [1,H,W] input, got " +
                        shape_to_string(s.shape));
  } else if (s.rank() != 2 || s.shape[1] != 2) {
    throw ConfigError("step predictor: expected [N,2] input, got " +
                      shape_to_string(s.shape));
  }
  if (spec_.kind == ModelKind::Points) return stack_.forward(point_embed(s), 0.0).data[0];
  return stack_.forward(s, 0.0).data[0];
}

double StepPredictor::predict(const Tensor& s) { return forward(s); }

void StepPredictor::backward(double upstream) {
  stack_.backward(Tensor({1}, {upstream}));
}

std::vector<Param*> StepPredictor::params() {
  std::vector<Param*> out;
  stack_.collect_params(out);
  return out;
}

NoisePredictor::NoisePredictor(const ModelSpec& spec, Rng& rng) : spec_(spec) {
  spec_.validate();
  if (spec_.kind == ModelKind::Image) {
    const auto c = spec_.phi_channels;
    trunk_.add({LayerKind::ConcatStep}, "phi.step", rng);
    trunk_.add({LayerKind::Conv2d3x3, 0, 0, 2, c}, "phi.conv1", rng);
    trunk_.add({LayerKind::Relu}, "phi.relu1", rng);
    trunk_.add({LayerKind::Conv2d3x3, 0, 0, c, c}, "phi.conv2", rng);
    trunk_.add({LayerKind::Relu}, "phi.relu2", rng);
    trunk_.add({LayerKind::Conv2d3x3, 0, 0, c, 1}, "phi.conv3", rng);
  } else {
    const auto h = spec_.point_hidden;
    trunk_.add({LayerKind::ConcatStep}, "phi.step", rng);
    trunk_.add({LayerKind::Dense, kPointFeatures + 1, h}, "phi.fc1", rng);
    trunk_.add({LayerKind::Relu}, "phi.relu1", rng);
    trunk_.add({LayerKind::Dense, h, h}, "phi.fc2", rng);
    trunk_.add({LayerKind::Relu}, "phi.relu2", rng);
    // head consumes per-point features concatenated with the pooled context
    head_.add({LayerKind::Dense, 2 * h, h}, "phi.head1", rng);
    head_.add({LayerKind::Relu}, "phi.head_relu", rng);
    head_.add({LayerKind::Dense, h, 1}, "phi.head2", rng);
    head_.add({LayerKind::Sigmoid}, "phi.head_sig", rng);
  }
}

Tensor NoisePredictor::forward(const Tensor& s_t, std::size_t t, std::size_t total_steps) {
  if (t < 1 || t > total_steps)
    throw ConfigError("noise predictor: step " + std::to_string(t) + " out of range [1," +
                      std::to_string(total_steps) + "]");
  const double step_value = static_cast<double>(t) / static_cast<double>(total_steps);
  if (spec_.kind == ModelKind::Image) {
    if (s_t.rank() != 3 || s_t.shape[0] != 1)
      throw ConfigError("noise predictor: expected [1,H,W] input, got " +
                        shape_to_string(s_t.shape));
    return trunk_.forward(s_t, step_value);
  }
  if (s_t.rank() != 2 || s_t.shape[1] != 2)
    throw ConfigError("noise predictor: expected [N,2] input, got " +
                      shape_to_string(s_t.shape));
  const std::size_t n = s_t.shape[0];
  const std::size_t h = spec_.point_hidden;
  Tensor feats = trunk_.forward(point_embed(s_t), step_value);  // [N,h]
  cached_trunk_out_ = feats;
  Tensor pooled({h});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < h; ++c) pooled.data[c] += feats.at2(r, c);
  for (double& v : pooled.data) v /= static_cast<double>(n);
  Tensor z({n, 2 * h});
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < h; ++c) {
      z.at2(r, c) = feats.at2(r, c);
      z.at2(r, h + c) = pooled.data[c];
    }
  }
  Tensor probs2d = head_.forward(z, step_value);  // [N,1]
  Tensor probs({n});
  std::copy(probs2d.data.begin(), probs2d.data.end(), probs.data.begin());
  return probs;
}

Tensor NoisePredictor::predict(const Tensor& s_t, std::size_t t, std::size_t total_steps) {
  return forward(s_t, t, total_steps);
}

void NoisePredictor::backward(const Tensor& upstream) {
  if (spec_.kind == ModelKind::Image) {
    trunk_.backward(upstream);
    return;
  }
  const std::size_t n = cached_trunk_out_.shape[0];
  const std::size_t h = spec_.point_hidden;
  Tensor up2d({n, 1});
  std::copy(upstream.data.begin(), upstream.data.end(), up2d.data.begin());
  Tensor dz = head_.backward(up2d);  // [N,2h]
  Tensor dfeats({n, h});
  Tensor dpooled({h});
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < h; ++c) {
      dfeats.at2(r, c) = dz.at2(r, c);
      dpooled.data[c] += dz.at2(r, h + c);
    }
  }
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < h; ++c) dfeats.at2(r, c) += dpooled.data[c] * inv;
  trunk_.backward(dfeats);
}

std::vector<Param*> NoisePredictor::params() {
  std::vector<Param*> out;
  trunk_.collect_params(out);
  head_.collect_params(out);
  return out;
}

double loss_step(std::size_t t, std::size_t total_steps, double t_hat) {
  const double target = static_cast<double>(t) / static_cast<double>(total_steps);
  const double d = target - t_hat;
  return d * d;
}

double loss_step_grad(std::size_t t, std::size_t total_steps, double t_hat) {
  const double target = static_cast<double>(t) / static_cast<double>(total_steps);
  return 2.0 * (t_hat - target);
}

double loss_noise_mse(const Tensor& eps, const Tensor& eps_hat) {
  if (!eps.same_shape(eps_hat))
    throw ConfigError("loss_noise_mse: shape mismatch " + shape_to_string(eps.shape) +
                      " vs " + shape_to_string(eps_hat.shape));
  double s = 0.0;
  for (std::size_t i = 0; i < eps.numel(); ++i) {
    const double d = eps.data[i] - eps_hat.data[i];
    s += d * d;
  }
  return s / static_cast<double>(eps.numel());
}

Tensor loss_noise_mse_grad(const Tensor& eps, const Tensor& eps_hat) {
  Tensor g(eps_hat.shape);
  const double inv = 2.0 / static_cast<double>(eps.numel());
  for (std::size_t i = 0; i < eps.numel(); ++i)
    g.data[i] = inv * (eps_hat.data[i] - eps.data[i]);
  return g;
}

namespace {
constexpr double kBceClamp = 1e-12;
}

double loss_noise_bce(const Tensor& labels, const Tensor& probs) {
  if (!labels.same_shape(probs))
    throw ConfigError("loss_noise_bce: shape mismatch " + shape_to_string(labels.shape) +
                      " vs " + shape_to_string(probs.shape));
  double s = 0.0;
  for (std::size_t i = 0; i < labels.numel(); ++i) {
    const double p = std::clamp(probs.data[i], kBceClamp, 1.0 - kBceClamp);
    const double y = labels.data[i];
    s += y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
  }
  return -s / static_cast<double>(labels.numel());
}

Tensor loss_noise_bce_grad(const Tensor& labels, const Tensor& probs) {
  Tensor g(probs.shape);
  const double inv = 1.0 / static_cast<double>(labels.numel());
  for (std::size_t i = 0; i < labels.numel(); ++i) {
    const double p = std::clamp(probs.data[i], kBceClamp, 1.0 - kBceClamp);
    const double y = labels.data[i];
    g.data[i] = inv * (-y / p + (1.0 - y) / (1.0 - p));
  }
  return g;
}

double loss_total(double loss_noise, double loss_step) { return loss_noise + loss_step; }

}  // namespace mid
