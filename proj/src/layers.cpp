#include "mid/layers.hpp"

#include <cmath>

namespace mid {

std::string layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Conv2d3x3: return "conv2d-3x3";
    case LayerKind::Relu: return "relu";
    case LayerKind::Sigmoid: return "sigmoid";
    case LayerKind::MeanPoolPoints: return "mean-pool-over-points";
    case LayerKind::ConcatStep: return "concat-step-embedding";
  }
  return "?";
}

namespace {

[[noreturn]] void shape_error(const LayerSpec& spec, const Tensor& x, const std::string& want) {
  throw ConfigError("layer " + layer_kind_name(spec.kind) + ": input shape " +
                    shape_to_string(x.shape) + " incompatible, expected " + want);
}

}  // namespace

LayerParams init_layer_params(const LayerSpec& spec, const std::string& name, Rng& rng) {
  LayerParams p;
  auto glorot = [&](Tensor& t, std::size_t fan_in, std::size_t fan_out) {
    const double lim = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : t.data) v = rng.uniform(-lim, lim);
  };
  switch (spec.kind) {
    case LayerKind::Dense: {
      Tensor w({spec.out_dim, spec.in_dim});
      glorot(w, spec.in_dim, spec.out_dim);
      p.weight = Param(name + ".weight", std::move(w));
      p.bias = Param(name + ".bias", Tensor::zeros({spec.out_dim}));
      break;
    }
    case LayerKind::Conv2d3x3: {
      Tensor w({spec.out_ch, spec.in_ch, 3, 3});
      glorot(w, spec.in_ch * 9, spec.out_ch * 9);
      p.weight = Param(name + ".weight", std::move(w));
      p.bias = Param(name + ".bias", Tensor::zeros({spec.out_ch}));
      break;
    }
    default:
      break;  // parameter-free layer
  }
  return p;
}

Tensor layer_forward(const LayerSpec& spec, const LayerParams* params, const Tensor& x,
                     LayerCache& cache, double step_value) {
  cache.input = x;
  cache.step_value = step_value;
  switch (spec.kind) {
    case LayerKind::Dense: {
      std::size_t rows, in;
      if (x.rank() == 1) {
        rows = 1;
        in = x.shape[0];
      } else if (x.rank() == 2) {
        rows = x.shape[0];
        in = x.shape[1];
      } else {
        shape_error(spec, x, "[in] or [N,in]");
      }
      if (in != spec.in_dim)
        shape_error(spec, x, "last extent " + std::to_string(spec.in_dim));
      Tensor y(x.rank() == 1 ? std::vector<std::size_t>{spec.out_dim}
                             : std::vector<std::size_t>{rows, spec.out_dim});
      const Tensor& w = params->weight.value;
      const Tensor& b = params->bias.value;
      for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.data.data() + r * in;
        double* yr = y.data.data() + r * spec.out_dim;
        for (std::size_t o = 0; o < spec.out_dim; ++o) {
          const double* wr = w.data.data() + o * in;
          double acc = b.data[o];
          for (std::size_t i = 0; i < in; ++i) acc += wr[i] * xr[i];
          yr[o] = acc;
        }
      }
      cache.output = y;
      return y;
    }
    case LayerKind::Conv2d3x3: {
      if (x.rank() != 3 || x.shape[0] != spec.in_ch)
        shape_error(spec, x, "[" + std::to_string(spec.in_ch) + ",H,W]");
      const std::size_t H = x.shape[1], W = x.shape[2];
      Tensor y({spec.out_ch, H, W});
      const Tensor& w = params->weight.value;
      const Tensor& b = params->bias.value;
      for (std::size_t oc = 0; oc < spec.out_ch; ++oc) {
        for (std::size_t ic = 0; ic < spec.in_ch; ++ic) {
          const double* k = w.data.data() + (oc * spec.in_ch + ic) * 9;
          const double* xin = x.data.data() + ic * H * W;
          double* yo = y.data.data() + oc * H * W;
          for (std::size_t r = 0; r < H; ++r) {
            for (std::size_t c = 0; c < W; ++c) {
              double acc = 0.0;
              for (int dr = -1; dr <= 1; ++dr) {
                const std::ptrdiff_t rr = static_cast<std::ptrdiff_t>(r) + dr;
                if (rr < 0 || rr >= static_cast<std::ptrdiff_t>(H)) continue;
                for (int dc = -1; dc <= 1; ++dc) {
                  const std::ptrdiff_t cc = static_cast<std::ptrdiff_t>(c) + dc;
                  if (cc < 0 || cc >= static_cast<std::ptrdiff_t>(W)) continue;
                  acc += k[(dr + 1) * 3 + (dc + 1)] * xin[rr * W + cc];
                }
              }
              yo[r * W + c] += acc;
            }
          }
        }
        double* yo = y.data.data() + oc * H * W;
        for (std::size_t i = 0; i < H * W; ++i) yo[i] += b.data[oc];
      }
      cache.output = y;
      return y;
    }
    case LayerKind::Relu: {
      Tensor y = x;
      for (double& v : y.data) v = v > 0.0 ? v : 0.0;
      cache.output = y;
      return y;
    }
    case LayerKind::Sigmoid: {
      Tensor y = x;
      for (double& v : y.data) v = 1.0 / (1.0 + std::exp(-v));
      cache.output = y;
      return y;
    }
    case LayerKind::MeanPoolPoints: {
      if (x.rank() != 2) shape_error(spec, x, "[N,F]");
      const std::size_t n = x.shape[0], f = x.shape[1];
      if (n == 0) shape_error(spec, x, "non-empty point set");
      Tensor y({f});
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < f; ++c) y.data[c] += x.at2(r, c);
      const double inv = 1.0 / static_cast<double>(n);
      for (double& v : y.data) v *= inv;
      cache.output = y;
      return y;
    }
    case LayerKind::ConcatStep: {
      if (x.rank() == 1) {
        Tensor y({x.shape[0] + 1});
        std::copy(x.data.begin(), x.data.end(), y.data.begin());
        y.data.back() = step_value;
        cache.output = y;
        return y;
      }
      if (x.rank() == 2) {
        const std::size_t n = x.shape[0], f = x.shape[1];
        Tensor y({n, f + 1});
        for (std::size_t r = 0; r < n; ++r) {
          for (std::size_t c = 0; c < f; ++c) y.at2(r, c) = x.at2(r, c);
          y.at2(r, f) = step_value;
        }
        cache.output = y;
        return y;
      }
      if (x.rank() == 3) {
        const std::size_t C = x.shape[0], H = x.shape[1], W = x.shape[2];
        Tensor y({C + 1, H, W});
        std::copy(x.data.begin(), x.data.end(), y.data.begin());
        std::fill(y.data.begin() + static_cast<std::ptrdiff_t>(C * H * W), y.data.end(),
                  step_value);
        cache.output = y;
        return y;
      }
      shape_error(spec, x, "rank 1, 2 or 3");
    }
  }
  shape_error(spec, x, "known layer kind");
}

Tensor layer_backward(const LayerSpec& spec, LayerParams* params, const LayerCache& cache,
                      const Tensor& upstream) {
  if (!upstream.same_shape(cache.output))
    throw NumericError("layer " + layer_kind_name(spec.kind) +
                       ": upstream gradient shape " + shape_to_string(upstream.shape) +
                       " does not match cached output " + shape_to_string(cache.output.shape));
  const Tensor& x = cache.input;
  switch (spec.kind) {
    case LayerKind::Dense: {
      const std::size_t rows = x.rank() == 1 ? 1 : x.shape[0];
      const std::size_t in = spec.in_dim, out = spec.out_dim;
      Tensor dx(x.shape);
      const Tensor& w = params->weight.value;
      Tensor& dw = params->weight.grad;
      Tensor& db = params->bias.grad;
      for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.data.data() + r * in;
        const double* gr = upstream.data.data() + r * out;
        double* dxr = dx.data.data() + r * in;
        for (std::size_t o = 0; o < out; ++o) {
          const double g = gr[o];
          const double* wr = w.data.data() + o * in;
          double* dwr = dw.data.data() + o * in;
          for (std::size_t i = 0; i < in; ++i) {
            dxr[i] += g * wr[i];
            dwr[i] += g * xr[i];
          }
          db.data[o] += g;
        }
      }
      return dx;
    }
    case LayerKind::Conv2d3x3: {
      const std::size_t H = x.shape[1], W = x.shape[2];
      Tensor dx(x.shape);
      const Tensor& w = params->weight.value;
      Tensor& dw = params->weight.grad;
      Tensor& db = params->bias.grad;
      for (std::size_t oc = 0; oc < spec.out_ch; ++oc) {
        const double* go = upstream.data.data() + oc * H * W;
        for (std::size_t i = 0; i < H * W; ++i) db.data[oc] += go[i];
        for (std::size_t ic = 0; ic < spec.in_ch; ++ic) {
          const double* k = w.data.data() + (oc * spec.in_ch + ic) * 9;
          double* dk = dw.data.data() + (oc * spec.in_ch + ic) * 9;
          const double* xin = x.data.data() + ic * H * W;
          double* dxi = dx.data.data() + ic * H * W;
          for (std::size_t r = 0; r < H; ++r) {
            for (std::size_t c = 0; c < W; ++c) {
              const double g = go[r * W + c];
              if (g == 0.0) continue;
              for (int dr = -1; dr <= 1; ++dr) {
                const std::ptrdiff_t rr = static_cast<std::ptrdiff_t>(r) + dr;
                if (rr < 0 || rr >= static_cast<std::ptrdiff_t>(H)) continue;
                for (int dc = -1; dc <= 1; ++dc) {
                  const std::ptrdiff_t cc = static_cast<std::ptrdiff_t>(c) + dc;
                  if (cc < 0 || cc >= static_cast<std::ptrdiff_t>(W)) continue;
                  dk[(dr + 1) * 3 + (dc + 1)] += g * xin[rr * W + cc];
                  dxi[rr * W + cc] += g * k[(dr + 1) * 3 + (dc + 1)];
                }
              }
            }
          }
        }
      }
      return dx;
    }
    case LayerKind::Relu: {
      Tensor dx = upstream;
      for (std::size_t i = 0; i < dx.numel(); ++i)
        if (x.data[i] <= 0.0) dx.data[i] = 0.0;
      return dx;
    }
    case LayerKind::Sigmoid: {
      Tensor dx = upstream;
      for (std::size_t i = 0; i < dx.numel(); ++i) {
        const double y = cache.output.data[i];
        dx.data[i] *= y * (1.0 - y);
      }
      return dx;
    }
    case LayerKind::MeanPoolPoints: {
      const std::size_t n = x.shape[0], f = x.shape[1];
      Tensor dx(x.shape);
      const double inv = 1.0 / static_cast<double>(n);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < f; ++c) dx.at2(r, c) = upstream.data[c] * inv;
      return dx;
    }
    case LayerKind::ConcatStep: {
      Tensor dx(x.shape);
      if (x.rank() == 1) {
        std::copy(upstream.data.begin(), upstream.data.begin() + static_cast<std::ptrdiff_t>(x.shape[0]),
                  dx.data.begin());
      } else if (x.rank() == 2) {
        const std::size_t n = x.shape[0], f = x.shape[1];
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t c = 0; c < f; ++c) dx.at2(r, c) = upstream.at2(r, c);
      } else {
        std::copy(upstream.data.begin(),
                  upstream.data.begin() + static_cast<std::ptrdiff_t>(dx.numel()),
                  dx.data.begin());
      }
      return dx;
    }
  }
  throw NumericError("layer_backward: unknown layer kind");
}

}  // namespace mid
