#include "anmd/layers.hpp"

#include <algorithm>
#include <cmath>

namespace anmd {

std::string layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::DepthwiseConv2d: return "depthwise-conv2d";
    case LayerKind::PointwiseConv2d: return "pointwise-conv2d";
    case LayerKind::LeakyRelu: return "leaky-relu";
    case LayerKind::GlobalAvgPool: return "global-avg-pool";
    case LayerKind::Linear: return "linear";
  }
  throw Error("unknown layer kind");
}

LayerKind layer_kind_from_name(const std::string& name) {
  if (name == "conv2d") return LayerKind::Conv2d;
  if (name == "depthwise-conv2d") return LayerKind::DepthwiseConv2d;
  if (name == "pointwise-conv2d") return LayerKind::PointwiseConv2d;
  if (name == "leaky-relu") return LayerKind::LeakyRelu;
  if (name == "global-avg-pool") return LayerKind::GlobalAvgPool;
  if (name == "linear") return LayerKind::Linear;
  throw Error("unknown layer kind name: " + name);
}

bool layer_has_params(LayerKind kind) {
  switch (kind) {
    case LayerKind::LeakyRelu:
    case LayerKind::GlobalAvgPool:
      return false;
    default:
      return true;
  }
}

namespace {

bool is_conv_kind(LayerKind k) {
  return k == LayerKind::Conv2d || k == LayerKind::DepthwiseConv2d ||
         k == LayerKind::PointwiseConv2d;
}

[[noreturn]] void fail(const std::string& label, const std::string& msg) {
  throw Error(label + ": " + msg);
}

}  // namespace

void validate_layer(const LayerDesc& layer, const std::string& label) {
  if (is_conv_kind(layer.kind)) {
    if (layer.in_channels < 1 || layer.out_channels < 1)
      fail(label, "conv needs in/out channels >= 1, got " + std::to_string(layer.in_channels) +
                      "/" + std::to_string(layer.out_channels));
    if (layer.kernel < 1) fail(label, "kernel must be >= 1");
    if (layer.stride < 1) fail(label, "stride must be >= 1");
    if (layer.padding < 0) fail(label, "padding must be >= 0");
    if (layer.kind == LayerKind::PointwiseConv2d && layer.kernel != 1)
      fail(label, "pointwise conv requires kernel=1, got " + std::to_string(layer.kernel));
    if (layer.kind == LayerKind::DepthwiseConv2d && layer.out_channels != layer.in_channels)
      fail(label, "depthwise conv requires out_channels == in_channels");
    const int cipg = layer.in_channels / layer.groups();
    const Shape4 expect{layer.out_channels, cipg, layer.kernel, layer.kernel};
    if (!(layer.weight.shape() == expect))
      fail(label, "weight shape " + layer.weight.shape().str() + " does not match expected " +
                      expect.str());
  } else if (layer.kind == LayerKind::Linear) {
    const Shape4 expect{layer.out_channels, layer.in_channels, 1, 1};
    if (!(layer.weight.shape() == expect))
      fail(label, "linear weight shape " + layer.weight.shape().str() + " expected " +
                      expect.str());
  } else {
    if (!layer.weight.empty() || !layer.bias.empty())
      fail(label, layer_kind_name(layer.kind) + " takes no parameters");
  }
  if (layer.has_bias()) {
    const Shape4 expect{layer.out_channels, 1, 1, 1};
    if (!(layer.bias.shape() == expect))
      fail(label, "bias shape " + layer.bias.shape().str() + " expected " + expect.str());
  }
}

Shape4 layer_output_shape(const LayerDesc& layer, const Shape4& in, const std::string& label) {
  switch (layer.kind) {
    case LayerKind::Conv2d:
    case LayerKind::DepthwiseConv2d:
    case LayerKind::PointwiseConv2d: {
      if (in.c != layer.in_channels)
        fail(label, "input has " + std::to_string(in.c) + " channels, layer expects " +
                        std::to_string(layer.in_channels));
      const int ho = (in.h + 2 * layer.padding - layer.kernel) / layer.stride + 1;
      const int wo = (in.w + 2 * layer.padding - layer.kernel) / layer.stride + 1;
      if (ho < 1 || wo < 1)
        fail(label, "kernel " + std::to_string(layer.kernel) + " does not fit input " + in.str());
      return Shape4{in.n, layer.out_channels, ho, wo};
    }
    case LayerKind::LeakyRelu:
      return in;
    case LayerKind::GlobalAvgPool:
      return Shape4{in.n, in.c, 1, 1};
    case LayerKind::Linear: {
      const std::int64_t features = static_cast<std::int64_t>(in.c) * in.h * in.w;
      if (features != layer.in_channels)
        fail(label, "linear expects " + std::to_string(layer.in_channels) + " features, input " +
                        in.str() + " flattens to " + std::to_string(features));
      return Shape4{in.n, layer.out_channels, 1, 1};
    }
  }
  throw Error("unreachable");
}

Tensor4 conv2d(const Tensor4& x, const LayerDesc& layer, const std::string& label) {
  validate_layer(layer, label);
  const Shape4 in = x.shape();
  const Shape4 out_shape = layer_output_shape(layer, in, label);
  Tensor4 out(out_shape);

  const int groups = layer.groups();
  const int cipg = layer.in_channels / groups;
  const int copg = layer.out_channels / groups;
  const int K = layer.kernel, S = layer.stride, P = layer.padding;
  const int H = in.h, W = in.w, HO = out_shape.h, WO = out_shape.w;
  const std::int64_t x_plane = static_cast<std::int64_t>(H) * W;
  const std::int64_t o_plane = static_cast<std::int64_t>(HO) * WO;

#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < in.n; ++n) {
    for (int co = 0; co < layer.out_channels; ++co) {
      double* op = out.sample(n) + static_cast<std::int64_t>(co) * o_plane;
      const double b = layer.has_bias() ? layer.bias[co] : 0.0;
      for (std::int64_t i = 0; i < o_plane; ++i) op[i] = b;
      const int gi = co / copg;
      for (int cig = 0; cig < cipg; ++cig) {
        const int ci = gi * cipg + cig;
        const double* xp = x.sample(n) + static_cast<std::int64_t>(ci) * x_plane;
        const double* wp = layer.weight.data() +
                           ((static_cast<std::int64_t>(co) * cipg + cig) * K) * K;
        for (int kh = 0; kh < K; ++kh) {
          const int ho_lo = std::max(0, (P - kh + S - 1) / S);
          const int ho_hi = std::min(HO - 1, (H - 1 + P - kh) / S);
          for (int kw = 0; kw < K; ++kw) {
            const double wv = wp[kh * K + kw];
            if (wv == 0.0) continue;
            const int wo_lo = std::max(0, (P - kw + S - 1) / S);
            const int wo_hi = std::min(WO - 1, (W - 1 + P - kw) / S);
            for (int ho = ho_lo; ho <= ho_hi; ++ho) {
              const int hi = ho * S - P + kh;
              const double* xr = xp + static_cast<std::int64_t>(hi) * W - P + kw;
              double* orow = op + static_cast<std::int64_t>(ho) * WO;
              for (int wo = wo_lo; wo <= wo_hi; ++wo) orow[wo] += wv * xr[wo * S];
            }
          }
        }
      }
    }
  }
  return out;
}

void conv2d_backward(const Tensor4& x, const LayerDesc& layer, const Tensor4& gy, Tensor4* gx,
                     Tensor4* gw, Tensor4* gb, const std::string& label) {
  validate_layer(layer, label);
  const Shape4 in = x.shape();
  const Shape4 out_shape = layer_output_shape(layer, in, label);
  if (!(gy.shape() == out_shape))
    fail(label, "upstream gradient shape " + gy.shape().str() + " expected " + out_shape.str());

  const int groups = layer.groups();
  const int cipg = layer.in_channels / groups;
  const int copg = layer.out_channels / groups;
  const int K = layer.kernel, S = layer.stride, P = layer.padding;
  const int H = in.h, W = in.w, HO = out_shape.h, WO = out_shape.w;
  const std::int64_t x_plane = static_cast<std::int64_t>(H) * W;
  const std::int64_t o_plane = static_cast<std::int64_t>(HO) * WO;

  if (gx != nullptr) {
    *gx = Tensor4(in);
#pragma omp parallel for schedule(static)
    for (int n = 0; n < in.n; ++n) {
      for (int co = 0; co < layer.out_channels; ++co) {
        const int gi = co / copg;
        const double* gp = gy.sample(n) + static_cast<std::int64_t>(co) * o_plane;
        for (int cig = 0; cig < cipg; ++cig) {
          const int ci = gi * cipg + cig;
          double* xgp = gx->sample(n) + static_cast<std::int64_t>(ci) * x_plane;
          const double* wp = layer.weight.data() +
                             ((static_cast<std::int64_t>(co) * cipg + cig) * K) * K;
          for (int kh = 0; kh < K; ++kh) {
            const int ho_lo = std::max(0, (P - kh + S - 1) / S);
            const int ho_hi = std::min(HO - 1, (H - 1 + P - kh) / S);
            for (int kw = 0; kw < K; ++kw) {
              const double wv = wp[kh * K + kw];
              if (wv == 0.0) continue;
              const int wo_lo = std::max(0, (P - kw + S - 1) / S);
              const int wo_hi = std::min(WO - 1, (W - 1 + P - kw) / S);
              for (int ho = ho_lo; ho <= ho_hi; ++ho) {
                const int hi = ho * S - P + kh;
                double* xr = xgp + static_cast<std::int64_t>(hi) * W - P + kw;
                const double* grow = gp + static_cast<std::int64_t>(ho) * WO;
                for (int wo = wo_lo; wo <= wo_hi; ++wo) xr[wo * S] += wv * grow[wo];
              }
            }
          }
        }
      }
    }
  }

  if (gw != nullptr) {
    *gw = Tensor4(layer.weight.shape());
#pragma omp parallel for schedule(static)
    for (int co = 0; co < layer.out_channels; ++co) {
      const int gi = co / copg;
      for (int cig = 0; cig < cipg; ++cig) {
        const int ci = gi * cipg + cig;
        double* wgp = gw->data() + ((static_cast<std::int64_t>(co) * cipg + cig) * K) * K;
        for (int kh = 0; kh < K; ++kh) {
          const int ho_lo = std::max(0, (P - kh + S - 1) / S);
          const int ho_hi = std::min(HO - 1, (H - 1 + P - kh) / S);
          for (int kw = 0; kw < K; ++kw) {
            const int wo_lo = std::max(0, (P - kw + S - 1) / S);
            const int wo_hi = std::min(WO - 1, (W - 1 + P - kw) / S);
            double acc = 0.0;
            for (int n = 0; n < in.n; ++n) {
              const double* xp = x.sample(n) + static_cast<std::int64_t>(ci) * x_plane;
              const double* gp = gy.sample(n) + static_cast<std::int64_t>(co) * o_plane;
              for (int ho = ho_lo; ho <= ho_hi; ++ho) {
                const int hi = ho * S - P + kh;
                const double* xr = xp + static_cast<std::int64_t>(hi) * W - P + kw;
                const double* grow = gp + static_cast<std::int64_t>(ho) * WO;
                for (int wo = wo_lo; wo <= wo_hi; ++wo) acc += xr[wo * S] * grow[wo];
              }
            }
            wgp[kh * K + kw] = acc;
          }
        }
      }
    }
  }

  if (gb != nullptr && layer.has_bias()) {
    *gb = Tensor4(layer.bias.shape());
#pragma omp parallel for schedule(static)
    for (int co = 0; co < layer.out_channels; ++co) {
      double acc = 0.0;
      for (int n = 0; n < in.n; ++n) {
        const double* gp = gy.sample(n) + static_cast<std::int64_t>(co) * o_plane;
        for (std::int64_t i = 0; i < o_plane; ++i) acc += gp[i];
      }
      (*gb)[co] = acc;
    }
  }
}

Tensor4 leaky_relu(const Tensor4& x, double slope) {
  if (!(slope > 0.0 && slope < 1.0)) throw Error("leaky_relu: slope must be in (0,1)");
  Tensor4 out(x.shape());
  for (std::int64_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    out[i] = v >= 0.0 ? v : slope * v;
  }
  return out;
}

Tensor4 leaky_relu_backward(const Tensor4& x, const Tensor4& gy, double slope) {
  if (!x.same_shape(gy)) throw Error("leaky_relu_backward: shape mismatch");
  Tensor4 gx(x.shape());
  for (std::int64_t i = 0; i < x.size(); ++i) gx[i] = x[i] >= 0.0 ? gy[i] : slope * gy[i];
  return gx;
}

Tensor4 global_avg_pool(const Tensor4& x) {
  const Shape4 in = x.shape();
  Tensor4 out(Shape4{in.n, in.c, 1, 1});
  const std::int64_t plane = static_cast<std::int64_t>(in.h) * in.w;
  if (plane == 0) throw Error("global_avg_pool: empty spatial dims");
  for (int n = 0; n < in.n; ++n) {
    for (int c = 0; c < in.c; ++c) {
      const double* p = x.sample(n) + static_cast<std::int64_t>(c) * plane;
      double s = 0.0;
      for (std::int64_t i = 0; i < plane; ++i) s += p[i];
      out.at(n, c, 0, 0) = s / static_cast<double>(plane);
    }
  }
  return out;
}

Tensor4 global_avg_pool_backward(const Shape4& in_shape, const Tensor4& gy) {
  Tensor4 gx(in_shape);
  const std::int64_t plane = static_cast<std::int64_t>(in_shape.h) * in_shape.w;
  const double inv = 1.0 / static_cast<double>(plane);
  for (int n = 0; n < in_shape.n; ++n) {
    for (int c = 0; c < in_shape.c; ++c) {
      const double g = gy.at(n, c, 0, 0) * inv;
      double* p = gx.sample(n) + static_cast<std::int64_t>(c) * plane;
      for (std::int64_t i = 0; i < plane; ++i) p[i] = g;
    }
  }
  return gx;
}

Tensor4 linear(const Tensor4& x, const LayerDesc& layer, const std::string& label) {
  validate_layer(layer, label);
  const Shape4 out_shape = layer_output_shape(layer, x.shape(), label);
  Tensor4 out(out_shape);
  const std::int64_t F = layer.in_channels;
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < x.shape().n; ++n) {
    for (int o = 0; o < layer.out_channels; ++o) {
      const double* xp = x.sample(n);
      const double* wp = layer.weight.data() + static_cast<std::int64_t>(o) * F;
      double acc = layer.has_bias() ? layer.bias[o] : 0.0;
      for (std::int64_t f = 0; f < F; ++f) acc += xp[f] * wp[f];
      out.at(n, o, 0, 0) = acc;
    }
  }
  return out;
}

void linear_backward(const Tensor4& x, const LayerDesc& layer, const Tensor4& gy, Tensor4* gx,
                     Tensor4* gw, Tensor4* gb) {
  const std::int64_t F = layer.in_channels;
  const int N = x.shape().n, O = layer.out_channels;
  if (gx != nullptr) {
    *gx = Tensor4(x.shape());
    for (int n = 0; n < N; ++n) {
      double* xgp = gx->sample(n);
      for (int o = 0; o < O; ++o) {
        const double g = gy.at(n, o, 0, 0);
        const double* wp = layer.weight.data() + static_cast<std::int64_t>(o) * F;
        for (std::int64_t f = 0; f < F; ++f) xgp[f] += g * wp[f];
      }
    }
  }
  if (gw != nullptr) {
    *gw = Tensor4(layer.weight.shape());
    for (int o = 0; o < O; ++o) {
      double* wgp = gw->data() + static_cast<std::int64_t>(o) * F;
      for (int n = 0; n < N; ++n) {
        const double g = gy.at(n, o, 0, 0);
        const double* xp = x.sample(n);
        for (std::int64_t f = 0; f < F; ++f) wgp[f] += g * xp[f];
      }
    }
  }
  if (gb != nullptr && layer.has_bias()) {
    *gb = Tensor4(layer.bias.shape());
    for (int o = 0; o < O; ++o) {
      double acc = 0.0;
      for (int n = 0; n < N; ++n) acc += gy.at(n, o, 0, 0);
      (*gb)[o] = acc;
    }
  }
}

Tensor4 layer_forward(const Tensor4& x, const LayerDesc& layer, const std::string& label) {
  switch (layer.kind) {
    case LayerKind::Conv2d:
    case LayerKind::DepthwiseConv2d:
    case LayerKind::PointwiseConv2d:
      return conv2d(x, layer, label);
    case LayerKind::LeakyRelu:
      return leaky_relu(x);
    case LayerKind::GlobalAvgPool:
      return global_avg_pool(x);
    case LayerKind::Linear:
      return linear(x, layer, label);
  }
  throw Error("unreachable");
}

}  // namespace anmd
