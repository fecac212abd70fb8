#include "anmd/denoiser.hpp"

#include <cmath>

namespace anmd {

namespace {

LayerDesc make_conv(LayerKind kind, int c_in, int c_out, int kernel, int padding) {
  LayerDesc d;
  d.kind = kind;
  d.in_channels = c_in;
  d.out_channels = c_out;
  d.kernel = kernel;
  d.stride = 1;
  d.padding = padding;
  const int cipg = kind == LayerKind::DepthwiseConv2d ? 1 : c_in;
  d.weight = Tensor4(Shape4{c_out, cipg, kernel, kernel});
  d.bias = Tensor4(Shape4{c_out, 1, 1, 1});
  d.trainable = true;
  return d;
}

void kaiming_uniform(Tensor4& w, int fan_in, RngStream& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (std::int64_t i = 0; i < w.size(); ++i) w[i] = rng.next_uniform(-bound, bound);
}

}  // namespace

int bottleneck_width(int channels, double ratio) {
  if (channels < 1) throw Error("denoiser: channels must be >= 1");
  if (!(ratio > 0.0 && ratio <= 1.0)) throw Error("denoiser: ratio must be in (0,1]");
  const int cb = static_cast<int>(std::floor(channels * ratio));
  return cb < 1 ? 1 : cb;
}

std::int64_t denoiser_param_count(int channels, double ratio) {
  const std::int64_t c = channels;
  const std::int64_t cb = bottleneck_width(channels, ratio);
  return (c * cb + cb) + (9 * cb + cb) + 2 * (cb * c + c);
}

DenoiserParams denoiser_init(int channels, double ratio, std::uint64_t seed) {
  const int cb = bottleneck_width(channels, ratio);
  DenoiserParams p;
  p.ratio = ratio;
  p.pw_reduce = make_conv(LayerKind::PointwiseConv2d, channels, cb, 1, 0);
  p.dw = make_conv(LayerKind::DepthwiseConv2d, cb, cb, 3, 1);
  p.head_mean = make_conv(LayerKind::PointwiseConv2d, cb, channels, 1, 0);
  p.head_scale = make_conv(LayerKind::PointwiseConv2d, cb, channels, 1, 0);

  RngStream rng(derive_seed(seed, RngTag::kInit, static_cast<std::uint64_t>(channels)));
  kaiming_uniform(p.pw_reduce.weight, channels, rng);
  kaiming_uniform(p.dw.weight, 9, rng);
  // Heads stay zero: mu = sigma = 0, so the fresh block is an exact identity.
  return p;
}

DenoiserForward denoiser_forward(const Tensor4& x, const DenoiserParams& params,
                                 const Tensor4& eps) {
  if (x.shape().c != params.channels())
    throw Error("denoiser_forward: input has " + std::to_string(x.shape().c) +
                " channels, block expects " + std::to_string(params.channels()));
  if (!eps.same_shape(x))
    throw Error("denoiser_forward: eps shape " + eps.shape().str() + " must match input " +
                x.shape().str());

  DenoiserForward f;
  f.eps = eps;
  f.pw_out = conv2d(x, params.pw_reduce, "denoiser.pw_reduce");
  f.pw_act = leaky_relu(f.pw_out);
  f.dw_out = conv2d(f.pw_act, params.dw, "denoiser.dw");
  f.dw_act = leaky_relu(f.dw_out);
  f.mu = conv2d(f.dw_act, params.head_mean, "denoiser.head_mean");
  f.sigma = conv2d(f.dw_act, params.head_scale, "denoiser.head_scale");

  f.denoised = Tensor4(x.shape());
  for (std::int64_t i = 0; i < x.size(); ++i)
    f.denoised[i] = x[i] - (f.eps[i] * f.sigma[i] + f.mu[i]);
  return f;
}

DenoiserForward denoiser_forward(const Tensor4& x, const DenoiserParams& params,
                                 RngStream& eps_stream) {
  Tensor4 eps(x.shape());
  for (std::int64_t i = 0; i < eps.size(); ++i) eps[i] = eps_stream.next_gauss();
  return denoiser_forward(x, params, eps);
}

Tensor4 denoiser_backward(const Tensor4& x, const DenoiserParams& params,
                          const DenoiserForward& fwd, const Tensor4& g, DenoiserGrads* grads) {
  // x_hat = x - (eps*sigma + mu)  =>  d/dmu = -1, d/dsigma = -eps.
  Tensor4 g_mu(g.shape()), g_sigma(g.shape());
  for (std::int64_t i = 0; i < g.size(); ++i) {
    g_mu[i] = -g[i];
    g_sigma[i] = -g[i] * fwd.eps[i];
  }

  Tensor4 g_trunk_mean, g_trunk_scale;
  conv2d_backward(fwd.dw_act, params.head_mean, g_mu, &g_trunk_mean,
                  grads != nullptr ? &grads->mean_w : nullptr,
                  grads != nullptr ? &grads->mean_b : nullptr, "denoiser.head_mean");
  conv2d_backward(fwd.dw_act, params.head_scale, g_sigma, &g_trunk_scale,
                  grads != nullptr ? &grads->scale_w : nullptr,
                  grads != nullptr ? &grads->scale_b : nullptr, "denoiser.head_scale");
  add_inplace(g_trunk_mean, g_trunk_scale);

  Tensor4 g_dw_out = leaky_relu_backward(fwd.dw_out, g_trunk_mean);
  Tensor4 g_pw_act;
  conv2d_backward(fwd.pw_act, params.dw, g_dw_out, &g_pw_act,
                  grads != nullptr ? &grads->dw_w : nullptr,
                  grads != nullptr ? &grads->dw_b : nullptr, "denoiser.dw");
  Tensor4 g_pw_out = leaky_relu_backward(fwd.pw_out, g_pw_act);
  Tensor4 g_x_trunk;
  conv2d_backward(x, params.pw_reduce, g_pw_out, &g_x_trunk,
                  grads != nullptr ? &grads->pw_w : nullptr,
                  grads != nullptr ? &grads->pw_b : nullptr, "denoiser.pw_reduce");

  // Identity path plus trunk path.
  add_inplace(g_x_trunk, g);
  return g_x_trunk;
}

}  // namespace anmd
