#pragma once

#include <cstdint>

#include "anmd/layers.hpp"
#include "anmd/rng.hpp"
#include "anmd/tensor.hpp"

namespace anmd {

inline constexpr double kDefaultBottleneckRatio = 0.25;

// Bottleneck denoising block: pointwise reduce -> leaky-ReLU -> depthwise 3x3
// -> leaky-ReLU -> two parallel pointwise heads predicting the noise mean and
// scale of the incoming activation. The block output is x - (eps*sigma + mu).
struct DenoiserParams {
  LayerDesc pw_reduce;   // pointwise C -> C_b
  LayerDesc dw;          // depthwise 3x3, padding 1, on C_b channels
  LayerDesc head_mean;   // pointwise C_b -> C
  LayerDesc head_scale;  // pointwise C_b -> C
  double ratio = kDefaultBottleneckRatio;

  int channels() const { return pw_reduce.in_channels; }
  int bottleneck_channels() const { return pw_reduce.out_channels; }
  std::int64_t param_count() const {
    return pw_reduce.param_count() + dw.param_count() + head_mean.param_count() +
           head_scale.param_count();
  }
};

int bottleneck_width(int channels, double ratio);

// Parameter count of a block for C input channels at the given ratio, without
// instantiating tensors. Used by the placement budget accounting.
std::int64_t denoiser_param_count(int channels, double ratio = kDefaultBottleneckRatio);

// Trunk convolutions get Kaiming-uniform weights; both heads start at exactly
// zero so a freshly attached block is a bitwise identity.
DenoiserParams denoiser_init(int channels, double ratio, std::uint64_t seed);

struct DenoiserForward {
  Tensor4 denoised;  // x - z_hat
  Tensor4 mu;
  Tensor4 sigma;
  // Intermediates kept for backward.
  Tensor4 pw_out, pw_act, dw_out, dw_act;
  Tensor4 eps;
};

// eps must match x's shape; one shared eps tensor serves both heads.
DenoiserForward denoiser_forward(const Tensor4& x, const DenoiserParams& params,
                                 const Tensor4& eps);
// Convenience overload drawing eps ~ N(0, I) from the stream.
DenoiserForward denoiser_forward(const Tensor4& x, const DenoiserParams& params,
                                 RngStream& eps_stream);

struct DenoiserGrads {
  Tensor4 pw_w, pw_b, dw_w, dw_b, mean_w, mean_b, scale_w, scale_b;
};

// Backpropagates g (gradient w.r.t. the block output) through the block.
// Returns the gradient w.r.t. the block input; fills `grads` for all four
// convolutions. eps is the replayed sample from the forward pass.
Tensor4 denoiser_backward(const Tensor4& x, const DenoiserParams& params,
                          const DenoiserForward& fwd, const Tensor4& g, DenoiserGrads* grads);

}  // namespace anmd
