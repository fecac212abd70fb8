#pragma once

#include <cstdint>
#include <string>

#include "anmd/tensor.hpp"

namespace anmd {

// Slope fixed to 1/128 everywhere so the fixed-point hardware path can realize
// it as an arithmetic right shift by 7.
inline constexpr double kLeakyReluSlope = 1.0 / 128.0;

enum class LayerKind {
  Conv2d,
  DepthwiseConv2d,
  PointwiseConv2d,
  LeakyRelu,
  GlobalAvgPool,
  Linear,
};

std::string layer_kind_name(LayerKind kind);
LayerKind layer_kind_from_name(const std::string& name);
bool layer_has_params(LayerKind kind);

struct LayerDesc {
  LayerKind kind = LayerKind::Conv2d;
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
  int stride = 1;
  int padding = 0;

  // Conv weight layout (c_out, c_in/groups, k, k); linear weight (out, in, 1, 1).
  Tensor4 weight;
  Tensor4 bias;  // (c_out, 1, 1, 1); empty when the layer has no bias

  bool trainable = false;
  bool noise_enabled = false;
  double noise_sigma_pct = 0.0;
  double noise_mean = 0.0;

  bool has_bias() const { return !bias.empty(); }
  std::int64_t param_count() const { return weight.size() + bias.size(); }
  int groups() const { return kind == LayerKind::DepthwiseConv2d ? in_channels : 1; }
};

// Validates kind-specific invariants (pointwise => kernel 1, depthwise =>
// out == in, weight shape consistent). Throws Error naming `label`.
void validate_layer(const LayerDesc& layer, const std::string& label);

// Output shape for a given input, shared by execution and static planning.
Shape4 layer_output_shape(const LayerDesc& layer, const Shape4& in, const std::string& label);

// Direct convolution; covers standard, depthwise and pointwise kinds.
Tensor4 conv2d(const Tensor4& x, const LayerDesc& layer, const std::string& label = "conv2d");
void conv2d_backward(const Tensor4& x, const LayerDesc& layer, const Tensor4& gy, Tensor4* gx,
                     Tensor4* gw, Tensor4* gb, const std::string& label = "conv2d");

Tensor4 leaky_relu(const Tensor4& x, double slope = kLeakyReluSlope);
Tensor4 leaky_relu_backward(const Tensor4& x, const Tensor4& gy, double slope = kLeakyReluSlope);

Tensor4 global_avg_pool(const Tensor4& x);
Tensor4 global_avg_pool_backward(const Shape4& in_shape, const Tensor4& gy);

// Flattens (c,h,w) into features; logits come back as (n, out, 1, 1).
Tensor4 linear(const Tensor4& x, const LayerDesc& layer, const std::string& label = "linear");
void linear_backward(const Tensor4& x, const LayerDesc& layer, const Tensor4& gy, Tensor4* gx,
                     Tensor4* gw, Tensor4* gb);

// Dispatch on layer.kind.
Tensor4 layer_forward(const Tensor4& x, const LayerDesc& layer, const std::string& label);

}  // namespace anmd
