#include "anmd/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace anmd {

LossResult cross_entropy(const Tensor4& logits, const std::vector<int>& labels,
                         Reduction reduction) {
  const Shape4 s = logits.shape();
  if (s.h != 1 || s.w != 1)
    throw Error("cross_entropy: logits must be (n, classes, 1, 1), got " + s.str());
  if (static_cast<int>(labels.size()) != s.n)
    throw Error("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                std::to_string(s.n) + " samples");

  LossResult res;
  res.grad = Tensor4(s);
  const int C = s.c;
  double total = 0.0;
  for (int n = 0; n < s.n; ++n) {
    const int y = labels[static_cast<std::size_t>(n)];
    if (y < 0 || y >= C)
      throw Error("cross_entropy: label " + std::to_string(y) + " out of range [0," +
                  std::to_string(C) + ")");
    const double* row = logits.sample(n);
    double mx = row[0];
    for (int c = 1; c < C; ++c) mx = std::max(mx, row[c]);
    double z = 0.0;
    for (int c = 0; c < C; ++c) z += std::exp(row[c] - mx);
    total += -(row[y] - mx - std::log(z));
    double* grow = res.grad.sample(n);
    for (int c = 0; c < C; ++c) grow[c] = std::exp(row[c] - mx) / z;
    grow[y] -= 1.0;
  }

  if (reduction == Reduction::Mean) {
    const double inv = 1.0 / static_cast<double>(s.n);
    total *= inv;
    for (std::int64_t i = 0; i < res.grad.size(); ++i) res.grad[i] *= inv;
  }
  res.loss = total;
  return res;
}

Gradients backward(const ModelGraph& model, const ActivationTape& tape, const Tensor4& loss_grad,
                   const BackwardOptions& opts) {
  const int L = static_cast<int>(model.layers.size());
  if (static_cast<int>(tape.layer_inputs.size()) != L)
    throw Error("backward: tape has " + std::to_string(tape.layer_inputs.size()) +
                " entries for a model with " + std::to_string(L) + " layers");

  Gradients grads;
  grads.weight.resize(static_cast<std::size_t>(L));
  grads.bias.resize(static_cast<std::size_t>(L));
  if (opts.want_output_grads) grads.output_grad.resize(static_cast<std::size_t>(L));

  Tensor4 g = loss_grad;
  for (int l = L - 1; l >= 0; --l) {
    const LayerDesc& layer = model.layers[static_cast<std::size_t>(l)];
    const Tensor4& x = tape.layer_inputs[static_cast<std::size_t>(l)];

    auto att = model.attachments.find(l);
    if (att != model.attachments.end()) {
      auto rec = tape.denoisers.find(l);
      if (rec == tape.denoisers.end())
        throw Error("backward: tape is missing the denoiser record at layer " +
                    std::to_string(l));
      DenoiserGrads dg;
      g = denoiser_backward(rec->second.block_input, att->second, rec->second.fwd, g, &dg);
      grads.denoiser.emplace(l, std::move(dg));
    }

    // Injected noise is additive: gradient passes through unchanged, so g is
    // now d loss / d y_l.
    if (opts.want_output_grads) grads.output_grad[static_cast<std::size_t>(l)] = g;

    const bool need_gx = l > 0;
    switch (layer.kind) {
      case LayerKind::Conv2d:
      case LayerKind::DepthwiseConv2d:
      case LayerKind::PointwiseConv2d: {
        Tensor4 gx;
        conv2d_backward(x, layer, g, need_gx ? &gx : nullptr,
                        layer.trainable ? &grads.weight[static_cast<std::size_t>(l)] : nullptr,
                        layer.trainable ? &grads.bias[static_cast<std::size_t>(l)] : nullptr,
                        "layer " + std::to_string(l));
        if (need_gx) g = std::move(gx);
        break;
      }
      case LayerKind::LeakyRelu:
        if (need_gx) g = leaky_relu_backward(x, g);
        break;
      case LayerKind::GlobalAvgPool:
        if (need_gx) g = global_avg_pool_backward(x.shape(), g);
        break;
      case LayerKind::Linear: {
        Tensor4 gx;
        linear_backward(x, layer, g, need_gx ? &gx : nullptr,
                        layer.trainable ? &grads.weight[static_cast<std::size_t>(l)] : nullptr,
                        layer.trainable ? &grads.bias[static_cast<std::size_t>(l)] : nullptr);
        if (need_gx) g = std::move(gx);
        break;
      }
    }
  }
  return grads;
}

}  // namespace anmd
