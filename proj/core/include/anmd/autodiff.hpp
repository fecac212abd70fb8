#pragma once

#include <map>
#include <vector>

#include "anmd/model.hpp"

namespace anmd {

enum class Reduction { Mean, Sum };

struct LossResult {
  double loss = 0.0;
  Tensor4 grad;  // d loss / d logits, same shape as logits
};

// Softmax cross-entropy over (n, classes, 1, 1) logits.
LossResult cross_entropy(const Tensor4& logits, const std::vector<int>& labels,
                         Reduction reduction = Reduction::Mean);

struct Gradients {
  // Indexed like model.layers; empty tensors for frozen or parameterless layers.
  std::vector<Tensor4> weight;
  std::vector<Tensor4> bias;
  std::map<int, DenoiserGrads> denoiser;
  // d loss / d (layer output), pre-noise; filled when requested.
  std::vector<Tensor4> output_grad;
};

struct BackwardOptions {
  bool want_output_grads = false;
};

// Reverse pass over the tape. Injected noise is an additive constant (unit
// derivative through the addition); denoiser eps is replayed from the tape.
Gradients backward(const ModelGraph& model, const ActivationTape& tape, const Tensor4& loss_grad,
                   const BackwardOptions& opts = {});

}  // namespace anmd
