#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "anmd/denoiser.hpp"
#include "anmd/layers.hpp"
#include "anmd/tensor.hpp"

namespace anmd {

// Ordered layer list plus denoiser attachment points keyed by layer index.
// A block attached at index l filters that layer's (possibly noisy) output.
struct ModelGraph {
  std::vector<LayerDesc> layers;
  std::map<int, DenoiserParams> attachments;
  std::string name = "model";
  int num_classes = 10;
  Shape4 input_shape{1, 0, 0, 0};  // n is a placeholder; (c,h,w) fixed

  std::int64_t backbone_param_count() const;
  std::int64_t denoiser_param_count_total() const;
};

// Static shape propagation: output shape of every layer for batch size n.
std::vector<Shape4> layer_output_shapes(const ModelGraph& model, int n);

// Layers whose output a denoiser can filter (everything except the final
// linear classifier, whose output is the flat logit vector).
bool attachment_eligible(const ModelGraph& model, int layer_index);

enum class RunMode { Clean, Noisy };

// Replayed stochastic draws for a forward pass; used by finite-difference
// oracles so the loss surface stays fixed while parameters move.
struct NoiseReplay {
  std::map<int, Tensor4> injected;  // layer index -> additive noise z
  std::map<int, Tensor4> eps;       // layer index -> denoiser eps
};

struct ForwardOptions {
  RunMode mode = RunMode::Clean;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;  // forward-pass counter; keeps draws fresh per batch
  bool record_tape = false;
  bool capture_noise = false;       // store draws into the tape's replay
  const NoiseReplay* replay = nullptr;
};

struct DenoiserTapeEntry {
  Tensor4 block_input;
  DenoiserForward fwd;
};

struct ActivationTape {
  std::vector<Tensor4> layer_inputs;   // input to each layer
  std::vector<Shape4> output_shapes;   // post-layer shapes (pre-noise)
  std::map<int, DenoiserTapeEntry> denoisers;
  NoiseReplay captured;  // filled when capture_noise was set
};

struct ForwardResult {
  Tensor4 logits;  // (n, classes, 1, 1)
  ActivationTape tape;
};

ForwardResult forward(const ModelGraph& model, const Tensor4& x, const ForwardOptions& opts);

// Runs layers [from, end) on the given activation; clean, no attachments
// consulted below `from` by construction. Used by placement oracles.
Tensor4 forward_from(const ModelGraph& model, int from, const Tensor4& activation);

// Reference desk-scale backbone: three 3x3 convolutions, global average
// pooling and a linear classifier on 32x32x3 inputs.
ModelGraph build_small_cnn(std::uint64_t seed, int num_classes = 10);

// Attaches freshly initialized blocks after each listed layer. Throws on a
// duplicate index or an ineligible attachment point.
void attach_denoisers(ModelGraph& model, const std::vector<int>& layer_indices, double ratio,
                      std::uint64_t seed);

}  // namespace anmd
