#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "anmd/adam.hpp"
#include "anmd/autodiff.hpp"
#include "anmd/dataset.hpp"
#include "anmd/model.hpp"

namespace anmd {

// Deterministic registry of trainable parameters: layers in index order
// (weight then bias), then attachments in index order (pw_reduce, dw,
// head_mean, head_scale; weight then bias each).
struct ParamRef {
  Tensor4* tensor;
  std::string name;
};
std::vector<ParamRef> trainable_params(ModelGraph& model);

// Gradient pointers aligned with trainable_params(model).
std::vector<const Tensor4*> collect_grads(const ModelGraph& model, const Gradients& grads);

struct TrainConfig {
  int epochs = 5;
  int batch_size = 128;
  AdamConfig adam{};
  std::uint64_t seed = 1;
  RunMode mode = RunMode::Clean;
};

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;  // on the training stream
};

// Minimizes mean cross-entropy over the dataset with Adam. Trains whatever
// trainable_params exposes; `state` may carry optimizer state across calls.
std::vector<EpochStats> train_model(ModelGraph& model, const Dataset& data,
                                    const TrainConfig& cfg, AdamState* state = nullptr);

// Freezes every backbone layer, then trains only the attached denoiser blocks
// under injected noise. Throws ConfigError when the model has no attachments.
std::vector<EpochStats> train_denoisers(ModelGraph& model, const Dataset& data, int epochs,
                                        std::uint64_t seed, const AdamConfig& adam = {},
                                        int batch_size = 128);

// Classification accuracy over the dataset; noisy mode draws per-batch noise
// from the given seed.
double evaluate_accuracy(const ModelGraph& model, const Dataset& data, RunMode mode,
                         std::uint64_t seed = 0, int batch_size = 256);

double evaluate_loss(const ModelGraph& model, const Dataset& data, RunMode mode,
                     std::uint64_t seed = 0, int batch_size = 256);

}  // namespace anmd
