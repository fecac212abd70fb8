#pragma once

#include <cstdint>
#include <vector>

#include "anmd/rng.hpp"
#include "anmd/tensor.hpp"

namespace anmd {

struct ModelGraph;

// Additive Gaussian activation noise, sigma expressed as a percentage of the
// per-sample feature-map magnitude.
struct NoiseEntry {
  int layer_index = 0;
  double sigma_pct = 0.0;
  double mean = 0.0;
};

struct NoiseSpec {
  std::vector<NoiseEntry> entries;
  std::uint64_t seed = 0;
};

// Mean absolute value over all elements.
double feature_magnitude(const Tensor4& x);

// Per-sample mean absolute value, one entry per n.
std::vector<double> per_sample_magnitude(const Tensor4& x);

// y = x + z with z ~ N(mean, (sigma_pct/100 * magnitude)^2) elementwise, the
// magnitude taken per sample from the pre-noise activation. sigma_pct = 0
// returns x bitwise (no RNG draws are consumed).
Tensor4 inject(const Tensor4& x, double sigma_pct, double mean, std::uint64_t stream_seed);

// Sets noise_enabled / sigma_pct / mean on the listed layers. Throws on an
// out-of-range layer index.
void apply_noise_spec(ModelGraph& model, const NoiseSpec& spec);

// Spec covering every convolution layer of the model at the given sigma.
NoiseSpec all_conv_noise(const ModelGraph& model, double sigma_pct, double mean = 0.0,
                         std::uint64_t seed = 0);

}  // namespace anmd
