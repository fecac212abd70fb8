#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "anmd/tensor.hpp"

namespace anmd {

struct Dataset {
  Tensor4 images;           // (n, 3, size, size), values in [0,1]
  std::vector<int> labels;  // in [0, classes)
  int classes = 10;

  int size() const { return images.shape().n; }

  // Deterministic split: first n_first samples and the rest.
  std::pair<Dataset, Dataset> split(int n_first) const;
  Dataset take(int n) const { return split(n).first; }
};

// CIFAR-10 binary batches: each record is 1 label byte followed by 3072 pixel
// bytes (CHW, R plane then G then B). Pixels scale to [0,1] by /255.
Dataset load_cifar10(const std::vector<std::string>& paths, int classes = 10);

// Writes the dataset in the same binary record format (pixels rounded to the
// nearest byte). Lets synthetic data flow through the bit-exact loader path.
void save_cifar10(const Dataset& data, const std::string& path);

struct SyntheticSpec {
  std::uint64_t seed = 0;
  int n = 0;
  int classes = 10;
  int size = 32;
  // Class pattern amplitude and per-pixel noise; together they set how
  // separable the classes are.
  double amplitude = 0.25;
  double pixel_noise = 0.18;
};

// Class-conditioned smooth Gaussian blobs over pixels, deterministic in seed.
// Labels cycle 0..classes-1.
Dataset gen_synthetic(const SyntheticSpec& spec);
Dataset gen_synthetic(std::uint64_t seed, int n, int classes, int size);

// Gathers images/labels at the given indices.
Dataset subset(const Dataset& data, const std::vector<int>& indices);

}  // namespace anmd
