#include "anmd/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "anmd/rng.hpp"

namespace anmd {

namespace {
constexpr std::int64_t kCifarRecordBytes = 3073;  // 1 label + 3*32*32 pixels
constexpr std::int64_t kCifarPixels = 3072;
}  // namespace

std::pair<Dataset, Dataset> Dataset::split(int n_first) const {
  n_first = std::min(n_first, size());
  std::vector<int> head(static_cast<std::size_t>(n_first));
  std::vector<int> tail(static_cast<std::size_t>(size() - n_first));
  for (int i = 0; i < n_first; ++i) head[static_cast<std::size_t>(i)] = i;
  for (int i = n_first; i < size(); ++i) tail[static_cast<std::size_t>(i - n_first)] = i;
  return {subset(*this, head), subset(*this, tail)};
}

Dataset load_cifar10(const std::vector<std::string>& paths, int classes) {
  if (paths.empty()) throw Error("load_cifar10: no input files");

  std::vector<unsigned char> raw;
  for (const std::string& path : paths) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("load_cifar10: cannot open " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    if (buf.empty() || static_cast<std::int64_t>(buf.size()) % kCifarRecordBytes != 0)
      throw Error("load_cifar10: " + path + " has " + std::to_string(buf.size()) +
                  " bytes, not a multiple of " + std::to_string(kCifarRecordBytes));
    raw.insert(raw.end(), buf.begin(), buf.end());
  }

  const std::int64_t n = static_cast<std::int64_t>(raw.size()) / kCifarRecordBytes;
  Dataset data;
  data.classes = classes;
  data.images = Tensor4(Shape4{static_cast<int>(n), 3, 32, 32});
  data.labels.resize(static_cast<std::size_t>(n));
  for (std::int64_t r = 0; r < n; ++r) {
    const unsigned char* rec = raw.data() + r * kCifarRecordBytes;
    const int label = rec[0];
    if (label < 0 || label >= classes)
      throw Error("load_cifar10: record " + std::to_string(r) + " has label " +
                  std::to_string(label) + " outside [0," + std::to_string(classes) + ")");
    data.labels[static_cast<std::size_t>(r)] = label;
    double* img = data.images.sample(static_cast<int>(r));
    for (std::int64_t i = 0; i < kCifarPixels; ++i)
      img[i] = static_cast<double>(rec[1 + i]) / 255.0;
  }
  return data;
}

void save_cifar10(const Dataset& data, const std::string& path) {
  const Shape4 s = data.images.shape();
  if (s.c != 3 || s.h != 32 || s.w != 32)
    throw Error("save_cifar10: images must be (n,3,32,32), got " + s.str());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("save_cifar10: cannot open " + path + " for writing");
  std::vector<unsigned char> rec(static_cast<std::size_t>(kCifarRecordBytes));
  for (int n = 0; n < s.n; ++n) {
    rec[0] = static_cast<unsigned char>(data.labels[static_cast<std::size_t>(n)]);
    const double* img = data.images.sample(n);
    for (std::int64_t i = 0; i < kCifarPixels; ++i) {
      const double v = std::clamp(img[i], 0.0, 1.0) * 255.0;
      rec[static_cast<std::size_t>(1 + i)] =
          static_cast<unsigned char>(std::lround(v));
    }
    out.write(reinterpret_cast<const char*>(rec.data()), kCifarRecordBytes);
  }
  if (!out) throw Error("save_cifar10: write failed for " + path);
}

namespace {

// Smooth per-class pattern: a few low-frequency cosine modes per channel.
std::vector<double> class_pattern(std::uint64_t seed, int cls, int size) {
  RngStream rng(derive_seed(seed, RngTag::kData, static_cast<std::uint64_t>(cls)));
  const int modes = 4;
  std::vector<double> img(static_cast<std::size_t>(3 * size * size), 0.0);
  for (int c = 0; c < 3; ++c) {
    for (int m = 0; m < modes; ++m) {
      const double fx = rng.next_uniform(0.5, 2.5);
      const double fy = rng.next_uniform(0.5, 2.5);
      const double phase = rng.next_uniform(0.0, 2.0 * std::numbers::pi);
      const double amp = rng.next_uniform(0.4, 1.0);
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          const double arg = 2.0 * std::numbers::pi * (fx * x + fy * y) / size + phase;
          img[static_cast<std::size_t>((c * size + y) * size + x)] += amp * std::cos(arg);
        }
      }
    }
  }
  // Normalize each channel pattern to unit RMS so amplitude is meaningful.
  for (int c = 0; c < 3; ++c) {
    double ss = 0.0;
    for (int i = 0; i < size * size; ++i)
      ss += img[static_cast<std::size_t>(c * size * size + i)] *
            img[static_cast<std::size_t>(c * size * size + i)];
    const double rms = std::sqrt(ss / (size * size));
    if (rms > 0.0)
      for (int i = 0; i < size * size; ++i)
        img[static_cast<std::size_t>(c * size * size + i)] /= rms;
  }
  return img;
}

}  // namespace

Dataset gen_synthetic(const SyntheticSpec& spec) {
  if (spec.n < 0 || spec.classes < 1 || spec.size < 1)
    throw Error("gen_synthetic: invalid spec");
  Dataset data;
  data.classes = spec.classes;
  data.images = Tensor4(Shape4{spec.n, 3, spec.size, spec.size});
  data.labels.resize(static_cast<std::size_t>(spec.n));

  std::vector<std::vector<double>> patterns;
  patterns.reserve(static_cast<std::size_t>(spec.classes));
  for (int c = 0; c < spec.classes; ++c) patterns.push_back(class_pattern(spec.seed, c, spec.size));

  const std::int64_t per_sample = data.images.sample_elems();
  for (int i = 0; i < spec.n; ++i) {
    const int cls = i % spec.classes;
    data.labels[static_cast<std::size_t>(i)] = cls;
    RngStream rng(derive_seed(spec.seed, RngTag::kData, 0x5a5a, static_cast<std::uint64_t>(i)));
    double* img = data.images.sample(i);
    const std::vector<double>& pat = patterns[static_cast<std::size_t>(cls)];
    for (std::int64_t p = 0; p < per_sample; ++p) {
      const double v = 0.5 + spec.amplitude * pat[static_cast<std::size_t>(p)] +
                       spec.pixel_noise * rng.next_gauss();
      img[p] = std::clamp(v, 0.0, 1.0);
    }
  }
  return data;
}

Dataset gen_synthetic(std::uint64_t seed, int n, int classes, int size) {
  SyntheticSpec spec;
  spec.seed = seed;
  spec.n = n;
  spec.classes = classes;
  spec.size = size;
  return gen_synthetic(spec);
}

Dataset subset(const Dataset& data, const std::vector<int>& indices) {
  Dataset out;
  out.classes = data.classes;
  const Shape4 s = data.images.shape();
  out.images = Tensor4(Shape4{static_cast<int>(indices.size()), s.c, s.h, s.w});
  out.labels.resize(indices.size());
  const std::int64_t per_sample = data.images.sample_elems();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const int src = indices[i];
    if (src < 0 || src >= s.n) throw Error("subset: index out of range");
    std::copy_n(data.images.sample(src), per_sample,
                out.images.sample(static_cast<int>(i)));
    out.labels[i] = data.labels[static_cast<std::size_t>(src)];
  }
  return out;
}

}  // namespace anmd
