#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace anmd {

// Purpose tags for derived RNG streams. Keeping stream families disjoint means
// e.g. attaching a denoiser never shifts the injected-noise draws.
enum class RngTag : std::uint64_t {
  kInit = 0x11,      // weight initialization
  kNoise = 0x22,     // injected activation noise
  kEpsilon = 0x33,   // denoiser sampling noise
  kShuffle = 0x44,   // epoch shuffling
  kData = 0x55,      // synthetic dataset generation
  kEval = 0x66,      // evaluation noise seeds
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Deterministic counter-free PRNG stream (splitmix64). Streams are cheap to
// construct, so callers derive one per (seed, tag, step, layer, sample) and
// never share streams across purposes.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform in the open interval (0,1).
  double next_uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_uniform(); }

  // Standard normal via the Box-Muller cosine branch.
  double next_gauss() {
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Uniform integer in [0, n), rejection sampled.
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

 private:
  std::uint64_t state_;
};

// Hash-combines seed material into a new stream seed.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a ^ (b + 0x9E3779B97F4A7C15ull + (a << 6) + (a >> 2));
  return splitmix64(s);
}

inline std::uint64_t derive_seed(std::uint64_t seed, RngTag tag) {
  return mix_seed(seed, static_cast<std::uint64_t>(tag));
}
inline std::uint64_t derive_seed(std::uint64_t seed, RngTag tag, std::uint64_t a) {
  return mix_seed(derive_seed(seed, tag), a);
}
inline std::uint64_t derive_seed(std::uint64_t seed, RngTag tag, std::uint64_t a,
                                 std::uint64_t b) {
  return mix_seed(derive_seed(seed, tag, a), b);
}
inline std::uint64_t derive_seed(std::uint64_t seed, RngTag tag, std::uint64_t a,
                                 std::uint64_t b, std::uint64_t c) {
  return mix_seed(derive_seed(seed, tag, a, b), c);
}

}  // namespace anmd
