#pragma once

#include <cstdint>
#include <vector>

#include "anmd/tensor.hpp"

namespace anmd {

// Signed 16-bit two's-complement fixed point with f fractional bits (Qm.f,
// m = 15 - f integer bits). The hardware accumulator is 40 bits wide.
struct QFormat {
  int frac_bits = 8;

  double scale() const { return static_cast<double>(std::int64_t{1} << frac_bits); }
  double min_value() const { return -32768.0 / scale(); }
  double max_value() const { return 32767.0 / scale(); }
  bool operator==(const QFormat&) const = default;
};

inline constexpr int kFxTotalBits = 16;
inline constexpr int kFxAccumulatorBits = 40;

void validate_qformat(const QFormat& q);

struct FxTensor {
  Shape4 shape;
  std::vector<std::int16_t> data;
  QFormat q;

  std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
  std::int16_t& operator[](std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
  std::int16_t operator[](std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }
  bool bitwise_equal(const FxTensor& other) const {
    return shape == other.shape && q == other.q && data == other.data;
  }
};

// Round-to-nearest-even of x * 2^f, saturated to the int16 range.
std::int16_t quantize_value(double x, const QFormat& q);
FxTensor quantize(const Tensor4& x, const QFormat& q);
Tensor4 dequantize(const FxTensor& x);

// Round-to-nearest-even right shift; the single rounding point for
// fixed-point products and accumulator writebacks.
std::int64_t rne_shift(std::int64_t v, int bits);

std::int16_t saturate16(std::int64_t v);

}  // namespace anmd
