#include "anmd/fixed_point.hpp"

#include <cmath>

namespace anmd {

void validate_qformat(const QFormat& q) {
  if (q.frac_bits < 1 || q.frac_bits > 14)
    throw Error("QFormat: frac_bits must be in [1,14], got " + std::to_string(q.frac_bits));
}

std::int16_t saturate16(std::int64_t v) {
  if (v > 32767) return 32767;
  if (v < -32768) return -32768;
  return static_cast<std::int16_t>(v);
}

std::int64_t rne_shift(std::int64_t v, int bits) {
  if (bits <= 0) return v << (-bits);
  const std::int64_t q = v >> bits;  // floor
  const std::int64_t r = v - (q << bits);
  const std::int64_t half = std::int64_t{1} << (bits - 1);
  if (r > half || (r == half && (q & 1))) return q + 1;
  return q;
}

std::int16_t quantize_value(double x, const QFormat& q) {
  // rint honours the default FE_TONEAREST mode, i.e. ties to even.
  const double scaled = std::rint(x * q.scale());
  if (std::isnan(scaled)) throw Error("quantize: NaN input");
  if (scaled > 32767.0) return 32767;
  if (scaled < -32768.0) return -32768;
  return static_cast<std::int16_t>(scaled);
}

FxTensor quantize(const Tensor4& x, const QFormat& q) {
  validate_qformat(q);
  FxTensor out;
  out.shape = x.shape();
  out.q = q;
  out.data.resize(static_cast<std::size_t>(x.size()));
  for (std::int64_t i = 0; i < x.size(); ++i) out[i] = quantize_value(x[i], q);
  return out;
}

Tensor4 dequantize(const FxTensor& x) {
  Tensor4 out(x.shape);
  const double inv = 1.0 / x.q.scale();
  for (std::int64_t i = 0; i < x.size(); ++i) out[i] = static_cast<double>(x[i]) * inv;
  return out;
}

}  // namespace anmd
