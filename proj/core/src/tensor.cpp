#include "anmd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace anmd {

std::string Shape4::str() const {
  std::ostringstream os;
  os << "(" << n << "," << c << "," << h << "," << w << ")";
  return os.str();
}

Tensor4::Tensor4(Shape4 shape, double fill) : shape_(shape) {
  if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0)
    throw Error("Tensor4: negative dimension in shape " + shape.str());
  data_.assign(static_cast<std::size_t>(shape.elems()), fill);
}

Tensor4 Tensor4::from(Shape4 shape, std::vector<double> data) {
  if (static_cast<std::int64_t>(data.size()) != shape.elems())
    throw Error("Tensor4: data length " + std::to_string(data.size()) +
                " does not match shape " + shape.str());
  Tensor4 t;
  t.shape_ = shape;
  t.data_ = std::move(data);
  return t;
}

void Tensor4::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

double Tensor4::sum() const {
  double s = 0.0;
  for (double v : data_) s += v;
  return s;
}

double Tensor4::mean_abs() const {
  if (data_.empty()) return 0.0;
  double s = 0.0;
  for (double v : data_) s += std::abs(v);
  return s / static_cast<double>(data_.size());
}

double Tensor4::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

bool Tensor4::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

bool Tensor4::bitwise_equal(const Tensor4& other) const {
  if (shape_ != other.shape_) return false;
  return data_.empty() ||
         std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(double)) == 0;
}

namespace {
void require_same_shape(const Tensor4& a, const Tensor4& b, const char* op) {
  if (!a.same_shape(b))
    throw Error(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " +
                b.shape().str());
}
}  // namespace

Tensor4 add(const Tensor4& a, const Tensor4& b) {
  require_same_shape(a, b, "add");
  Tensor4 out(a.shape());
  for (std::int64_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Tensor4 sub(const Tensor4& a, const Tensor4& b) {
  require_same_shape(a, b, "sub");
  Tensor4 out(a.shape());
  for (std::int64_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

Tensor4 mul(const Tensor4& a, const Tensor4& b) {
  require_same_shape(a, b, "mul");
  Tensor4 out(a.shape());
  for (std::int64_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

Tensor4 scaled(const Tensor4& a, double s) {
  Tensor4 out(a.shape());
  for (std::int64_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
  return out;
}

void add_inplace(Tensor4& a, const Tensor4& b) {
  require_same_shape(a, b, "add_inplace");
  for (std::int64_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

void axpy_inplace(Tensor4& a, double s, const Tensor4& b) {
  require_same_shape(a, b, "axpy_inplace");
  for (std::int64_t i = 0; i < a.size(); ++i) a[i] += s * b[i];
}

void require_finite(const Tensor4& t, const std::string& what) {
  if (!t.all_finite()) throw Error(what + ": non-finite value in tensor " + t.shape().str());
}

}  // namespace anmd
