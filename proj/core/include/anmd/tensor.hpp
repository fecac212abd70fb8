#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "anmd/errors.hpp"

namespace anmd {

struct Shape4 {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::int64_t elems() const {
    return static_cast<std::int64_t>(n) * c * h * w;
  }
  bool operator==(const Shape4&) const = default;
  std::string str() const;
};

// Dense NCHW tensor, row-major, double precision. The universal numeric
// carrier for activations, weights and gradients.
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(Shape4 shape, double fill = 0.0);
  static Tensor4 from(Shape4 shape, std::vector<double> data);

  const Shape4& shape() const { return shape_; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::int64_t i) { return data_[i]; }
  double operator[](std::int64_t i) const { return data_[i]; }

  std::int64_t index(int n, int c, int h, int w) const {
    return ((static_cast<std::int64_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  double& at(int n, int c, int h, int w) { return data_[index(n, c, h, w)]; }
  double at(int n, int c, int h, int w) const { return data_[index(n, c, h, w)]; }

  // Pointer to the start of sample n's (c,h,w) block.
  double* sample(int n) { return data_.data() + static_cast<std::int64_t>(n) * shape_.c * shape_.h * shape_.w; }
  const double* sample(int n) const {
    return data_.data() + static_cast<std::int64_t>(n) * shape_.c * shape_.h * shape_.w;
  }
  std::int64_t sample_elems() const { return static_cast<std::int64_t>(shape_.c) * shape_.h * shape_.w; }

  void fill(double value);
  bool same_shape(const Tensor4& other) const { return shape_ == other.shape_; }

  double sum() const;
  double mean_abs() const;
  double max_abs() const;
  bool all_finite() const;
  bool bitwise_equal(const Tensor4& other) const;

 private:
  Shape4 shape_{};
  std::vector<double> data_;
};

// Elementwise helpers shared by the numeric modules.
Tensor4 add(const Tensor4& a, const Tensor4& b);
Tensor4 sub(const Tensor4& a, const Tensor4& b);
Tensor4 mul(const Tensor4& a, const Tensor4& b);
Tensor4 scaled(const Tensor4& a, double s);
void add_inplace(Tensor4& a, const Tensor4& b);
void axpy_inplace(Tensor4& a, double s, const Tensor4& b);  // a += s*b

// Throws Error if any element is NaN or Inf; `what` names the producing op.
void require_finite(const Tensor4& t, const std::string& what);

}  // namespace anmd
