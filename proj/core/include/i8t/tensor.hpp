#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace i8t {

// Dense row-major shape, last dimension fastest. Extents are all >= 1.
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<int64_t> dims) : Shape(std::vector<int64_t>(dims)) {}
  explicit Shape(std::vector<int64_t> dims);

  int rank() const { return static_cast<int>(dims_.size()); }
  int64_t operator[](int i) const { return dims_[static_cast<size_t>(i)]; }
  const std::vector<int64_t>& dims() const { return dims_; }
  int64_t numel() const;

  int64_t flatten(std::span<const int64_t> idx) const;
  std::vector<int64_t> unflatten(int64_t flat) const;

  bool operator==(const Shape& o) const { return dims_ == o.dims_; }
  std::string str() const;

 private:
  std::vector<int64_t> dims_;
};

// 32-bit float storage; reductions over tensors accumulate in 64-bit.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(static_cast<size_t>(shape_.numel()), 0.0f) {}
  Tensor(Shape shape, std::vector<float> data);

  static Tensor full(Shape shape, float value);

  const Shape& shape() const { return shape_; }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }

  float operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }
  float& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }

  // 4-D convenience accessors (N,C,H,W)
  float at4(int64_t n, int64_t c, int64_t h, int64_t w) const;
  float& at4(int64_t n, int64_t c, int64_t h, int64_t w);

 private:
  Shape shape_;
  std::vector<float> data_;
};

// sqrt(sum x_i^2), accumulated in 64-bit
double l2_norm(const Tensor& t);
double sq_l2_norm(const Tensor& t);
double dot(const Tensor& a, const Tensor& b);
float max_abs(const Tensor& t);
bool has_nonfinite(const Tensor& t);

}  // namespace i8t
