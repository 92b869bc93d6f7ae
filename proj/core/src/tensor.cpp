#include "i8t/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace i8t {

Shape::Shape(std::vector<int64_t> dims) : dims_(std::move(dims)) {
  for (int64_t d : dims_) {
    if (d < 1) throw std::invalid_argument("Shape: every extent must be >= 1");
  }
}

int64_t Shape::numel() const {
  int64_t n = 1;
  for (int64_t d : dims_) n *= d;
  return n;
}

int64_t Shape::flatten(std::span<const int64_t> idx) const {
  if (idx.size() != dims_.size()) throw std::invalid_argument("Shape::flatten: rank mismatch");
  int64_t flat = 0;
  for (size_t i = 0; i < dims_.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= dims_[i]) throw std::out_of_range("Shape::flatten: index out of range");
    flat = flat * dims_[i] + idx[i];
  }
  return flat;
}

std::vector<int64_t> Shape::unflatten(int64_t flat) const {
  if (flat < 0 || flat >= numel()) throw std::out_of_range("Shape::unflatten: out of range");
  std::vector<int64_t> idx(dims_.size());
  for (size_t i = dims_.size(); i-- > 0;) {
    idx[i] = flat % dims_[i];
    flat /= dims_[i];
  }
  return idx;
}

std::string Shape::str() const {
  std::ostringstream os;
  os << '(';
  for (size_t i = 0; i < dims_.size(); ++i) os << (i ? "," : "") << dims_[i];
  os << ')';
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (static_cast<int64_t>(data_.size()) != shape_.numel())
    throw std::invalid_argument("Tensor: data length does not match shape element count");
}

Tensor Tensor::full(Shape shape, float value) {
  Tensor t(std::move(shape));
  for (float& v : t.data_) v = value;
  return t;
}

float Tensor::at4(int64_t n, int64_t c, int64_t h, int64_t w) const {
  const Shape& s = shape_;
  return data_[static_cast<size_t>(((n * s[1] + c) * s[2] + h) * s[3] + w)];
}

float& Tensor::at4(int64_t n, int64_t c, int64_t h, int64_t w) {
  const Shape& s = shape_;
  return data_[static_cast<size_t>(((n * s[1] + c) * s[2] + h) * s[3] + w)];
}

double l2_norm(const Tensor& t) { return std::sqrt(sq_l2_norm(t)); }

double sq_l2_norm(const Tensor& t) {
  double acc = 0.0;
  for (float v : t.values()) acc += static_cast<double>(v) * static_cast<double>(v);
  return acc;
}

double dot(const Tensor& a, const Tensor& b) {
  if (a.numel() != b.numel()) throw std::invalid_argument("dot: size mismatch");
  double acc = 0.0;
  const float* pa = a.data();
  const float* pb = b.data();
  for (int64_t i = 0; i < a.numel(); ++i) acc += static_cast<double>(pa[i]) * static_cast<double>(pb[i]);
  return acc;
}

float max_abs(const Tensor& t) {
  float m = 0.0f;
  for (float v : t.values()) {
    float a = std::fabs(v);
    if (a > m) m = a;
  }
  return m;
}

bool has_nonfinite(const Tensor& t) {
  for (float v : t.values()) {
    if (!std::isfinite(v)) return true;
  }
  return false;
}

}  // namespace i8t
