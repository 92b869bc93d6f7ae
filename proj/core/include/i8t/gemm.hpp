#pragma once

#include <cstdint>
#include <vector>

#include "i8t/quantize.hpp"
#include "i8t/tensor.hpp"

namespace i8t {

struct Int8Matrix {
  int64_t rows = 0;
  int64_t cols = 0;
  std::vector<int8_t> data;  // row-major, entries in [-127, 127]

  Int8Matrix() = default;
  Int8Matrix(int64_t r, int64_t c) : rows(r), cols(c), data(static_cast<size_t>(r * c), 0) {}
  int8_t at(int64_t i, int64_t j) const { return data[static_cast<size_t>(i * cols + j)]; }
  int8_t& at(int64_t i, int64_t j) { return data[static_cast<size_t>(i * cols + j)]; }
};

struct Int32Matrix {
  int64_t rows = 0;
  int64_t cols = 0;
  std::vector<int32_t> data;

  Int32Matrix() = default;
  Int32Matrix(int64_t r, int64_t c) : rows(r), cols(c), data(static_cast<size_t>(r * c), 0) {}
  int32_t at(int64_t i, int64_t j) const { return data[static_cast<size_t>(i * cols + j)]; }
  int32_t& at(int64_t i, int64_t j) { return data[static_cast<size_t>(i * cols + j)]; }
};

// 127*127*K must stay below 2^31; K up to 130000 is safe.
inline constexpr int64_t kMaxGemmDepth = 130000;

// C = A * B with exact i32 accumulation. Blocking and thread count never
// change the result (integer addition reorders freely, overflow excluded by
// the depth bound).
Int32Matrix gemm_i8(const Int8Matrix& a, const Int8Matrix& b, int threads = 0);

Int8Matrix transpose(const Int8Matrix& m);

// Fused quantize-GEMM: rows of the float left operand are quantized on the
// fly (one row buffer) instead of materializing the whole quantized matrix.
// Draw order equals plain row-major quantize, so the result is bit-identical
// to quantize(a) followed by gemm_i8.
Int32Matrix gemm_i8_fused_lhs(const Tensor& a_rowmajor, const QuantParams& pa, RoundingMode mode,
                              LcgStream* stream, const Int8Matrix& b);

// Float GEMM used by the FP32 baseline path; accumulates in 64-bit per output
// element in a fixed k order, so parallel schedules agree bit-for-bit.
void gemm_f32(const float* a, const float* b, float* c, int64_t m, int64_t n, int64_t k,
              int threads = 0);

}  // namespace i8t
