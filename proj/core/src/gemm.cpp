#include "i8t/gemm.hpp"

#include <stdexcept>

#include "i8t/parallel.hpp"

namespace i8t {

namespace {

void check_gemm_dims(int64_t acols, int64_t brows) {
  if (acols != brows) throw std::invalid_argument("gemm_i8: inner dimensions do not match");
  if (acols > kMaxGemmDepth) throw std::invalid_argument("gemm_i8: depth exceeds i32 overflow bound");
}

// One output row: c[j] = sum_k a[k] * b[k][j]. Zero lhs entries are skipped;
// quantized gradients are mostly zero, which makes this the hot-path win.
void gemm_i8_row(const int8_t* arow, const int8_t* b, int32_t* crow, int64_t n, int64_t k) {
  for (int64_t j = 0; j < n; ++j) crow[j] = 0;
  for (int64_t kk = 0; kk < k; ++kk) {
    const int32_t aik = arow[kk];
    if (aik == 0) continue;
    const int8_t* brow = b + kk * n;
    for (int64_t j = 0; j < n; ++j) crow[j] += aik * static_cast<int32_t>(brow[j]);
  }
}

}  // namespace

Int32Matrix gemm_i8(const Int8Matrix& a, const Int8Matrix& b, int threads) {
  check_gemm_dims(a.cols, b.rows);
  Int32Matrix c(a.rows, b.cols);
  const int64_t n = b.cols;
  const int64_t k = a.cols;
  parallel_for(0, a.rows, threads, [&](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i)
      gemm_i8_row(a.data.data() + i * k, b.data.data(), c.data.data() + i * n, n, k);
  });
  return c;
}

Int8Matrix transpose(const Int8Matrix& m) {
  Int8Matrix t(m.cols, m.rows);
  for (int64_t i = 0; i < m.rows; ++i)
    for (int64_t j = 0; j < m.cols; ++j) t.at(j, i) = m.at(i, j);
  return t;
}

Int32Matrix gemm_i8_fused_lhs(const Tensor& a_rowmajor, const QuantParams& pa, RoundingMode mode,
                              LcgStream* stream, const Int8Matrix& b) {
  if (a_rowmajor.shape().rank() != 2) throw std::invalid_argument("gemm_i8_fused_lhs: lhs must be 2-D");
  const int64_t m = a_rowmajor.shape()[0];
  const int64_t k = a_rowmajor.shape()[1];
  check_gemm_dims(k, b.rows);
  Int32Matrix c(m, b.cols);
  std::vector<int8_t> qrow(static_cast<size_t>(k));
  const float* pa_data = a_rowmajor.data();
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t kk = 0; kk < k; ++kk)
      qrow[static_cast<size_t>(kk)] = quantize_value(pa_data[i * k + kk], pa, mode, stream);
    gemm_i8_row(qrow.data(), b.data.data(), c.data.data() + i * b.cols, b.cols, k);
  }
  return c;
}

void gemm_f32(const float* a, const float* b, float* c, int64_t m, int64_t n, int64_t k, int threads) {
  // 64-bit accumulation per output element, fixed ascending-k order.
  parallel_for(0, m, threads, [&](int64_t lo, int64_t hi) {
    std::vector<double> acc(static_cast<size_t>(n));
    for (int64_t i = lo; i < hi; ++i) {
      for (int64_t j = 0; j < n; ++j) acc[static_cast<size_t>(j)] = 0.0;
      const float* arow = a + i * k;
      for (int64_t kk = 0; kk < k; ++kk) {
        const double aik = arow[kk];
        if (aik == 0.0) continue;
        const float* brow = b + kk * n;
        for (int64_t j = 0; j < n; ++j) acc[static_cast<size_t>(j)] += aik * static_cast<double>(brow[j]);
      }
      float* crow = c + i * n;
      for (int64_t j = 0; j < n; ++j) crow[j] = static_cast<float>(acc[static_cast<size_t>(j)]);
    }
  });
}

}  // namespace i8t
