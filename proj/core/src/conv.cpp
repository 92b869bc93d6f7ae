#include "i8t/conv.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "i8t/parallel.hpp"

namespace i8t {

void ConvGeometry::validate() const {
  if (n < 1 || c < 1 || h < 1 || w < 1 || k < 1 || kh < 1 || kw < 1 || stride < 1 || pad < 0)
    throw std::invalid_argument("ConvGeometry: extents must be positive, pad nonnegative");
  if (depthwise && k != c) throw std::invalid_argument("ConvGeometry: depthwise requires k == c");
  if ((h + 2 * pad - kh) % stride != 0 || (w + 2 * pad - kw) % stride != 0 ||
      h + 2 * pad < kh || w + 2 * pad < kw)
    throw std::invalid_argument("ConvGeometry: output size is not a positive integer");
}

namespace {

// Shared indexing for both element types.
template <typename T>
void im2col_impl(const T* x, const ConvGeometry& g, int64_t c_lo, int64_t c_hi, T* out) {
  const int64_t oh = g.out_h(), ow = g.out_w();
  const int64_t cols = g.n * oh * ow;
  int64_t r = 0;
  for (int64_t c = c_lo; c < c_hi; ++c) {
    for (int64_t ki = 0; ki < g.kh; ++ki) {
      for (int64_t kj = 0; kj < g.kw; ++kj, ++r) {
        T* orow = out + r * cols;
        for (int64_t n = 0; n < g.n; ++n) {
          const T* xc = x + (n * g.c + c) * g.h * g.w;
          for (int64_t i = 0; i < oh; ++i) {
            const int64_t ih = i * g.stride + ki - g.pad;
            for (int64_t j = 0; j < ow; ++j) {
              const int64_t iw = j * g.stride + kj - g.pad;
              T v = 0;
              if (ih >= 0 && ih < g.h && iw >= 0 && iw < g.w) v = xc[ih * g.w + iw];
              orow[(n * oh + i) * ow + j] = v;
            }
          }
        }
      }
    }
  }
}

// Gather (N,K,H',W') gradient into a (K x N*H'*W') matrix.
template <typename Src, typename Dst>
void gather_gz(const Src* gz, int64_t n, int64_t k, int64_t oh, int64_t ow, Dst* out) {
  for (int64_t kk = 0; kk < k; ++kk)
    for (int64_t nn = 0; nn < n; ++nn)
      for (int64_t p = 0; p < oh * ow; ++p)
        out[kk * (n * oh * ow) + nn * oh * ow + p] = gz[(nn * k + kk) * oh * ow + p];
}

// Scatter-add a (rows x N*H'*W') column matrix back to (N,C,H,W); Acc is
// int64 or double so the accumulation is exact / 64-bit.
template <typename T, typename Acc>
void col2im_accum(const T* colmat, const ConvGeometry& g, int64_t c_lo, int64_t c_hi, Acc* out) {
  const int64_t oh = g.out_h(), ow = g.out_w();
  const int64_t cols = g.n * oh * ow;
  int64_t r = 0;
  for (int64_t c = c_lo; c < c_hi; ++c) {
    for (int64_t ki = 0; ki < g.kh; ++ki) {
      for (int64_t kj = 0; kj < g.kw; ++kj, ++r) {
        const T* crow = colmat + r * cols;
        for (int64_t n = 0; n < g.n; ++n) {
          Acc* xc = out + (n * g.c + c) * g.h * g.w;
          for (int64_t i = 0; i < oh; ++i) {
            const int64_t ih = i * g.stride + ki - g.pad;
            if (ih < 0 || ih >= g.h) continue;
            for (int64_t j = 0; j < ow; ++j) {
              const int64_t iw = j * g.stride + kj - g.pad;
              if (iw < 0 || iw >= g.w) continue;
              xc[ih * g.w + iw] += static_cast<Acc>(crow[(n * oh + i) * ow + j]);
            }
          }
        }
      }
    }
  }
}

void check_operands(const QuantizedTensor& a, const QuantizedTensor& w, const ConvGeometry& g) {
  g.validate();
  if (!(a.shape == g.input_shape())) throw std::invalid_argument("conv2d_q: activation shape mismatch");
  if (!(w.shape == g.weight_shape())) throw std::invalid_argument("conv2d_q: weight shape mismatch");
}

void check_depth(int64_t depth) {
  if (depth > kMaxGemmDepth) throw std::invalid_argument("conv: reduction depth exceeds i32 overflow bound");
}

}  // namespace

void im2col_i8(const int8_t* x, const ConvGeometry& g, int8_t* out) { im2col_impl(x, g, 0, g.c, out); }
void im2col_f32(const float* x, const ConvGeometry& g, float* out) { im2col_impl(x, g, 0, g.c, out); }

void im2col_channel_i8(const int8_t* x, const ConvGeometry& g, int64_t channel, int8_t* out) {
  im2col_impl(x, g, channel, channel + 1, out);
}
void im2col_channel_f32(const float* x, const ConvGeometry& g, int64_t channel, float* out) {
  im2col_impl(x, g, channel, channel + 1, out);
}

Tensor conv2d_q(const QuantizedTensor& a, const QuantizedTensor& w, const ConvGeometry& g, int threads) {
  check_operands(a, w, g);
  const int64_t oh = g.out_h(), ow = g.out_w();
  const int64_t m = g.out_positions();
  const double rescale = static_cast<double>(a.params.scale) * static_cast<double>(w.params.scale);
  Tensor out(g.output_shape());

  if (g.depthwise) {
    check_depth(g.kh * g.kw);
    parallel_for(0, g.c, threads, [&](int64_t lo, int64_t hi) {
      Int8Matrix col(g.kh * g.kw, m);
      for (int64_t c = lo; c < hi; ++c) {
        im2col_channel_i8(a.q.data(), g, c, col.data.data());
        Int8Matrix wrow(1, g.kh * g.kw);
        std::copy_n(w.q.data() + c * g.kh * g.kw, g.kh * g.kw, wrow.data.begin());
        Int32Matrix z = gemm_i8(wrow, col, 1);
        for (int64_t n = 0; n < g.n; ++n)
          for (int64_t p = 0; p < oh * ow; ++p)
            out.data()[(n * g.c + c) * oh * ow + p] =
                static_cast<float>(rescale * z.data[static_cast<size_t>(n * oh * ow + p)]);
      }
    });
    return out;
  }

  check_depth(g.c * g.kh * g.kw);
  Int8Matrix col(g.c * g.kh * g.kw, m);
  im2col_i8(a.q.data(), g, col.data.data());
  Int8Matrix wmat(g.k, g.c * g.kh * g.kw);
  wmat.data.assign(w.q.begin(), w.q.end());
  Int32Matrix z = gemm_i8(wmat, col, threads);
  for (int64_t n = 0; n < g.n; ++n)
    for (int64_t kk = 0; kk < g.k; ++kk)
      for (int64_t p = 0; p < oh * ow; ++p)
        out.data()[(n * g.k + kk) * oh * ow + p] =
            static_cast<float>(rescale * z.data[static_cast<size_t>(kk * m + n * oh * ow + p)]);
  return out;
}

std::pair<Tensor, Tensor> conv2d_backward_q(const QuantizedTensor& g_z, const QuantizedTensor& a,
                                            const QuantizedTensor& w, const ConvGeometry& g,
                                            int threads) {
  check_operands(a, w, g);
  if (!(g_z.shape == g.output_shape())) throw std::invalid_argument("conv2d_backward_q: g_z shape mismatch");
  const int64_t oh = g.out_h(), ow = g.out_w();
  const int64_t m = g.out_positions();
  const double rescale_w = static_cast<double>(g_z.params.scale) * static_cast<double>(a.params.scale);
  const double rescale_a = static_cast<double>(g_z.params.scale) * static_cast<double>(w.params.scale);
  Tensor grad_w(g.weight_shape());
  Tensor grad_a(g.input_shape());

  if (g.depthwise) {
    check_depth(m);
    std::vector<int64_t> acc(static_cast<size_t>(g.n * g.c * g.h * g.w), 0);
    parallel_for(0, g.c, threads, [&](int64_t lo, int64_t hi) {
      Int8Matrix col(g.kh * g.kw, m);
      Int8Matrix gmat(1, m);
      for (int64_t c = lo; c < hi; ++c) {
        im2col_channel_i8(a.q.data(), g, c, col.data.data());
        for (int64_t n = 0; n < g.n; ++n)
          std::copy_n(g_z.q.data() + (n * g.c + c) * oh * ow, oh * ow,
                      gmat.data.begin() + n * oh * ow);
        // g_W row: (1 x m) * (m x kh*kw)
        Int32Matrix gw = gemm_i8(gmat, transpose(col), 1);
        for (int64_t p = 0; p < g.kh * g.kw; ++p)
          grad_w.data()[c * g.kh * g.kw + p] = static_cast<float>(rescale_w * gw.data[static_cast<size_t>(p)]);
        // g_a columns: (kh*kw x 1) * (1 x m), scattered back per channel
        Int8Matrix wcol(g.kh * g.kw, 1);
        std::copy_n(w.q.data() + c * g.kh * g.kw, g.kh * g.kw, wcol.data.begin());
        Int32Matrix gcol = gemm_i8(wcol, gmat, 1);
        col2im_accum<int32_t, int64_t>(gcol.data.data(), g, c, c + 1, acc.data());
      }
    });
    for (int64_t i = 0; i < grad_a.numel(); ++i)
      grad_a.data()[i] = static_cast<float>(rescale_a * static_cast<double>(acc[static_cast<size_t>(i)]));
    return {std::move(grad_w), std::move(grad_a)};
  }

  check_depth(m);
  check_depth(g.k);
  Int8Matrix col(g.c * g.kh * g.kw, m);
  im2col_i8(a.q.data(), g, col.data.data());
  Int8Matrix gmat(g.k, m);
  gather_gz(g_z.q.data(), g.n, g.k, oh, ow, gmat.data.data());

  Int32Matrix gw = gemm_i8(gmat, transpose(col), threads);  // (K x C*kH*kW)
  for (int64_t i = 0; i < grad_w.numel(); ++i)
    grad_w.data()[i] = static_cast<float>(rescale_w * gw.data[static_cast<size_t>(i)]);

  Int8Matrix wmat(g.k, g.c * g.kh * g.kw);
  wmat.data.assign(w.q.begin(), w.q.end());
  Int32Matrix gcol = gemm_i8(transpose(wmat), gmat, threads);  // (C*kH*kW x m)
  std::vector<int64_t> acc(static_cast<size_t>(grad_a.numel()), 0);
  col2im_accum<int32_t, int64_t>(gcol.data.data(), g, 0, g.c, acc.data());
  for (int64_t i = 0; i < grad_a.numel(); ++i)
    grad_a.data()[i] = static_cast<float>(rescale_a * static_cast<double>(acc[static_cast<size_t>(i)]));
  return {std::move(grad_w), std::move(grad_a)};
}

Tensor conv2d_f32(const Tensor& a, const Tensor& w, const ConvGeometry& g, int threads) {
  g.validate();
  if (!(a.shape() == g.input_shape())) throw std::invalid_argument("conv2d_f32: activation shape mismatch");
  if (!(w.shape() == g.weight_shape())) throw std::invalid_argument("conv2d_f32: weight shape mismatch");
  const int64_t oh = g.out_h(), ow = g.out_w();
  const int64_t m = g.out_positions();
  Tensor out(g.output_shape());

  if (g.depthwise) {
    parallel_for(0, g.c, threads, [&](int64_t lo, int64_t hi) {
      std::vector<float> col(static_cast<size_t>(g.kh * g.kw * m));
      std::vector<float> z(static_cast<size_t>(m));
      for (int64_t c = lo; c < hi; ++c) {
        im2col_channel_f32(a.data(), g, c, col.data());
        gemm_f32(w.data() + c * g.kh * g.kw, col.data(), z.data(), 1, m, g.kh * g.kw, 1);
        for (int64_t n = 0; n < g.n; ++n)
          for (int64_t p = 0; p < oh * ow; ++p)
            out.data()[(n * g.c + c) * oh * ow + p] = z[static_cast<size_t>(n * oh * ow + p)];
      }
    });
    return out;
  }

  std::vector<float> col(static_cast<size_t>(g.c * g.kh * g.kw * m));
  im2col_f32(a.data(), g, col.data());
  std::vector<float> z(static_cast<size_t>(g.k * m));
  gemm_f32(w.data(), col.data(), z.data(), g.k, m, g.c * g.kh * g.kw, threads);
  for (int64_t n = 0; n < g.n; ++n)
    for (int64_t kk = 0; kk < g.k; ++kk)
      for (int64_t p = 0; p < oh * ow; ++p)
        out.data()[(n * g.k + kk) * oh * ow + p] = z[static_cast<size_t>(kk * m + n * oh * ow + p)];
  return out;
}

std::pair<Tensor, Tensor> conv2d_backward_f32(const Tensor& g_z, const Tensor& a, const Tensor& w,
                                              const ConvGeometry& g, int threads) {
  g.validate();
  if (!(g_z.shape() == g.output_shape())) throw std::invalid_argument("conv2d_backward_f32: g_z shape mismatch");
  const int64_t oh = g.out_h(), ow = g.out_w();
  const int64_t m = g.out_positions();
  Tensor grad_w(g.weight_shape());
  Tensor grad_a(g.input_shape());

  if (g.depthwise) {
    std::vector<double> acc(static_cast<size_t>(grad_a.numel()), 0.0);
    parallel_for(0, g.c, threads, [&](int64_t lo, int64_t hi) {
      std::vector<float> col(static_cast<size_t>(g.kh * g.kw * m));
      std::vector<float> colT(static_cast<size_t>(m * g.kh * g.kw));
      std::vector<float> grow(static_cast<size_t>(m));
      std::vector<float> gcol(static_cast<size_t>(g.kh * g.kw * m));
      for (int64_t c = lo; c < hi; ++c) {
        im2col_channel_f32(a.data(), g, c, col.data());
        for (int64_t n = 0; n < g.n; ++n)
          std::copy_n(g_z.data() + (n * g.c + c) * oh * ow, oh * ow, grow.begin() + n * oh * ow);
        for (int64_t r = 0; r < g.kh * g.kw; ++r)
          for (int64_t j = 0; j < m; ++j) colT[static_cast<size_t>(j * g.kh * g.kw + r)] = col[static_cast<size_t>(r * m + j)];
        gemm_f32(grow.data(), colT.data(), grad_w.data() + c * g.kh * g.kw, 1, g.kh * g.kw, m, 1);
        gemm_f32(w.data() + c * g.kh * g.kw, grow.data(), gcol.data(), g.kh * g.kw, m, 1, 1);
        col2im_accum<float, double>(gcol.data(), g, c, c + 1, acc.data());
      }
    });
    for (int64_t i = 0; i < grad_a.numel(); ++i) grad_a.data()[i] = static_cast<float>(acc[static_cast<size_t>(i)]);
    return {std::move(grad_w), std::move(grad_a)};
  }

  std::vector<float> col(static_cast<size_t>(g.c * g.kh * g.kw * m));
  im2col_f32(a.data(), g, col.data());
  std::vector<float> gmat(static_cast<size_t>(g.k * m));
  gather_gz(g_z.data(), g.n, g.k, oh, ow, gmat.data());

  // g_W = Gmat * Acol^T
  std::vector<float> colT(static_cast<size_t>(m * g.c * g.kh * g.kw));
  const int64_t rows = g.c * g.kh * g.kw;
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t j = 0; j < m; ++j) colT[static_cast<size_t>(j * rows + r)] = col[static_cast<size_t>(r * m + j)];
  gemm_f32(gmat.data(), colT.data(), grad_w.data(), g.k, rows, m, threads);

  // g_Acol = Wmat^T * Gmat, then col2im
  std::vector<float> wT(static_cast<size_t>(rows * g.k));
  for (int64_t kk = 0; kk < g.k; ++kk)
    for (int64_t r = 0; r < rows; ++r) wT[static_cast<size_t>(r * g.k + kk)] = w.data()[kk * rows + r];
  std::vector<float> gcol(static_cast<size_t>(rows * m));
  gemm_f32(wT.data(), gmat.data(), gcol.data(), rows, m, g.k, threads);
  std::vector<double> acc(static_cast<size_t>(grad_a.numel()), 0.0);
  col2im_accum<float, double>(gcol.data(), g, 0, g.c, acc.data());
  for (int64_t i = 0; i < grad_a.numel(); ++i) grad_a.data()[i] = static_cast<float>(acc[static_cast<size_t>(i)]);
  return {std::move(grad_w), std::move(grad_a)};
}

}  // namespace i8t
