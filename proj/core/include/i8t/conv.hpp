#pragma once

#include <cstdint>
#include <utility>

#include "i8t/gemm.hpp"
#include "i8t/quantize.hpp"
#include "i8t/tensor.hpp"

namespace i8t {

// Zero-padded strided 2-D convolution geometry. Depthwise means one filter
// per input channel (kernel tensor (C,1,kH,kW), output channels == C).
struct ConvGeometry {
  int64_t n = 1, c = 1, h = 1, w = 1;  // input (N,C,H,W)
  int64_t k = 1, kh = 1, kw = 1;       // filters (K,C,kH,kW), or (C,1,kH,kW) when depthwise
  int64_t stride = 1, pad = 0;
  bool depthwise = false;

  int64_t out_h() const { return (h + 2 * pad - kh) / stride + 1; }
  int64_t out_w() const { return (w + 2 * pad - kw) / stride + 1; }
  int64_t out_positions() const { return n * out_h() * out_w(); }
  void validate() const;

  Shape input_shape() const { return Shape{n, c, h, w}; }
  Shape weight_shape() const { return depthwise ? Shape{c, 1, kh, kw} : Shape{k, c, kh, kw}; }
  Shape output_shape() const { return Shape{n, depthwise ? c : k, out_h(), out_w()}; }
};

// Dense lowering: out matrix is (C*kH*kW) x (N*H'*W'), row (c*kH+i)*kW+j,
// column (n*H'+oh)*W'+ow; zero padding supplies out-of-bounds values.
void im2col_i8(const int8_t* x, const ConvGeometry& g, int8_t* out);
void im2col_f32(const float* x, const ConvGeometry& g, float* out);
// Single-channel variant used by the depthwise path: (kH*kW) x (N*H'*W').
void im2col_channel_i8(const int8_t* x, const ConvGeometry& g, int64_t channel, int8_t* out);
void im2col_channel_f32(const float* x, const ConvGeometry& g, int64_t channel, float* out);

// z = (s_a * s_w) * (i8 GEMM of payloads); the rescale (done in f64, cast to
// f32) is the only non-integer step.
Tensor conv2d_q(const QuantizedTensor& a, const QuantizedTensor& w, const ConvGeometry& g,
                int threads = 0);

// g_W from i8 GEMM of g_z with a (rescale s_gz*s_a); g_a from i8 GEMM of g_z
// with w via col2im (rescale s_gz*s_w). Returned as float tensors.
std::pair<Tensor, Tensor> conv2d_backward_q(const QuantizedTensor& g_z, const QuantizedTensor& a,
                                            const QuantizedTensor& w, const ConvGeometry& g,
                                            int threads = 0);

// FP32 baseline path, same lowering, 64-bit accumulation.
Tensor conv2d_f32(const Tensor& a, const Tensor& w, const ConvGeometry& g, int threads = 0);
std::pair<Tensor, Tensor> conv2d_backward_f32(const Tensor& g_z, const Tensor& a, const Tensor& w,
                                              const ConvGeometry& g, int threads = 0);

}  // namespace i8t
