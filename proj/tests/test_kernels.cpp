#include <cmath>
#include <vector>

#include "doctest.h"
#include "i8t/conv.hpp"
#include "i8t/gemm.hpp"
#include "i8t/rng.hpp"

using namespace i8t;

namespace {

// --- independent oracles -------------------------------------------------

// naive triple-loop integer GEMM
Int32Matrix gemm_oracle(const Int8Matrix& a, const Int8Matrix& b) {
  Int32Matrix c(a.rows, b.cols);
  for (int64_t i = 0; i < a.rows; ++i)
    for (int64_t j = 0; j < b.cols; ++j) {
      int64_t acc = 0;
      for (int64_t k = 0; k < a.cols; ++k)
        acc += int64_t(a.at(i, k)) * int64_t(b.at(k, j));
      c.at(i, j) = static_cast<int32_t>(acc);
    }
  return c;
}

// direct nested-loop convolution over int8 payloads, int64 accumulation
std::vector<int64_t> direct_conv_oracle(const std::vector<int8_t>& x, const std::vector<int8_t>& w,
                                        const ConvGeometry& g) {
  const int64_t oh = g.out_h(), ow = g.out_w();
  const int64_t kout = g.depthwise ? g.c : g.k;
  std::vector<int64_t> out(static_cast<size_t>(g.n * kout * oh * ow), 0);
  for (int64_t n = 0; n < g.n; ++n)
    for (int64_t ko = 0; ko < kout; ++ko)
      for (int64_t i = 0; i < oh; ++i)
        for (int64_t j = 0; j < ow; ++j) {
          int64_t acc = 0;
          const int64_t c_lo = g.depthwise ? ko : 0;
          const int64_t c_hi = g.depthwise ? ko + 1 : g.c;
          for (int64_t c = c_lo; c < c_hi; ++c)
            for (int64_t ki = 0; ki < g.kh; ++ki)
              for (int64_t kj = 0; kj < g.kw; ++kj) {
                int64_t ih = i * g.stride + ki - g.pad;
                int64_t iw = j * g.stride + kj - g.pad;
                if (ih < 0 || ih >= g.h || iw < 0 || iw >= g.w) continue;
                int64_t wc = g.depthwise ? 0 : c;
                int64_t widx = ((ko * (g.depthwise ? 1 : g.c) + wc) * g.kh + ki) * g.kw + kj;
                acc += int64_t(x[static_cast<size_t>(((n * g.c + c) * g.h + ih) * g.w + iw)]) *
                       int64_t(w[static_cast<size_t>(widx)]);
              }
          out[static_cast<size_t>(((n * kout + ko) * oh + i) * ow + j)] = acc;
        }
  return out;
}

Int8Matrix random_i8(int64_t r, int64_t c, InitRng& rng) {
  Int8Matrix m(r, c);
  for (auto& v : m.data) v = static_cast<int8_t>(static_cast<int64_t>(rng.next_below(255)) - 127);
  return m;
}

std::vector<int8_t> random_i8_vec(int64_t n, InitRng& rng) {
  std::vector<int8_t> v(static_cast<size_t>(n));
  for (auto& x : v) x = static_cast<int8_t>(static_cast<int64_t>(rng.next_below(255)) - 127);
  return v;
}

QuantizedTensor wrap_q(Shape shape, std::vector<int8_t> q, float clip) {
  QuantizedTensor t;
  t.shape = std::move(shape);
  t.q = std::move(q);
  t.params = QuantParams::from_clip(clip);
  return t;
}

}  // namespace

TEST_CASE("gemm_i8 small known results") {
  Int8Matrix a(2, 2), b(2, 2);
  a.data = {1, 2, 3, 4};
  b.data = {5, 6, 7, 8};
  auto c = gemm_i8(a, b);
  CHECK(c.data == std::vector<int32_t>{19, 22, 43, 50});

  Int8Matrix row(1, 4), col(4, 1);
  row.data = {127, 127, 127, 127};
  col.data = {127, 127, 127, 127};
  CHECK(gemm_i8(row, col).data[0] == 64516);
}

TEST_CASE("gemm_i8 matches triple-loop oracle bit-exactly") {
  InitRng rng(17);
  for (int trial = 0; trial < 25; ++trial) {
    int64_t m = 1 + int64_t(rng.next_below(16));
    int64_t k = 1 + int64_t(rng.next_below(16));
    int64_t n = 1 + int64_t(rng.next_below(16));
    Int8Matrix a = random_i8(m, k, rng);
    Int8Matrix b = random_i8(k, n, rng);
    CHECK(gemm_i8(a, b).data == gemm_oracle(a, b).data);
  }
}

TEST_CASE("gemm_i8 contract violations") {
  Int8Matrix a(2, 3), b(2, 2);
  CHECK_THROWS(gemm_i8(a, b));
  Int8Matrix wide(1, kMaxGemmDepth + 1), tall(kMaxGemmDepth + 1, 1);
  CHECK_THROWS(gemm_i8(wide, tall));
}

TEST_CASE("gemm_i8 is thread-count invariant") {
  InitRng rng(29);
  Int8Matrix a = random_i8(33, 47, rng);
  Int8Matrix b = random_i8(47, 21, rng);
  auto c1 = gemm_i8(a, b, 1);
  auto c3 = gemm_i8(a, b, 3);
  CHECK(c1.data == c3.data);
}

TEST_CASE("fused quantize-GEMM equals unfused composition bit-exactly") {
  InitRng rng(31);
  const int64_t m = 9, k = 40, n = 13;
  Tensor a(Shape{m, k});
  for (int64_t i = 0; i < a.numel(); ++i) a[i] = static_cast<float>(rng.next_gaussian());
  Int8Matrix b = random_i8(k, n, rng);
  QuantParams pa = QuantParams::from_clip(max_abs(a));

  // stochastic mode: stream draw order must match plain row-major quantize
  LcgStream s1(555), s2(555);
  auto q = quantize(a, pa, RoundingMode::kStochastic, &s1);
  Int8Matrix qa(m, k);
  qa.data = q.q;
  auto unfused = gemm_i8(qa, b);
  auto fused = gemm_i8_fused_lhs(a, pa, RoundingMode::kStochastic, &s2, b);
  CHECK(unfused.data == fused.data);
  CHECK(s1.state() == s2.state());

  auto fused_nearest = gemm_i8_fused_lhs(a, pa, RoundingMode::kNearest, nullptr, b);
  Int8Matrix qn(m, k);
  qn.data = quantize(a, pa, RoundingMode::kNearest).q;
  CHECK(fused_nearest.data == gemm_i8(qn, b).data);
}

TEST_CASE("im2col known layouts") {
  // 1x1x3x3 input, 2x2 kernel, stride 1, pad 0 -> 4 columns of length 4
  ConvGeometry g{.n = 1, .c = 1, .h = 3, .w = 3, .k = 1, .kh = 2, .kw = 2};
  std::vector<int8_t> x = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<int8_t> col(4 * 4);
  im2col_i8(x.data(), g, col.data());
  // column 0 = top-left 2x2 patch {1,2,4,5}
  CHECK(col[0 * 4 + 0] == 1);
  CHECK(col[1 * 4 + 0] == 2);
  CHECK(col[2 * 4 + 0] == 4);
  CHECK(col[3 * 4 + 0] == 5);

  // kernel == input size -> single column equal to the flattened input
  ConvGeometry g2{.n = 1, .c = 1, .h = 3, .w = 3, .k = 1, .kh = 3, .kw = 3};
  std::vector<int8_t> col2(9);
  im2col_i8(x.data(), g2, col2.data());
  CHECK(col2 == x);
}

TEST_CASE("im2col+gemm convolution equals direct convolution in integer mode") {
  InitRng rng(101);
  // fixed case from the spec: 1x2x5x5, 3x3 kernel, pad 1
  std::vector<ConvGeometry> geoms;
  geoms.push_back(ConvGeometry{.n = 1, .c = 2, .h = 5, .w = 5, .k = 3, .kh = 3, .kw = 3, .stride = 1, .pad = 1});
  for (int t = 0; t < 20; ++t) {
    ConvGeometry g;
    g.n = 1 + int64_t(rng.next_below(2));
    g.c = 1 + int64_t(rng.next_below(4));
    g.kh = g.kw = 1 + int64_t(rng.next_below(3));
    g.stride = 1 + int64_t(rng.next_below(2));
    g.pad = int64_t(rng.next_below(2));
    g.depthwise = (t % 4 == 3);
    g.k = g.depthwise ? g.c : 1 + int64_t(rng.next_below(4));
    // pick h,w so the output size divides evenly
    int64_t oh = 1 + int64_t(rng.next_below(4));
    g.h = (oh - 1) * g.stride + g.kh - 2 * g.pad;
    if (g.h < 1) g.h = g.kh;
    oh = 1 + int64_t(rng.next_below(4));
    g.w = (oh - 1) * g.stride + g.kw - 2 * g.pad;
    if (g.w < 1) g.w = g.kw;
    geoms.push_back(g);
  }

  for (const auto& g : geoms) {
    g.validate();
    auto x = random_i8_vec(g.input_shape().numel(), rng);
    auto w = random_i8_vec(g.weight_shape().numel(), rng);
    auto a = wrap_q(g.input_shape(), x, 1.27f);   // s_a = 0.01
    auto wt = wrap_q(g.weight_shape(), w, 12.7f); // s_w = 0.1
    Tensor z = conv2d_q(a, wt, g);
    auto oracle = direct_conv_oracle(x, w, g);
    const double rescale = double(a.params.scale) * double(wt.params.scale);
    REQUIRE(z.numel() == static_cast<int64_t>(oracle.size()));
    for (int64_t i = 0; i < z.numel(); ++i)
      CHECK(z[i] == static_cast<float>(rescale * static_cast<double>(oracle[static_cast<size_t>(i)])));
  }
}

TEST_CASE("conv2d_q zero activation and 1x1 kernel identities") {
  ConvGeometry g{.n = 2, .c = 3, .h = 4, .w = 4, .k = 5, .kh = 1, .kw = 1};
  InitRng rng(55);
  auto w = random_i8_vec(g.weight_shape().numel(), rng);
  auto zero = wrap_q(g.input_shape(), std::vector<int8_t>(size_t(g.input_shape().numel()), 0), 1.0f);
  auto wt = wrap_q(g.weight_shape(), w, 1.0f);
  Tensor z = conv2d_q(zero, wt, g);
  for (int64_t i = 0; i < z.numel(); ++i) CHECK(z[i] == 0.0f);

  // 1x1 kernel: per-pixel matrix multiply, equals the raw gemm path exactly
  auto x = random_i8_vec(g.input_shape().numel(), rng);
  auto a = wrap_q(g.input_shape(), x, 2.54f);
  z = conv2d_q(a, wt, g);
  Int8Matrix wmat(g.k, g.c);
  wmat.data.assign(w.begin(), w.end());
  Int8Matrix amat(g.c, g.n * g.h * g.w);  // im2col of a 1x1 kernel is a channel gather
  for (int64_t c = 0; c < g.c; ++c)
    for (int64_t n = 0; n < g.n; ++n)
      for (int64_t p = 0; p < g.h * g.w; ++p)
        amat.at(c, n * g.h * g.w + p) = x[static_cast<size_t>((n * g.c + c) * g.h * g.w + p)];
  auto prod = gemm_i8(wmat, amat);
  const double rescale = double(a.params.scale) * double(wt.params.scale);
  for (int64_t n = 0; n < g.n; ++n)
    for (int64_t k = 0; k < g.k; ++k)
      for (int64_t p = 0; p < g.h * g.w; ++p)
        CHECK(z[((n * g.k + k) * g.h * g.w) + p] ==
              static_cast<float>(rescale * prod.at(k, n * g.h * g.w + p)));
}

TEST_CASE("conv2d_q tracks the float oracle on dequantized operands") {
  ConvGeometry g{.n = 1, .c = 3, .h = 6, .w = 6, .k = 4, .kh = 3, .kw = 3, .stride = 1, .pad = 1};
  InitRng rng(77);
  auto x = random_i8_vec(g.input_shape().numel(), rng);
  auto w = random_i8_vec(g.weight_shape().numel(), rng);
  auto a = wrap_q(g.input_shape(), x, 0.635f);
  auto wt = wrap_q(g.weight_shape(), w, 0.254f);
  Tensor z = conv2d_q(a, wt, g);

  Tensor fa = dequantize(a), fw = dequantize(wt);
  // float oracle: direct convolution in double on dequantized operands
  const int64_t oh = g.out_h(), ow = g.out_w();
  for (int64_t n = 0; n < g.n; ++n)
    for (int64_t k = 0; k < g.k; ++k)
      for (int64_t i = 0; i < oh; ++i)
        for (int64_t j = 0; j < ow; ++j) {
          double acc = 0;
          for (int64_t c = 0; c < g.c; ++c)
            for (int64_t ki = 0; ki < g.kh; ++ki)
              for (int64_t kj = 0; kj < g.kw; ++kj) {
                int64_t ih = i * g.stride + ki - g.pad, iw = j * g.stride + kj - g.pad;
                if (ih < 0 || ih >= g.h || iw < 0 || iw >= g.w) continue;
                acc += double(fa.at4(n, c, ih, iw)) * double(fw.at4(k, c, ki, kj));
              }
          float got = z.at4(n, k, i, j);
          CHECK(got == doctest::Approx(acc).epsilon(1e-5));
        }
}

TEST_CASE("conv2d_backward_q: zero upstream gradient") {
  ConvGeometry g{.n = 1, .c = 2, .h = 4, .w = 4, .k = 3, .kh = 3, .kw = 3, .stride = 1, .pad = 1};
  InitRng rng(88);
  auto a = wrap_q(g.input_shape(), random_i8_vec(g.input_shape().numel(), rng), 1.0f);
  auto w = wrap_q(g.weight_shape(), random_i8_vec(g.weight_shape().numel(), rng), 1.0f);
  auto gz = wrap_q(g.output_shape(), std::vector<int8_t>(size_t(g.output_shape().numel()), 0), 1.0f);
  auto [gw, ga] = conv2d_backward_q(gz, a, w, g);
  for (int64_t i = 0; i < gw.numel(); ++i) CHECK(gw[i] == 0.0f);
  for (int64_t i = 0; i < ga.numel(); ++i) CHECK(ga[i] == 0.0f);
}

TEST_CASE("conv2d_backward_q 1x1 kernel matches matrix calculus") {
  // z = W a per pixel; g_W = g_z a^T, g_a = W^T g_z, exact in integer arithmetic
  ConvGeometry g{.n = 1, .c = 3, .h = 2, .w = 2, .k = 4, .kh = 1, .kw = 1};
  InitRng rng(99);
  auto xa = random_i8_vec(g.input_shape().numel(), rng);
  auto xw = random_i8_vec(g.weight_shape().numel(), rng);
  auto xg = random_i8_vec(g.output_shape().numel(), rng);
  auto a = wrap_q(g.input_shape(), xa, 1.27f);
  auto w = wrap_q(g.weight_shape(), xw, 1.27f);
  auto gz = wrap_q(g.output_shape(), xg, 1.27f);
  auto [gw, ga] = conv2d_backward_q(gz, a, w, g);

  const int64_t pix = g.h * g.w;
  const double rw = double(gz.params.scale) * double(a.params.scale);
  const double ra = double(gz.params.scale) * double(w.params.scale);
  for (int64_t k = 0; k < g.k; ++k)
    for (int64_t c = 0; c < g.c; ++c) {
      int64_t acc = 0;
      for (int64_t p = 0; p < pix; ++p)
        acc += int64_t(xg[size_t(k * pix + p)]) * int64_t(xa[size_t(c * pix + p)]);
      CHECK(gw[k * g.c + c] == static_cast<float>(rw * double(acc)));
    }
  for (int64_t c = 0; c < g.c; ++c)
    for (int64_t p = 0; p < pix; ++p) {
      int64_t acc = 0;
      for (int64_t k = 0; k < g.k; ++k)
        acc += int64_t(xw[size_t(k * g.c + c)]) * int64_t(xg[size_t(k * pix + p)]);
      CHECK(ga[c * pix + p] == static_cast<float>(ra * double(acc)));
    }
}

TEST_CASE("float conv backward matches central finite differences") {
  // quantization disabled: FP32 path against an FD oracle on the double conv
  ConvGeometry g{.n = 1, .c = 2, .h = 5, .w = 5, .k = 3, .kh = 3, .kw = 3, .stride = 2, .pad = 1};
  InitRng rng(123);
  Tensor a(g.input_shape()), w(g.weight_shape()), r(g.output_shape());
  for (int64_t i = 0; i < a.numel(); ++i) a[i] = float(rng.next_gaussian() * 0.5);
  for (int64_t i = 0; i < w.numel(); ++i) w[i] = float(rng.next_gaussian() * 0.5);
  for (int64_t i = 0; i < r.numel(); ++i) r[i] = float(rng.next_gaussian());

  // scalar objective L = sum(conv(a, w) * r); analytic gradient via backward with g_z = r
  auto [gw, ga] = conv2d_backward_f32(r, a, w, g);

  auto loss = [&](const Tensor& aa, const Tensor& ww) {
    double acc = 0;
    const int64_t oh = g.out_h(), ow = g.out_w();
    for (int64_t n = 0; n < g.n; ++n)
      for (int64_t k = 0; k < g.k; ++k)
        for (int64_t i = 0; i < oh; ++i)
          for (int64_t j = 0; j < ow; ++j) {
            double z = 0;
            for (int64_t c = 0; c < g.c; ++c)
              for (int64_t ki = 0; ki < g.kh; ++ki)
                for (int64_t kj = 0; kj < g.kw; ++kj) {
                  int64_t ih = i * g.stride + ki - g.pad, iw = j * g.stride + kj - g.pad;
                  if (ih < 0 || ih >= g.h || iw < 0 || iw >= g.w) continue;
                  z += double(aa.at4(n, c, ih, iw)) * double(ww.at4(k, c, ki, kj));
                }
            acc += z * double(r.at4(n, k, i, j));
          }
    return acc;
  };

  const double h = 1e-3;
  auto check_grad = [&](Tensor& param, const Tensor& grad, bool is_w) {
    for (int64_t i = 0; i < param.numel(); ++i) {
      float keep = param[i];
      param[i] = keep + float(h);
      double up = is_w ? loss(a, param) : loss(param, w);
      param[i] = keep - float(h);
      double dn = is_w ? loss(a, param) : loss(param, w);
      param[i] = keep;
      double fd = (up - dn) / (2 * h);
      double denom = std::max({std::fabs(fd), double(std::fabs(grad[i])), 1e-3});
      CHECK(std::fabs(fd - double(grad[i])) / denom < 1e-3);
    }
  };
  check_grad(w, gw, true);
  check_grad(a, ga, false);
}
