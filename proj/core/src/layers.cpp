#include "i8t/layers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "i8t/gemm.hpp"

namespace i8t {

namespace {

double clamp_dc(double dc) { return std::clamp(dc, 0.0, 2.0); }

// Shared gradient-quantization step for conv/fc backward in INT8 mode:
// clip maintenance (periodic search or max-abs when search is disabled),
// d_c measurement, phi factor, stochastic quantization and error stats.
QuantizedTensor quantize_gradient(QuantState& qs, const Tensor& g_z, BackwardCtx& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  if (ctx.clip_search_enabled) {
    qs.clip_state.period = ctx.clip_period;
    maybe_update(qs.clip_state, g_z, ctx.iter, ctx.clip_cfg);
  } else {
    const float m = max_abs(g_z);
    if (m > 0.0f) {
      qs.clip_state.clip = m;
      qs.clip_state.last_dc = measure_dc(g_z, m);
    } else {
      qs.clip_state.last_dc = 0.0;
    }
    qs.clip_state.iter_of_last_update = ctx.iter;
  }
  ctx.clip_time_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  qs.dc = qs.clip_state.last_dc;
  qs.lr_scale = ctx.lr_scaling_enabled ? scale_factor(clamp_dc(qs.dc), ctx.lr_cfg) : 1.0;

  QuantizedTensor qg;
  if (max_abs(g_z) == 0.0f || !(qs.clip_state.clip > 0.0f)) {
    qg.shape = g_z.shape();
    qg.q.assign(static_cast<size_t>(g_z.numel()), 0);
    qg.params = QuantParams::from_clip(1.0f);
    qs.eps_norm = 0.0;
    qs.ghat_sqnorm = 0.0;
    return qg;
  }
  qg = quantize(g_z, QuantParams::from_clip(qs.clip_state.clip), RoundingMode::kStochastic,
                ctx.grad_stream);
  Tensor ghat = dequantize(qg);
  double eps_sq = 0.0;
  for (int64_t i = 0; i < g_z.numel(); ++i) {
    const double e = static_cast<double>(g_z[i]) - static_cast<double>(ghat[i]);
    eps_sq += e * e;
  }
  qs.eps_norm = std::sqrt(eps_sq);
  qs.ghat_sqnorm = sq_l2_norm(ghat);
  return qg;
}

void fill_fp32_stats(QuantState& qs, const Tensor& g_z) {
  qs.dc = 0.0;
  qs.eps_norm = 0.0;
  qs.ghat_sqnorm = sq_l2_norm(g_z);
  qs.lr_scale = 1.0;
}

Tensor gaussian_tensor(Shape shape, double stddev, InitRng& rng) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.next_gaussian() * stddev);
  return t;
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(int64_t in_c, int64_t out_c, int64_t kernel, int64_t stride, int64_t pad,
               bool depthwise, InitRng& rng)
    : in_c_(in_c), out_c_(out_c), kernel_(kernel), stride_(stride), pad_(pad), depthwise_(depthwise) {
  if (depthwise_ && in_c_ != out_c_) throw std::invalid_argument("Conv2d: depthwise needs in_c == out_c");
  const int64_t fan_in = (depthwise_ ? 1 : in_c_) * kernel_ * kernel_;
  Shape ws = depthwise_ ? Shape{in_c_, 1, kernel_, kernel_} : Shape{out_c_, in_c_, kernel_, kernel_};
  weight_ = gaussian_tensor(ws, std::sqrt(2.0 / static_cast<double>(fan_in)), rng);
  grad_weight_ = Tensor(weight_.shape());
}

ConvGeometry Conv2d::geom_for(const Tensor& x) const {
  const Shape& s = x.shape();
  if (s.rank() != 4 || s[1] != in_c_) throw std::invalid_argument("Conv2d: bad input shape " + s.str());
  ConvGeometry g{.n = s[0], .c = in_c_, .h = s[2], .w = s[3], .k = out_c_, .kh = kernel_, .kw = kernel_,
                 .stride = stride_, .pad = pad_, .depthwise = depthwise_};
  g.validate();
  return g;
}

Tensor Conv2d::forward(const Tensor& x, const ForwardCtx& ctx) {
  cached_geom_ = geom_for(x);
  const bool use_int8 = quantize_enabled_ && ctx.mode == Mode::kInt8;
  if (ctx.track_amax) qs_.pending_amax = std::max(qs_.pending_amax, max_abs(x));
  if (!use_int8) {
    if (ctx.training) cached_input_ = x;
    return conv2d_f32(x, weight_, cached_geom_, ctx.threads);
  }
  if (!(qs_.clip_w > 0.0f)) qs_.clip_w = std::max(max_abs(weight_), 1e-12f);
  if (!(qs_.clip_a > 0.0f)) qs_.clip_a = std::max(max_abs(x), 1e-12f);
  cached_qw_ = quantize(weight_, QuantParams::from_clip(qs_.clip_w), RoundingMode::kNearest);
  cached_qa_ = quantize(x, QuantParams::from_clip(qs_.clip_a), RoundingMode::kNearest);
  return conv2d_q(cached_qa_, cached_qw_, cached_geom_, ctx.threads);
}

Tensor Conv2d::backward(const Tensor& g_out, BackwardCtx& ctx) {
  if (ctx.snapshot) ctx.snapshot->add(qs_.clip_state.layer_id, g_out, weight_);
  const bool use_int8 = quantize_enabled_ && ctx.mode == Mode::kInt8;
  if (!use_int8) {
    fill_fp32_stats(qs_, g_out);
    auto [gw, ga] = conv2d_backward_f32(g_out, cached_input_, weight_, cached_geom_, ctx.threads);
    grad_weight_ = std::move(gw);
    return std::move(ga);
  }
  QuantizedTensor qg = quantize_gradient(qs_, g_out, ctx);
  auto [gw, ga] = conv2d_backward_q(qg, cached_qa_, cached_qw_, cached_geom_, ctx.threads);
  grad_weight_ = std::move(gw);
  return std::move(ga);
}

// ---------------------------------------------------------------------------
// Dense

Dense::Dense(int64_t in_features, int64_t out_features, InitRng& rng) : in_(in_features), out_(out_features) {
  weight_ = gaussian_tensor(Shape{out_, in_}, std::sqrt(2.0 / static_cast<double>(in_)), rng);
  bias_ = Tensor(Shape{out_});
  grad_weight_ = Tensor(weight_.shape());
  grad_bias_ = Tensor(bias_.shape());
}

Tensor Dense::forward(const Tensor& x, const ForwardCtx& ctx) {
  cached_input_shape_ = x.shape();
  const int64_t n = x.shape()[0];
  if (x.numel() % n != 0 || x.numel() / n != in_)
    throw std::invalid_argument("Dense: input does not flatten to expected features");
  Tensor flat(Shape{n, in_}, std::vector<float>(x.data(), x.data() + x.numel()));

  const bool use_int8 = quantize_enabled_ && ctx.mode == Mode::kInt8;
  if (ctx.track_amax) qs_.pending_amax = std::max(qs_.pending_amax, max_abs(flat));

  Tensor z(Shape{n, out_});
  if (!use_int8) {
    if (ctx.training) cached_input_ = flat;
    std::vector<float> wt(static_cast<size_t>(in_ * out_));
    for (int64_t o = 0; o < out_; ++o)
      for (int64_t i = 0; i < in_; ++i) wt[static_cast<size_t>(i * out_ + o)] = weight_[o * in_ + i];
    gemm_f32(flat.data(), wt.data(), z.data(), n, out_, in_, ctx.threads);
  } else {
    if (!(qs_.clip_w > 0.0f)) qs_.clip_w = std::max(max_abs(weight_), 1e-12f);
    if (!(qs_.clip_a > 0.0f)) qs_.clip_a = std::max(max_abs(flat), 1e-12f);
    cached_qw_ = quantize(weight_, QuantParams::from_clip(qs_.clip_w), RoundingMode::kNearest);
    cached_qa_ = quantize(flat, QuantParams::from_clip(qs_.clip_a), RoundingMode::kNearest);
    Int8Matrix qa(n, in_);
    qa.data = cached_qa_.q;
    Int8Matrix qwt(in_, out_);
    for (int64_t o = 0; o < out_; ++o)
      for (int64_t i = 0; i < in_; ++i)
        qwt.at(i, o) = cached_qw_.q[static_cast<size_t>(o * in_ + i)];
    Int32Matrix prod = gemm_i8(qa, qwt, ctx.threads);
    const double rescale = static_cast<double>(cached_qa_.params.scale) * static_cast<double>(cached_qw_.params.scale);
    for (int64_t i = 0; i < z.numel(); ++i)
      z[i] = static_cast<float>(rescale * static_cast<double>(prod.data[static_cast<size_t>(i)]));
  }
  for (int64_t i = 0; i < n; ++i)
    for (int64_t o = 0; o < out_; ++o) z[i * out_ + o] += bias_[o];
  return z;
}

Tensor Dense::backward(const Tensor& g_out, BackwardCtx& ctx) {
  if (ctx.snapshot) ctx.snapshot->add(qs_.clip_state.layer_id, g_out, weight_);
  const int64_t n = g_out.shape()[0];
  const bool use_int8 = quantize_enabled_ && ctx.mode == Mode::kInt8;
  Tensor g_in(Shape{n, in_});

  if (!use_int8) {
    fill_fp32_stats(qs_, g_out);
    // g_W = g^T x
    std::vector<float> gt(static_cast<size_t>(out_ * n));
    for (int64_t i = 0; i < n; ++i)
      for (int64_t o = 0; o < out_; ++o) gt[static_cast<size_t>(o * n + i)] = g_out[i * out_ + o];
    gemm_f32(gt.data(), cached_input_.data(), grad_weight_.data(), out_, in_, n, ctx.threads);
    gemm_f32(g_out.data(), weight_.data(), g_in.data(), n, in_, out_, ctx.threads);
    for (int64_t o = 0; o < out_; ++o) {
      double acc = 0.0;
      for (int64_t i = 0; i < n; ++i) acc += static_cast<double>(g_out[i * out_ + o]);
      grad_bias_[o] = static_cast<float>(acc);
    }
  } else {
    QuantizedTensor qg = quantize_gradient(qs_, g_out, ctx);
    Int8Matrix qgt(out_, n);
    for (int64_t i = 0; i < n; ++i)
      for (int64_t o = 0; o < out_; ++o) qgt.at(o, i) = qg.q[static_cast<size_t>(i * out_ + o)];
    Int8Matrix qa(n, in_);
    qa.data = cached_qa_.q;
    Int32Matrix gw = gemm_i8(qgt, qa, ctx.threads);
    const double rs_w = static_cast<double>(qg.params.scale) * static_cast<double>(cached_qa_.params.scale);
    for (int64_t i = 0; i < grad_weight_.numel(); ++i)
      grad_weight_[i] = static_cast<float>(rs_w * static_cast<double>(gw.data[static_cast<size_t>(i)]));

    Int8Matrix qgm(n, out_);
    qgm.data = qg.q;
    Int8Matrix qw(out_, in_);
    qw.data = cached_qw_.q;
    Int32Matrix ga = gemm_i8(qgm, qw, ctx.threads);
    const double rs_a = static_cast<double>(qg.params.scale) * static_cast<double>(cached_qw_.params.scale);
    for (int64_t i = 0; i < g_in.numel(); ++i)
      g_in[i] = static_cast<float>(rs_a * static_cast<double>(ga.data[static_cast<size_t>(i)]));

    // bias gradient reduces the dequantized g_z (no GEMM involved)
    const double s = qg.params.scale;
    for (int64_t o = 0; o < out_; ++o) {
      double acc = 0.0;
      for (int64_t i = 0; i < n; ++i) acc += s * static_cast<double>(qg.q[static_cast<size_t>(i * out_ + o)]);
      grad_bias_[o] = static_cast<float>(acc);
    }
  }
  return Tensor(cached_input_shape_, std::vector<float>(g_in.data(), g_in.data() + g_in.numel()));
}

// ---------------------------------------------------------------------------
// BatchNorm2d

BatchNorm2d::BatchNorm2d(int64_t channels, double momentum, double eps)
    : channels_(channels), momentum_(momentum), eps_(eps) {
  gamma_ = Tensor::full(Shape{channels_}, 1.0f);
  beta_ = Tensor(Shape{channels_});
  grad_gamma_ = Tensor(Shape{channels_});
  grad_beta_ = Tensor(Shape{channels_});
  running_mean_ = Tensor(Shape{channels_});
  running_var_ = Tensor::full(Shape{channels_}, 1.0f);
}

Tensor BatchNorm2d::forward(const Tensor& x, const ForwardCtx& ctx) {
  const Shape& s = x.shape();
  if (s.rank() != 4 || s[1] != channels_) throw std::invalid_argument("BatchNorm2d: bad input shape");
  const int64_t n = s[0], hw = s[2] * s[3];
  const int64_t m = n * hw;
  Tensor y(s);

  if (!ctx.training) {
    for (int64_t c = 0; c < channels_; ++c) {
      const double invstd = 1.0 / std::sqrt(static_cast<double>(running_var_[c]) + eps_);
      const double mean = running_mean_[c];
      const double g = gamma_[c], b = beta_[c];
      for (int64_t i = 0; i < n; ++i) {
        const float* px = x.data() + (i * channels_ + c) * hw;
        float* py = y.data() + (i * channels_ + c) * hw;
        for (int64_t p = 0; p < hw; ++p)
          py[p] = static_cast<float>(g * ((static_cast<double>(px[p]) - mean) * invstd) + b);
      }
    }
    return y;
  }

  cached_xhat_ = Tensor(s);
  cached_invstd_.assign(static_cast<size_t>(channels_), 0.0);
  cached_per_channel_ = m;
  for (int64_t c = 0; c < channels_; ++c) {
    double sum = 0.0, sq = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      const float* px = x.data() + (i * channels_ + c) * hw;
      for (int64_t p = 0; p < hw; ++p) {
        sum += px[p];
        sq += static_cast<double>(px[p]) * static_cast<double>(px[p]);
      }
    }
    const double mean = sum / m;
    const double var = std::max(sq / m - mean * mean, 0.0);
    const double invstd = 1.0 / std::sqrt(var + eps_);
    cached_invstd_[static_cast<size_t>(c)] = invstd;
    running_mean_[c] = static_cast<float>((1.0 - momentum_) * running_mean_[c] + momentum_ * mean);
    running_var_[c] = static_cast<float>((1.0 - momentum_) * running_var_[c] + momentum_ * var);
    const double g = gamma_[c], b = beta_[c];
    for (int64_t i = 0; i < n; ++i) {
      const float* px = x.data() + (i * channels_ + c) * hw;
      float* ph = cached_xhat_.data() + (i * channels_ + c) * hw;
      float* py = y.data() + (i * channels_ + c) * hw;
      for (int64_t p = 0; p < hw; ++p) {
        const double xv = (static_cast<double>(px[p]) - mean) * invstd;
        ph[p] = static_cast<float>(xv);
        py[p] = static_cast<float>(g * xv + b);
      }
    }
  }
  return y;
}

Tensor BatchNorm2d::backward(const Tensor& g_out, BackwardCtx&) {
  const Shape& s = g_out.shape();
  const int64_t n = s[0], hw = s[2] * s[3];
  const int64_t m = cached_per_channel_;
  Tensor g_in(s);
  for (int64_t c = 0; c < channels_; ++c) {
    double s1 = 0.0, s2 = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      const float* pg = g_out.data() + (i * channels_ + c) * hw;
      const float* ph = cached_xhat_.data() + (i * channels_ + c) * hw;
      for (int64_t p = 0; p < hw; ++p) {
        s1 += pg[p];
        s2 += static_cast<double>(pg[p]) * static_cast<double>(ph[p]);
      }
    }
    grad_beta_[c] = static_cast<float>(s1);
    grad_gamma_[c] = static_cast<float>(s2);
    const double coeff = static_cast<double>(gamma_[c]) * cached_invstd_[static_cast<size_t>(c)];
    for (int64_t i = 0; i < n; ++i) {
      const float* pg = g_out.data() + (i * channels_ + c) * hw;
      const float* ph = cached_xhat_.data() + (i * channels_ + c) * hw;
      float* pi = g_in.data() + (i * channels_ + c) * hw;
      for (int64_t p = 0; p < hw; ++p)
        pi[p] = static_cast<float>(coeff * (static_cast<double>(pg[p]) - s1 / m -
                                            static_cast<double>(ph[p]) * s2 / m));
    }
  }
  return g_in;
}

// ---------------------------------------------------------------------------
// ReLU / Pool2d

Tensor ReLU::forward(const Tensor& x, const ForwardCtx& ctx) {
  Tensor y(x.shape());
  if (ctx.training) mask_.assign(static_cast<size_t>(x.numel()), 0);
  for (int64_t i = 0; i < x.numel(); ++i) {
    const bool on = x[i] > 0.0f;
    y[i] = on ? x[i] : 0.0f;
    if (ctx.training) mask_[static_cast<size_t>(i)] = on;
  }
  return y;
}

Tensor ReLU::backward(const Tensor& g_out, BackwardCtx&) {
  Tensor g_in(g_out.shape());
  for (int64_t i = 0; i < g_out.numel(); ++i)
    g_in[i] = mask_[static_cast<size_t>(i)] ? g_out[i] : 0.0f;
  return g_in;
}

Pool2d::Pool2d(PoolKind pool_kind, int64_t kernel, int64_t stride)
    : pool_kind_(pool_kind), kernel_(kernel), stride_(stride) {}

Tensor Pool2d::forward(const Tensor& x, const ForwardCtx& ctx) {
  const Shape& s = x.shape();
  if (s.rank() != 4) throw std::invalid_argument("Pool2d: expects 4-D input");
  const int64_t n = s[0], c = s[1], h = s[2], w = s[3];
  if ((h - kernel_) % stride_ != 0 || (w - kernel_) % stride_ != 0 || h < kernel_ || w < kernel_)
    throw std::invalid_argument("Pool2d: geometry does not tile the input");
  const int64_t oh = (h - kernel_) / stride_ + 1, ow = (w - kernel_) / stride_ + 1;
  in_shape_ = s;
  Tensor y(Shape{n, c, oh, ow});
  if (pool_kind_ == PoolKind::kMax && ctx.training)
    argmax_.assign(static_cast<size_t>(y.numel()), 0);

  for (int64_t i = 0; i < n; ++i)
    for (int64_t cc = 0; cc < c; ++cc) {
      const float* px = x.data() + (i * c + cc) * h * w;
      float* py = y.data() + (i * c + cc) * oh * ow;
      for (int64_t a = 0; a < oh; ++a)
        for (int64_t b = 0; b < ow; ++b) {
          if (pool_kind_ == PoolKind::kMax) {
            float best = -std::numeric_limits<float>::infinity();
            int64_t best_idx = 0;
            for (int64_t ki = 0; ki < kernel_; ++ki)
              for (int64_t kj = 0; kj < kernel_; ++kj) {
                const int64_t idx = (a * stride_ + ki) * w + (b * stride_ + kj);
                if (px[idx] > best) {
                  best = px[idx];
                  best_idx = idx;
                }
              }
            py[a * ow + b] = best;
            if (ctx.training)
              argmax_[static_cast<size_t>((i * c + cc) * oh * ow + a * ow + b)] = best_idx;
          } else {
            double acc = 0.0;
            for (int64_t ki = 0; ki < kernel_; ++ki)
              for (int64_t kj = 0; kj < kernel_; ++kj)
                acc += px[(a * stride_ + ki) * w + (b * stride_ + kj)];
            py[a * ow + b] = static_cast<float>(acc / (kernel_ * kernel_));
          }
        }
    }
  return y;
}

Tensor Pool2d::backward(const Tensor& g_out, BackwardCtx&) {
  const int64_t n = in_shape_[0], c = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
  const Shape& so = g_out.shape();
  const int64_t oh = so[2], ow = so[3];
  Tensor g_in(in_shape_);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t cc = 0; cc < c; ++cc) {
      const float* pg = g_out.data() + (i * c + cc) * oh * ow;
      float* pi = g_in.data() + (i * c + cc) * h * w;
      for (int64_t a = 0; a < oh; ++a)
        for (int64_t b = 0; b < ow; ++b) {
          if (pool_kind_ == PoolKind::kMax) {
            pi[argmax_[static_cast<size_t>((i * c + cc) * oh * ow + a * ow + b)]] += pg[a * ow + b];
          } else {
            const float share = pg[a * ow + b] / static_cast<float>(kernel_ * kernel_);
            for (int64_t ki = 0; ki < kernel_; ++ki)
              for (int64_t kj = 0; kj < kernel_; ++kj)
                pi[(a * stride_ + ki) * w + (b * stride_ + kj)] += share;
          }
        }
    }
  return g_in;
}

// ---------------------------------------------------------------------------
// Composites

Tensor Sequential::forward(const Tensor& x, const ForwardCtx& ctx) {
  Tensor cur = x;
  for (auto& [name, child] : children_) cur = child->forward(cur, ctx);
  return cur;
}

Tensor Sequential::backward(const Tensor& g_out, BackwardCtx& ctx) {
  Tensor cur = g_out;
  for (auto it = children_.rbegin(); it != children_.rend(); ++it) cur = it->second->backward(cur, ctx);
  return cur;
}

void Sequential::visit(const std::string& prefix, const std::function<void(const std::string&, Layer&)>& fn) {
  for (auto& [name, child] : children_)
    child->visit(prefix.empty() ? name : prefix + "/" + name, fn);
}

ResidualBlock::ResidualBlock(int64_t in_c, int64_t out_c, int64_t stride, InitRng& rng) {
  main_ = std::make_unique<Sequential>();
  main_->add("conv1", std::make_unique<Conv2d>(in_c, out_c, 3, stride, 1, false, rng));
  main_->add("bn1", std::make_unique<BatchNorm2d>(out_c));
  main_->add("relu1", std::make_unique<ReLU>());
  main_->add("conv2", std::make_unique<Conv2d>(out_c, out_c, 3, 1, 1, false, rng));
  main_->add("bn2", std::make_unique<BatchNorm2d>(out_c));
  if (stride != 1 || in_c != out_c) {
    shortcut_ = std::make_unique<Sequential>();
    shortcut_->add("conv_sc", std::make_unique<Conv2d>(in_c, out_c, 1, stride, 0, false, rng));
    shortcut_->add("bn_sc", std::make_unique<BatchNorm2d>(out_c));
  }
}

Tensor ResidualBlock::forward(const Tensor& x, const ForwardCtx& ctx) {
  Tensor main_out = main_->forward(x, ctx);
  Tensor sc = shortcut_ ? shortcut_->forward(x, ctx) : x;
  for (int64_t i = 0; i < main_out.numel(); ++i) main_out[i] += sc[i];
  return relu_out_.forward(main_out, ctx);
}

Tensor ResidualBlock::backward(const Tensor& g_out, BackwardCtx& ctx) {
  Tensor g = relu_out_.backward(g_out, ctx);
  Tensor g_main = main_->backward(g, ctx);
  Tensor g_sc = shortcut_ ? shortcut_->backward(g, ctx) : g;
  for (int64_t i = 0; i < g_main.numel(); ++i) g_main[i] += g_sc[i];
  return g_main;
}

void ResidualBlock::visit(const std::string& prefix, const std::function<void(const std::string&, Layer&)>& fn) {
  main_->visit(prefix, fn);
  if (shortcut_) shortcut_->visit(prefix, fn);
}

InvertedResidual::InvertedResidual(int64_t in_c, int64_t out_c, int64_t stride, int64_t expand,
                                   InitRng& rng) {
  const int64_t mid = in_c * expand;
  use_skip_ = (stride == 1 && in_c == out_c);
  body_ = std::make_unique<Sequential>();
  body_->add("conv1", std::make_unique<Conv2d>(in_c, mid, 1, 1, 0, false, rng));
  body_->add("bn1", std::make_unique<BatchNorm2d>(mid));
  body_->add("relu1", std::make_unique<ReLU>());
  body_->add("conv2", std::make_unique<Conv2d>(mid, mid, 3, stride, 1, true, rng));  // depthwise
  body_->add("bn2", std::make_unique<BatchNorm2d>(mid));
  body_->add("relu2", std::make_unique<ReLU>());
  body_->add("conv3", std::make_unique<Conv2d>(mid, out_c, 1, 1, 0, false, rng));
  body_->add("bn3", std::make_unique<BatchNorm2d>(out_c));
}

Tensor InvertedResidual::forward(const Tensor& x, const ForwardCtx& ctx) {
  Tensor y = body_->forward(x, ctx);
  if (use_skip_)
    for (int64_t i = 0; i < y.numel(); ++i) y[i] += x[i];
  return y;
}

Tensor InvertedResidual::backward(const Tensor& g_out, BackwardCtx& ctx) {
  Tensor g = body_->backward(g_out, ctx);
  if (use_skip_)
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += g_out[i];
  return g;
}

void InvertedResidual::visit(const std::string& prefix, const std::function<void(const std::string&, Layer&)>& fn) {
  body_->visit(prefix, fn);
}

// ---------------------------------------------------------------------------
// SoftmaxCrossEntropy

double SoftmaxCrossEntropy::loss_and_grad(const Tensor& logits, const std::vector<int32_t>& labels,
                                          Tensor& g_logits) {
  const int64_t n = logits.shape()[0];
  const int64_t classes = logits.shape()[1];
  if (static_cast<int64_t>(labels.size()) != n) throw std::invalid_argument("softmax_ce: label count mismatch");
  g_logits = Tensor(logits.shape());
  double total = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const float* row = logits.data() + i * classes;
    double mx = row[0];
    for (int64_t c = 1; c < classes; ++c) mx = std::max(mx, static_cast<double>(row[c]));
    double sum = 0.0;
    for (int64_t c = 0; c < classes; ++c) sum += std::exp(static_cast<double>(row[c]) - mx);
    const double log_z = mx + std::log(sum);
    total += log_z - static_cast<double>(row[labels[static_cast<size_t>(i)]]);
    for (int64_t c = 0; c < classes; ++c) {
      const double p = std::exp(static_cast<double>(row[c]) - log_z);
      const double y = (c == labels[static_cast<size_t>(i)]) ? 1.0 : 0.0;
      g_logits[i * classes + c] = static_cast<float>((p - y) / static_cast<double>(n));
    }
  }
  return total / static_cast<double>(n);
}

double SoftmaxCrossEntropy::loss_only(const Tensor& logits, const std::vector<int32_t>& labels) {
  Tensor scratch;
  return loss_and_grad(logits, labels, scratch);
}

int int8_replace(Layer& root) {
  int count = 0;
  root.visit("", [&count](const std::string&, Layer& layer) {
    const std::string k = layer.kind();
    if (k == "conv" || k == "conv_dw" || k == "fc") {
      layer.set_quantized(true);
      ++count;
    }
  });
  return count;
}

}  // namespace i8t
