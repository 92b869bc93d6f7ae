#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "i8t/clip.hpp"
#include "i8t/conv.hpp"
#include "i8t/lr_scale.hpp"
#include "i8t/quantize.hpp"
#include "i8t/rng.hpp"
#include "i8t/tensor.hpp"

namespace i8t {

enum class Mode { kFp32, kInt8 };

struct ParamRef {
  std::string name;
  Tensor* value = nullptr;
  Tensor* grad = nullptr;
};

// Quantization bookkeeping for a conv/fc layer in INT8 mode. Weight and
// activation clips are max-abs calibrated and refreshed on the clip period;
// the gradient clip is optimized by search_clip.
struct QuantState {
  ClipState clip_state;
  float clip_w = 0.0f;
  float clip_a = 0.0f;
  float pending_amax = 0.0f;  // running max of batch maxima since last refresh
  // per-step measurements, consumed by the trace writer
  double dc = 0.0;
  double eps_norm = 0.0;
  double ghat_sqnorm = 0.0;
  double lr_scale = 1.0;
};

struct ForwardCtx {
  Mode mode = Mode::kFp32;
  bool training = true;
  bool track_amax = false;
  int threads = 1;
};

// Receives the float activation gradient (pre-quantization) and weights of
// each conv/fc layer during backward when a snapshot is requested.
class GradSnapshotSink {
 public:
  virtual ~GradSnapshotSink() = default;
  virtual void add(const std::string& layer, const Tensor& g_z, const Tensor& weight) = 0;
};

struct BackwardCtx {
  Mode mode = Mode::kFp32;
  int64_t iter = 0;
  LcgStream* grad_stream = nullptr;
  ClipSearchConfig clip_cfg;
  bool clip_search_enabled = true;  // false: clip = max_abs(g_z) every iteration
  int64_t clip_period = 100;
  LrScaleConfig lr_cfg;
  bool lr_scaling_enabled = true;
  int threads = 1;
  double clip_time_seconds = 0.0;  // accumulated maintenance cost
  GradSnapshotSink* snapshot = nullptr;
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual std::string kind() const = 0;
  virtual Tensor forward(const Tensor& x, const ForwardCtx& ctx) = 0;
  virtual Tensor backward(const Tensor& g_out, BackwardCtx& ctx) = 0;
  virtual std::vector<ParamRef> params() { return {}; }
  // non-trainable state that still belongs in a checkpoint (BN running stats)
  virtual std::vector<ParamRef> buffers() { return {}; }
  virtual QuantState* quant_state() { return nullptr; }
  virtual void set_quantized(bool) {}
  virtual bool quantized() const { return false; }
  virtual void visit(const std::string& prefix, const std::function<void(const std::string&, Layer&)>& fn) {
    fn(prefix, *this);
  }
};

class Conv2d final : public Layer {
 public:
  // Dense: weight (out_c, in_c, k, k). Depthwise: out_c == in_c, weight (C,1,k,k).
  Conv2d(int64_t in_c, int64_t out_c, int64_t kernel, int64_t stride, int64_t pad, bool depthwise,
         InitRng& rng);

  std::string kind() const override { return depthwise_ ? "conv_dw" : "conv"; }
  Tensor forward(const Tensor& x, const ForwardCtx& ctx) override;
  Tensor backward(const Tensor& g_out, BackwardCtx& ctx) override;
  std::vector<ParamRef> params() override { return {{"weight", &weight_, &grad_weight_}}; }
  QuantState* quant_state() override { return &qs_; }
  void set_quantized(bool on) override { quantize_enabled_ = on; }
  bool quantized() const override { return quantize_enabled_; }

  const Tensor& weight() const { return weight_; }
  Tensor& weight() { return weight_; }

 private:
  ConvGeometry geom_for(const Tensor& x) const;

  int64_t in_c_, out_c_, kernel_, stride_, pad_;
  bool depthwise_;
  bool quantize_enabled_ = false;
  Tensor weight_, grad_weight_;
  QuantState qs_;
  // forward cache
  Tensor cached_input_;
  QuantizedTensor cached_qa_, cached_qw_;
  ConvGeometry cached_geom_;
};

class Dense final : public Layer {
 public:
  Dense(int64_t in_features, int64_t out_features, InitRng& rng);

  std::string kind() const override { return "fc"; }
  Tensor forward(const Tensor& x, const ForwardCtx& ctx) override;
  Tensor backward(const Tensor& g_out, BackwardCtx& ctx) override;
  std::vector<ParamRef> params() override {
    return {{"weight", &weight_, &grad_weight_}, {"bias", &bias_, &grad_bias_}};
  }
  QuantState* quant_state() override { return &qs_; }
  void set_quantized(bool on) override { quantize_enabled_ = on; }
  bool quantized() const override { return quantize_enabled_; }

 private:
  int64_t in_, out_;
  bool quantize_enabled_ = false;
  Tensor weight_, bias_, grad_weight_, grad_bias_;
  QuantState qs_;
  Tensor cached_input_;  // flattened (N, in)
  Shape cached_input_shape_;
  QuantizedTensor cached_qa_, cached_qw_;
};

// Always runs in FP32; never carries quantization state.
class BatchNorm2d final : public Layer {
 public:
  explicit BatchNorm2d(int64_t channels, double momentum = 0.1, double eps = 1e-5);

  std::string kind() const override { return "bn"; }
  Tensor forward(const Tensor& x, const ForwardCtx& ctx) override;
  Tensor backward(const Tensor& g_out, BackwardCtx& ctx) override;
  std::vector<ParamRef> params() override {
    return {{"gamma", &gamma_, &grad_gamma_}, {"beta", &beta_, &grad_beta_}};
  }
  std::vector<ParamRef> buffers() override {
    return {{"running_mean", &running_mean_, nullptr}, {"running_var", &running_var_, nullptr}};
  }

 private:
  int64_t channels_;
  double momentum_, eps_;
  Tensor gamma_, beta_, grad_gamma_, grad_beta_;
  Tensor running_mean_, running_var_;
  // cache
  Tensor cached_xhat_;
  std::vector<double> cached_invstd_;
  int64_t cached_per_channel_ = 0;
};

class ReLU final : public Layer {
 public:
  std::string kind() const override { return "relu"; }
  Tensor forward(const Tensor& x, const ForwardCtx& ctx) override;
  Tensor backward(const Tensor& g_out, BackwardCtx& ctx) override;

 private:
  std::vector<uint8_t> mask_;
};

enum class PoolKind { kMax, kAvg };

class Pool2d final : public Layer {
 public:
  Pool2d(PoolKind pool_kind, int64_t kernel, int64_t stride);

  std::string kind() const override { return pool_kind_ == PoolKind::kMax ? "maxpool" : "avgpool"; }
  Tensor forward(const Tensor& x, const ForwardCtx& ctx) override;
  Tensor backward(const Tensor& g_out, BackwardCtx& ctx) override;

 private:
  PoolKind pool_kind_;
  int64_t kernel_, stride_;
  Shape in_shape_;
  std::vector<int64_t> argmax_;
};

class Sequential final : public Layer {
 public:
  Sequential() = default;
  explicit Sequential(std::vector<std::pair<std::string, std::unique_ptr<Layer>>> children)
      : children_(std::move(children)) {}

  void add(std::string name, std::unique_ptr<Layer> layer) {
    children_.emplace_back(std::move(name), std::move(layer));
  }
  std::string kind() const override { return "sequential"; }
  Tensor forward(const Tensor& x, const ForwardCtx& ctx) override;
  Tensor backward(const Tensor& g_out, BackwardCtx& ctx) override;
  void visit(const std::string& prefix, const std::function<void(const std::string&, Layer&)>& fn) override;
  size_t size() const { return children_.size(); }

 private:
  std::vector<std::pair<std::string, std::unique_ptr<Layer>>> children_;
};

// conv-bn-relu-conv-bn plus identity (or 1x1 conv-bn) shortcut, relu after add.
class ResidualBlock final : public Layer {
 public:
  ResidualBlock(int64_t in_c, int64_t out_c, int64_t stride, InitRng& rng);

  std::string kind() const override { return "resblock"; }
  Tensor forward(const Tensor& x, const ForwardCtx& ctx) override;
  Tensor backward(const Tensor& g_out, BackwardCtx& ctx) override;
  void visit(const std::string& prefix, const std::function<void(const std::string&, Layer&)>& fn) override;

 private:
  std::unique_ptr<Sequential> main_;
  std::unique_ptr<Sequential> shortcut_;  // null for identity
  ReLU relu_out_;
};

// 1x1 expand, 3x3 depthwise (the structure-specific quantization stress),
// 1x1 project; skip connection when stride 1 and channel counts match.
class InvertedResidual final : public Layer {
 public:
  InvertedResidual(int64_t in_c, int64_t out_c, int64_t stride, int64_t expand, InitRng& rng);

  std::string kind() const override { return "invres"; }
  Tensor forward(const Tensor& x, const ForwardCtx& ctx) override;
  Tensor backward(const Tensor& g_out, BackwardCtx& ctx) override;
  void visit(const std::string& prefix, const std::function<void(const std::string&, Layer&)>& fn) override;

 private:
  bool use_skip_;
  std::unique_ptr<Sequential> body_;
};

// Fused softmax + cross entropy over (N, classes) logits. Mean reduction.
struct SoftmaxCrossEntropy {
  // returns mean loss; fills g_logits = (softmax - onehot) / N
  static double loss_and_grad(const Tensor& logits, const std::vector<int32_t>& labels, Tensor& g_logits);
  static double loss_only(const Tensor& logits, const std::vector<int32_t>& labels);
};

// Figure-6-style automatic replacement: flips every conv and fc leaf to the
// 8-bit path, leaves everything else untouched. Returns the number of layers
// replaced.
int int8_replace(Layer& root);

}  // namespace i8t
