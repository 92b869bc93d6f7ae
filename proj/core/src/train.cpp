#include "i8t/train.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "i8t/rng.hpp"

namespace i8t {

Trainer::Trainer(Model& model, const TrainConfig& cfg)
    : model_(model), cfg_(cfg), grad_stream_(static_cast<uint32_t>(cfg.seed)) {
  leaves_ = model_.leaves();
  for (auto& [path, layer] : leaves_) {
    if (QuantState* qs = layer->quant_state()) {
      qs->clip_state.layer_id = path;
      qs->clip_state.period = cfg_.clip_period;
      quant_layers_.emplace_back(path, layer);
    }
  }
  if (cfg_.momentum != 0.0) {
    momentum_.resize(leaves_.size());
    for (size_t i = 0; i < leaves_.size(); ++i)
      for (ParamRef p : leaves_[i].second->params()) momentum_[i].emplace_back(p.value->shape());
  }
}

void Trainer::calibrate(const Tensor& batch) {
  ForwardCtx ctx{.mode = Mode::kFp32, .training = false, .track_amax = true, .threads = cfg_.threads};
  model_.net->forward(batch, ctx);
}

void Trainer::finish_calibration() { refresh_wa_clips(); }

void Trainer::refresh_wa_clips() {
  for (auto& [path, layer] : quant_layers_) {
    QuantState* qs = layer->quant_state();
    float wmax = 0.0f;
    for (ParamRef p : layer->params())
      if (p.name == "weight") wmax = max_abs(*p.value);
    if (wmax > 0.0f) qs->clip_w = wmax;
    if (qs->pending_amax > 0.0f) qs->clip_a = qs->pending_amax;
    qs->pending_amax = 0.0f;
  }
}

double Trainer::base_lr_at(int64_t iter, int64_t total_iters) const {
  if (cfg_.schedule == LrSchedule::kConstant || total_iters <= 0) return cfg_.base_lr;
  const double t = static_cast<double>(iter) / static_cast<double>(total_iters);
  return cfg_.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

StepReport Trainer::train_step(const Tensor& images, const std::vector<int32_t>& labels, int64_t iter,
                               int64_t total_iters, GradSnapshotSink* snapshot) {
  StepReport report;
  report.iter = iter;
  report.base_lr_t = base_lr_at(iter, total_iters);

  ForwardCtx fctx{.mode = cfg_.mode, .training = true,
                  .track_amax = cfg_.mode == Mode::kInt8, .threads = cfg_.threads};
  Tensor logits = model_.net->forward(images, fctx);

  Tensor g_logits;
  report.loss = SoftmaxCrossEntropy::loss_and_grad(logits, labels, g_logits);
  auto fill_layer_stats = [&]() {
    for (auto& [path, layer] : quant_layers_) {
      const QuantState* qs = layer->quant_state();
      report.layers.push_back({path, qs->dc, qs->clip_state.clip, qs->lr_scale, qs->eps_norm,
                               qs->ghat_sqnorm});
    }
  };
  if (!std::isfinite(report.loss) || has_nonfinite(logits)) {
    report.diverged = true;
    fill_layer_stats();
    return report;
  }

  BackwardCtx bctx{.mode = cfg_.mode, .iter = iter, .grad_stream = &grad_stream_,
                   .clip_cfg = cfg_.clip_search, .clip_search_enabled = cfg_.clip_enabled,
                   .clip_period = cfg_.clip_period, .lr_cfg = cfg_.lr_scale,
                   .lr_scaling_enabled = cfg_.lr_scaling_enabled, .threads = cfg_.threads,
                   .snapshot = snapshot};
  model_.net->backward(g_logits, bctx);
  report.clip_time_seconds = bctx.clip_time_seconds;

  bool bad_grad = false;
  for (auto& [path, layer] : leaves_)
    for (ParamRef p : layer->params())
      if (p.grad && has_nonfinite(*p.grad)) bad_grad = true;
  if (bad_grad) {
    report.diverged = true;
    fill_layer_stats();
    return report;
  }

  for (size_t li = 0; li < leaves_.size(); ++li) {
    Layer* layer = leaves_[li].second;
    const QuantState* qs = layer->quant_state();
    const double lr = report.base_lr_t *
                      ((qs && cfg_.mode == Mode::kInt8 && layer->quantized()) ? qs->lr_scale : 1.0);
    auto params = layer->params();
    for (size_t pi = 0; pi < params.size(); ++pi) {
      ParamRef& p = params[pi];
      if (!p.grad) continue;
      if (cfg_.momentum != 0.0) {
        Tensor& buf = momentum_[li][pi];
        for (int64_t i = 0; i < p.value->numel(); ++i) {
          buf[i] = static_cast<float>(cfg_.momentum * buf[i] + (*p.grad)[i]);
          (*p.value)[i] -= static_cast<float>(lr * buf[i]);
        }
      } else {
        for (int64_t i = 0; i < p.value->numel(); ++i)
          (*p.value)[i] -= static_cast<float>(lr * (*p.grad)[i]);
      }
    }
  }
  fill_layer_stats();
  return report;
}

double Trainer::evaluate(const Dataset& data, int64_t max_batches) {
  if (data.size() == 0) return 0.0;
  ForwardCtx ctx{.mode = cfg_.mode, .training = false, .track_amax = false, .threads = cfg_.threads};
  int64_t correct = 0, seen = 0, batches = 0;
  std::vector<int64_t> idx(static_cast<size_t>(cfg_.batch_size));
  for (int64_t start = 0; start < data.size(); start += cfg_.batch_size) {
    const int64_t b = std::min(cfg_.batch_size, data.size() - start);
    idx.resize(static_cast<size_t>(b));
    for (int64_t i = 0; i < b; ++i) idx[static_cast<size_t>(i)] = start + i;
    Tensor batch = data.gather(idx);
    Tensor logits = model_.net->forward(batch, ctx);
    const int64_t classes = logits.shape()[1];
    for (int64_t i = 0; i < b; ++i) {
      int64_t arg = 0;
      for (int64_t c = 1; c < classes; ++c)
        if (logits[i * classes + c] > logits[i * classes + arg]) arg = c;
      if (arg == data.labels[static_cast<size_t>(start + i)]) ++correct;
      ++seen;
    }
    if (++batches == max_batches) break;
  }
  return seen ? static_cast<double>(correct) / static_cast<double>(seen) : 0.0;
}

RunResult run_training(Model& model, const Dataset& train, const Dataset& test,
                       const TrainConfig& cfg, const std::string& run_id, TraceSink* trace,
                       const SnapshotRequest* snapshots) {
  const auto wall0 = std::chrono::steady_clock::now();
  RunResult result;
  if (cfg.mode == Mode::kInt8) int8_replace(*model.net);
  Trainer trainer(model, cfg);

  const int64_t n = train.size();
  if (cfg.batch_size < 1 || (cfg.epochs > 0 && n < cfg.batch_size))
    throw std::invalid_argument("run_training: batch size exceeds dataset");
  const int64_t iters_per_epoch = cfg.epochs > 0 ? n / cfg.batch_size : 0;
  result.total_iters = iters_per_epoch * cfg.epochs;

  // calibration pass (INT8 only): FP32 forwards tracking activation maxima
  if (cfg.mode == Mode::kInt8 && result.total_iters > 0) {
    std::vector<int64_t> order(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    for (int b = 0; b < cfg.calibration_batches; ++b) {
      const int64_t start = b * cfg.batch_size;
      if (start + cfg.batch_size > n) break;
      std::vector<int64_t> idx(order.begin() + start, order.begin() + start + cfg.batch_size);
      trainer.calibrate(train.gather(idx));
    }
    trainer.finish_calibration();
  }

  if (cfg.epochs == 0) {
    result.final_test_accuracy = trainer.evaluate(test);
    result.epoch_test_accuracy.push_back(result.final_test_accuracy);
    result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    return result;
  }

  int64_t iter = 0;
  double last_loss = 0.0;
  for (int64_t epoch = 0; epoch < cfg.epochs && !result.crashed; ++epoch) {
    std::vector<int64_t> order(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    InitRng shuffle_rng(cfg.seed * 1000003ull + static_cast<uint64_t>(epoch));
    shuffle(order, shuffle_rng);

    for (int64_t b = 0; b < iters_per_epoch; ++b, ++iter) {
      // periodic refresh of weight/activation clips, on the clip period
      if (cfg.mode == Mode::kInt8 && iter > 0 && cfg.clip_period > 0 && iter % cfg.clip_period == 0) {
        const auto t0 = std::chrono::steady_clock::now();
        trainer.refresh_wa_clips();
        result.clip_time_seconds +=
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      }
      std::vector<int64_t> idx(order.begin() + b * cfg.batch_size,
                               order.begin() + (b + 1) * cfg.batch_size);
      Tensor images = train.gather(idx);
      std::vector<int32_t> labels = train.gather_labels(idx);

      GradSnapshotSink* snap = nullptr;
      if (snapshots && snapshots->sink && snapshots->iters.count(iter)) snap = snapshots->sink;

      StepReport report = trainer.train_step(images, labels, iter, result.total_iters, snap);
      last_loss = report.loss;
      result.clip_time_seconds += report.clip_time_seconds;
      if (trace)
        for (const LayerStepStat& ls : report.layers)
          trace->row(run_id, iter, ls.layer, report.loss, ls.dc, ls.clip, ls.lr_scale, ls.eps_norm,
                     ls.ghat_sqnorm);
      if (report.diverged) {
        result.crashed = true;
        result.crash_iter = iter;
        break;
      }
    }
    result.iters_run = iter;
    if (!result.crashed) result.epoch_test_accuracy.push_back(trainer.evaluate(test));
  }
  result.final_train_loss = last_loss;
  result.final_test_accuracy =
      result.epoch_test_accuracy.empty() ? 0.0 : result.epoch_test_accuracy.back();
  if (result.iters_run > 0)
    result.clip_time_per_iter = result.clip_time_seconds / static_cast<double>(result.iters_run);
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  return result;
}

}  // namespace i8t
