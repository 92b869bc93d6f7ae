#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "i8t/dataset.hpp"
#include "i8t/models.hpp"

namespace i8t {

enum class LrSchedule { kCosine, kConstant };

struct TrainConfig {
  Mode mode = Mode::kInt8;
  double base_lr = 0.1;
  LrSchedule schedule = LrSchedule::kCosine;
  LrScaleConfig lr_scale;
  bool lr_scaling_enabled = true;
  ClipSearchConfig clip_search;
  bool clip_enabled = true;  // off: clip = max_abs(g_z) every iteration
  int64_t clip_period = 100;
  uint64_t seed = 1;
  int64_t batch_size = 64;
  int64_t epochs = 5;
  int calibration_batches = 2;
  double momentum = 0.0;  // kept at 0 in every acceptance run
  int threads = 1;
};

struct LayerStepStat {
  std::string layer;
  double dc = 0.0;
  double clip = 0.0;
  double lr_scale = 1.0;
  double eps_norm = 0.0;
  double ghat_sqnorm = 0.0;
};

struct StepReport {
  int64_t iter = 0;
  double loss = 0.0;
  bool diverged = false;
  double base_lr_t = 0.0;
  double clip_time_seconds = 0.0;
  std::vector<LayerStepStat> layers;
};

// One row per iteration per layer; the CSV trace and in-memory consumers both
// implement this.
class TraceSink {
 public:
  virtual ~TraceSink() = default;
  virtual void row(const std::string& run_id, int64_t iter, const std::string& layer, double loss,
                   double dc, double clip, double lr_scale, double eps_norm, double ghat_sqnorm) = 0;
};

struct SnapshotRequest {
  std::set<int64_t> iters;
  GradSnapshotSink* sink = nullptr;
};

class Trainer {
 public:
  Trainer(Model& model, const TrainConfig& cfg);

  // clip_W = max_abs(W); clip_a = running max of batch maxima, collected over
  // FP32 forward passes of the calibration batches.
  void calibrate(const Tensor& batch);
  void finish_calibration();

  StepReport train_step(const Tensor& images, const std::vector<int32_t>& labels, int64_t iter,
                        int64_t total_iters, GradSnapshotSink* snapshot = nullptr);

  double evaluate(const Dataset& data, int64_t max_batches = -1);

  double base_lr_at(int64_t iter, int64_t total_iters) const;
  const std::vector<std::pair<std::string, Layer*>>& quant_layers() const { return quant_layers_; }
  // refresh clip_w / clip_a from current weights and tracked activation maxima
  void refresh_wa_clips();

 private:
  Model& model_;
  TrainConfig cfg_;
  LcgStream grad_stream_;
  std::vector<std::pair<std::string, Layer*>> leaves_;
  std::vector<std::pair<std::string, Layer*>> quant_layers_;
  std::vector<std::vector<Tensor>> momentum_;  // per leaf, per param
};

struct RunResult {
  bool crashed = false;
  int64_t crash_iter = -1;
  double final_test_accuracy = 0.0;
  std::vector<double> epoch_test_accuracy;
  double final_train_loss = 0.0;
  int64_t iters_run = 0;
  int64_t total_iters = 0;
  double clip_time_seconds = 0.0;        // total maintenance cost
  double clip_time_per_iter = 0.0;
  double wall_seconds = 0.0;
};

// Full deterministic training loop: per-epoch Fisher-Yates shuffle seeded by
// (seed, epoch), optional trace rows, optional gradient snapshots, per-epoch
// test evaluation, crash-as-data semantics.
RunResult run_training(Model& model, const Dataset& train, const Dataset& test,
                       const TrainConfig& cfg, const std::string& run_id,
                       TraceSink* trace = nullptr, const SnapshotRequest* snapshots = nullptr);

}  // namespace i8t
