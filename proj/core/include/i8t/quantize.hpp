#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "i8t/tensor.hpp"

namespace i8t {

// Symmetric uniform 8-bit quantization: clip to [-c, c], scale s = c/127,
// round. Quantized values live in [-127, 127]; -128 is never produced.
struct QuantParams {
  float clip = 1.0f;   // c > 0
  float scale = 1.0f;  // s = c / 127

  static QuantParams from_clip(float c);
};

struct QuantizedTensor {
  Shape shape;
  std::vector<int8_t> q;
  QuantParams params;

  int64_t numel() const { return static_cast<int64_t>(q.size()); }
};

enum class RoundingMode { kNearest, kStochastic };

// Linear congruential generator, X_{n+1} = (a*X_n + c) mod 2^32 with
// a = 1664525, c = 1013904223. Uniform draws are X_{n+1} / 2^32 in [0, 1).
class LcgStream {
 public:
  static constexpr uint32_t kMultiplier = 1664525u;
  static constexpr uint32_t kIncrement = 1013904223u;

  explicit LcgStream(uint32_t seed = 0) : state_(seed) {}

  uint32_t state() const { return state_; }

  uint32_t next_state() {
    state_ = kMultiplier * state_ + kIncrement;  // mod 2^32 by wraparound
    return state_;
  }

  double next_uniform() { return static_cast<double>(next_state()) * 0x1.0p-32; }

 private:
  uint32_t state_;
};

// Scalar core shared by tensor quantization and the fused GEMM path.
// Stochastic mode consumes exactly one draw per call.
int8_t quantize_value(float x, const QuantParams& p, RoundingMode mode, LcgStream* stream);

// stream is required iff mode == kStochastic. Throws std::domain_error on a
// non-finite input element.
QuantizedTensor quantize(const Tensor& x, const QuantParams& p, RoundingMode mode,
                         LcgStream* stream = nullptr);

// Parallel-partitioned stochastic quantization: element range split into
// `partitions` contiguous chunks, chunk k drawing from LcgStream(base_seed + k).
// The result is a pure function of (x, p, base_seed, partitions) regardless of
// how many threads execute the chunks.
QuantizedTensor quantize_partitioned(const Tensor& x, const QuantParams& p, uint32_t base_seed,
                                     int partitions, int threads = 0);

Tensor dequantize(const QuantizedTensor& qt);

}  // namespace i8t
