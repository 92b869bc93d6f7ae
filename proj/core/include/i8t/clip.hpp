#pragma once

#include <cstdint>
#include <string>

#include "i8t/quantize.hpp"
#include "i8t/tensor.hpp"

namespace i8t {

// Per-layer, per-stream gradient clipping state.
struct ClipState {
  std::string layer_id;
  float clip = 0.0f;  // 0 means "not yet initialized"; forces a search
  double last_dc = 0.0;
  int64_t iter_of_last_update = -1;
  int64_t period = 100;
};

struct ClipSearchConfig {
  int grid_resolution = 32;  // candidate ratios i/R of max_abs, i = 1..R; >= 8
  int refine_rounds = 2;     // golden-section rounds around the best bracket
};

struct ClipSearchResult {
  float clip = 0.0f;
  double dc = 0.0;
};

// 1 - (g . g_hat) / (|g| |g_hat|), 64-bit accumulation. Degenerate cases:
// both norms zero -> 0, exactly one zero -> 1.
double cosine_distance(const Tensor& g, const Tensor& g_hat);

// d_c of g against its nearest-rounded quantize-dequantize at clip c.
// Deterministic, so the search objective and the per-iteration measurement
// agree exactly on repeated evaluation.
double measure_dc(const Tensor& g, float clip);

// Coarse grid over ratios {i/R} * max_abs(g) followed by golden-section
// refinement; returns the best (lowest-d_c) clip seen, preferring the larger
// clip on exact ties. Never worse than c = max_abs(g) since ratio 1 is always
// a candidate. All-zero g returns {prev_clip, 0}.
ClipSearchResult search_clip(const Tensor& g, const ClipSearchConfig& cfg, float prev_clip = 0.0f);

// Periodic Update: run the search when (iter - iter_of_last_update) >= period
// or the state is uninitialized; otherwise only refresh last_dc at the
// current clip (the scaler consumes d_c every iteration).
void maybe_update(ClipState& state, const Tensor& g, int64_t iter, const ClipSearchConfig& cfg);

}  // namespace i8t
