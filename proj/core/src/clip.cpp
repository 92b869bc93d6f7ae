#include "i8t/clip.hpp"

#include <cmath>
#include <stdexcept>

namespace i8t {

double cosine_distance(const Tensor& g, const Tensor& g_hat) {
  if (!(g.shape() == g_hat.shape())) throw std::invalid_argument("cosine_distance: shape mismatch");
  double num = 0.0, sq_g = 0.0, sq_h = 0.0;
  const float* pg = g.data();
  const float* ph = g_hat.data();
  for (int64_t i = 0; i < g.numel(); ++i) {
    const double a = pg[i], b = ph[i];
    num += a * b;
    sq_g += a * a;
    sq_h += b * b;
  }
  if (sq_g == 0.0 && sq_h == 0.0) return 0.0;
  if (sq_g == 0.0 || sq_h == 0.0) return 1.0;
  return 1.0 - num / (std::sqrt(sq_g) * std::sqrt(sq_h));
}

double measure_dc(const Tensor& g, float clip) {
  QuantParams p = QuantParams::from_clip(clip);
  Tensor g_hat = dequantize(quantize(g, p, RoundingMode::kNearest));
  return cosine_distance(g, g_hat);
}

ClipSearchResult search_clip(const Tensor& g, const ClipSearchConfig& cfg, float prev_clip) {
  if (cfg.grid_resolution < 8) throw std::invalid_argument("search_clip: grid resolution must be >= 8");
  const float m = max_abs(g);
  if (m == 0.0f) return {prev_clip, 0.0};
  if (has_nonfinite(g)) throw std::domain_error("search_clip: non-finite gradient");

  ClipSearchResult best{0.0f, 2.0 + 1.0};
  auto consider = [&](float c) {
    if (!(c > 0.0f)) return;
    double dc = measure_dc(g, c);
    if (dc < best.dc || (dc == best.dc && c > best.clip)) best = {c, dc};
  };

  const int r = cfg.grid_resolution;
  for (int i = 1; i <= r; ++i) consider(m * (static_cast<float>(i) / static_cast<float>(r)));
  if (cfg.refine_rounds <= 0) return best;

  // Golden-section rounds around the best grid point, one grid step each side.
  double lo = std::max(0.0, static_cast<double>(best.clip) - static_cast<double>(m) / r);
  double hi = std::min(static_cast<double>(m), static_cast<double>(best.clip) + static_cast<double>(m) / r);
  constexpr double kInvPhi = 0.6180339887498949;
  double x1 = hi - (hi - lo) * kInvPhi;
  double x2 = lo + (hi - lo) * kInvPhi;
  double f1 = measure_dc(g, static_cast<float>(x1));
  double f2 = measure_dc(g, static_cast<float>(x2));
  auto track = [&](double x, double f) {
    if (f < best.dc || (f == best.dc && static_cast<float>(x) > best.clip)) best = {static_cast<float>(x), f};
  };
  track(x1, f1);
  track(x2, f2);
  for (int round = 0; round < cfg.refine_rounds; ++round) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - (hi - lo) * kInvPhi;
      f1 = measure_dc(g, static_cast<float>(x1));
      track(x1, f1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + (hi - lo) * kInvPhi;
      f2 = measure_dc(g, static_cast<float>(x2));
      track(x2, f2);
    }
  }
  return best;
}

void maybe_update(ClipState& state, const Tensor& g, int64_t iter, const ClipSearchConfig& cfg) {
  if (iter < state.iter_of_last_update) throw std::invalid_argument("maybe_update: iter went backwards");
  const bool uninitialized = !(state.clip > 0.0f);
  const bool due = uninitialized || state.iter_of_last_update < 0 ||
                   (iter - state.iter_of_last_update) >= state.period;
  if (due) {
    ClipSearchResult r = search_clip(g, cfg, state.clip);
    if (r.clip > 0.0f) state.clip = r.clip;
    state.last_dc = r.dc;
    state.iter_of_last_update = iter;
  } else {
    state.last_dc = (max_abs(g) == 0.0f) ? 0.0 : measure_dc(g, state.clip);
  }
}

}  // namespace i8t
