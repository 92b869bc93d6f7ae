#include "i8t/quantize.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace i8t {

QuantParams QuantParams::from_clip(float c) {
  if (!(c > 0.0f) || !std::isfinite(c)) throw std::invalid_argument("QuantParams: clip must be positive and finite");
  return QuantParams{c, c / 127.0f};
}

int8_t quantize_value(float x, const QuantParams& p, RoundingMode mode, LcgStream* stream) {
  if (!std::isfinite(x)) throw std::domain_error("quantize: non-finite input element");
  double v = std::clamp(static_cast<double>(x), -static_cast<double>(p.clip), static_cast<double>(p.clip));
  double scaled = std::clamp(v / static_cast<double>(p.scale), -127.0, 127.0);
  long q;
  if (mode == RoundingMode::kNearest) {
    q = std::lround(scaled);  // ties away from zero
  } else {
    double fl = std::floor(scaled);
    double frac = scaled - fl;
    double u = stream->next_uniform();  // one draw per element, unconditionally
    q = static_cast<long>(fl) + (u < frac ? 1 : 0);
  }
  q = std::clamp(q, -127L, 127L);
  return static_cast<int8_t>(q);
}

QuantizedTensor quantize(const Tensor& x, const QuantParams& p, RoundingMode mode, LcgStream* stream) {
  if ((mode == RoundingMode::kStochastic) != (stream != nullptr))
    throw std::invalid_argument("quantize: stream required iff mode is stochastic");
  QuantizedTensor out;
  out.shape = x.shape();
  out.params = p;
  out.q.resize(static_cast<size_t>(x.numel()));
  const float* px = x.data();
  for (int64_t i = 0; i < x.numel(); ++i) out.q[static_cast<size_t>(i)] = quantize_value(px[i], p, mode, stream);
  return out;
}

QuantizedTensor quantize_partitioned(const Tensor& x, const QuantParams& p, uint32_t base_seed,
                                     int partitions, int threads) {
  if (partitions < 1) throw std::invalid_argument("quantize_partitioned: partitions must be >= 1");
  QuantizedTensor out;
  out.shape = x.shape();
  out.params = p;
  out.q.resize(static_cast<size_t>(x.numel()));
  const int64_t n = x.numel();
  const float* px = x.data();

  auto run_chunk = [&](int k) {
    int64_t lo = n * k / partitions;
    int64_t hi = n * (k + 1) / partitions;
    LcgStream stream(base_seed + static_cast<uint32_t>(k));
    for (int64_t i = lo; i < hi; ++i)
      out.q[static_cast<size_t>(i)] = quantize_value(px[i], p, RoundingMode::kStochastic, &stream);
  };

  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  if (threads <= 1 || partitions == 1) {
    for (int k = 0; k < partitions; ++k) run_chunk(k);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    int nthreads = std::min(threads, partitions);
    pool.reserve(static_cast<size_t>(nthreads));
    for (int t = 0; t < nthreads; ++t) {
      pool.emplace_back([&] {
        for (int k = next.fetch_add(1); k < partitions; k = next.fetch_add(1)) run_chunk(k);
      });
    }
    for (auto& th : pool) th.join();
  }
  return out;
}

Tensor dequantize(const QuantizedTensor& qt) {
  Tensor out(qt.shape);
  float* po = out.data();
  for (int64_t i = 0; i < qt.numel(); ++i)
    po[i] = static_cast<float>(qt.q[static_cast<size_t>(i)]) * qt.params.scale;
  return out;
}

}  // namespace i8t
