#include <cmath>
#include <cstring>
#include <unordered_set>

#include "doctest.h"
#include "i8t/quantize.hpp"
#include "i8t/rng.hpp"

using namespace i8t;

TEST_CASE("lcg recurrence") {
  LcgStream s(0);
  CHECK(s.next_state() == 1013904223u);

  // wide-integer oracle for the next step
  uint64_t wide = (1664525ull * 1013904223ull + 1013904223ull) % (1ull << 32);
  CHECK(s.next_state() == static_cast<uint32_t>(wide));

  LcgStream u(12345);
  double d = u.next_uniform();
  CHECK(d >= 0.0);
  CHECK(d < 1.0);
  CHECK(d == static_cast<double>(u.state()) / 4294967296.0);
}

TEST_CASE("lcg 2^20-state prefix has no repeats") {
  LcgStream s(99);
  std::unordered_set<uint32_t> seen;
  seen.reserve(1u << 20);
  for (int i = 0; i < (1 << 20); ++i) CHECK_MESSAGE(seen.insert(s.next_state()).second, "state repeated at " << i);
}

TEST_CASE("quantize basics") {
  QuantParams p = QuantParams::from_clip(127.0f);  // s = 1
  CHECK(p.scale == 1.0f);

  Tensor zero({3}, {0.0f, 0.0f, 0.0f});
  auto qz = quantize(zero, p, RoundingMode::kNearest);
  for (int8_t v : qz.q) CHECK(v == 0);

  Tensor big({1}, {200.0f});
  CHECK(quantize(big, p, RoundingMode::kNearest).q[0] == 127);  // clipped
  Tensor nbig({1}, {-200.0f});
  CHECK(quantize(nbig, p, RoundingMode::kNearest).q[0] == -127);
}

TEST_CASE("stochastic rounding splits 3.4 into 3 and 4 with the right rates") {
  QuantParams p = QuantParams::from_clip(127.0f);
  LcgStream stream(2024);
  const int n = 100000;
  Tensor x({1}, {3.4f});
  int64_t sum = 0;
  for (int i = 0; i < n; ++i) {
    int8_t q = quantize(x, p, RoundingMode::kStochastic, &stream).q[0];
    CHECK((q == 3 || q == 4));
    sum += q;
  }
  double mean = static_cast<double>(sum) / n;
  double sigma = std::sqrt(0.6 * 0.4);  // Bernoulli(0.4) on the upper value
  CHECK(std::fabs(mean - 3.4) < 3.0 * sigma / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("quantize errors") {
  QuantParams p = QuantParams::from_clip(1.0f);
  Tensor bad({1}, {std::numeric_limits<float>::quiet_NaN()});
  CHECK_THROWS(quantize(bad, p, RoundingMode::kNearest));
  Tensor ok({1}, {0.5f});
  CHECK_THROWS(quantize(ok, p, RoundingMode::kStochastic, nullptr));
  LcgStream s(0);
  CHECK_THROWS(quantize(ok, p, RoundingMode::kNearest, &s));
  CHECK_THROWS(QuantParams::from_clip(0.0f));
  CHECK_THROWS(QuantParams::from_clip(-1.0f));
}

TEST_CASE("dequantize") {
  QuantizedTensor qt;
  qt.shape = Shape{2};
  qt.q = {127, 0};
  qt.params = QuantParams::from_clip(1.27f);  // s = 0.01
  Tensor x = dequantize(qt);
  CHECK(x[0] == doctest::Approx(1.27).epsilon(1e-6));
  CHECK(x[1] == 0.0f);
}

TEST_CASE("nearest round-trip stays within half a step") {
  const float c = 0.8f;
  QuantParams p = QuantParams::from_clip(c);
  const int n = 10000;  // exhaustive sweep over a grid in [-c, c]
  for (int i = 0; i <= n; ++i) {
    float x = -c + 2.0f * c * static_cast<float>(i) / n;
    Tensor t({1}, {x});
    float back = dequantize(quantize(t, p, RoundingMode::kNearest))[0];
    CHECK(std::fabs(back - x) <= p.scale * 0.5f * (1.0f + 1e-5f));
  }
}

TEST_CASE("stochastic quantization is unbiased") {
  const float c = 1.0f;
  QuantParams p = QuantParams::from_clip(c);
  const int n = 100000;
  LcgStream stream(7);
  for (float x : {-0.83f, -0.31f, 0.0f, 0.204f, 0.77f}) {
    Tensor t({1}, {x});
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += dequantize(quantize(t, p, RoundingMode::kStochastic, &stream))[0];
    double mean = acc / n;
    double tol = 4.0 * (static_cast<double>(p.scale) / std::sqrt(12.0 * n));
    CHECK_MESSAGE(std::fabs(mean - x) < tol, "x=" << x << " mean=" << mean);
  }
}

TEST_CASE("identical seed gives identical quantized tensors") {
  InitRng rng(5);
  Tensor t(Shape{257});
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.next_gaussian());
  QuantParams p = QuantParams::from_clip(max_abs(t));
  LcgStream s1(31337), s2(31337);
  auto a = quantize(t, p, RoundingMode::kStochastic, &s1);
  auto b = quantize(t, p, RoundingMode::kStochastic, &s2);
  CHECK(a.q == b.q);
  CHECK(s1.state() == s2.state());
  // one draw per element, unconditionally
  LcgStream ref(31337);
  for (int64_t i = 0; i < t.numel(); ++i) ref.next_state();
  CHECK(s1.state() == ref.state());
}

TEST_CASE("clipping idempotence and negation symmetry under nearest") {
  InitRng rng(11);
  Tensor t(Shape{512});
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.next_gaussian() * 0.3);
  QuantParams p = QuantParams::from_clip(0.7f);
  auto q1 = quantize(t, p, RoundingMode::kNearest);
  auto q2 = quantize(dequantize(q1), p, RoundingMode::kNearest);
  CHECK(q1.q == q2.q);

  Tensor neg(t.shape());
  for (int64_t i = 0; i < t.numel(); ++i) neg[i] = -t[i];
  auto qn = quantize(neg, p, RoundingMode::kNearest);
  for (size_t i = 0; i < q1.q.size(); ++i) CHECK(qn.q[i] == -q1.q[i]);
}

TEST_CASE("partitioned quantization is thread-count invariant") {
  InitRng rng(3);
  Tensor t(Shape{1000});
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.next_gaussian());
  QuantParams p = QuantParams::from_clip(max_abs(t));
  auto serial = quantize_partitioned(t, p, 900, 8, 1);
  auto threaded = quantize_partitioned(t, p, 900, 8, 4);
  CHECK(serial.q == threaded.q);

  // chunk k draws from LcgStream(base_seed + k)
  LcgStream s0(900);
  CHECK(serial.q[0] == quantize_value(t[0], p, RoundingMode::kStochastic, &s0));
}
