#include <cmath>
#include <random>

#include "doctest.h"
#include "i8t/rng.hpp"
#include "i8t/tensor.hpp"

using namespace i8t;

namespace {

Tensor random_tensor(Shape shape, uint64_t seed, float scale = 1.0f) {
  InitRng rng(seed);
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i)
    t[i] = static_cast<float>((rng.next_uniform() * 2.0 - 1.0) * scale);
  return t;
}

}  // namespace

TEST_CASE("l2_norm basics") {
  CHECK(l2_norm(Tensor({2}, {3.0f, 4.0f})) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(l2_norm(Tensor(Shape{8})) == 0.0);
}

TEST_CASE("l2_norm matches 64-bit reference on random data") {
  Tensor t = random_tensor(Shape{1000}, 42);
  double ref = 0.0;  // independent 64-bit summation
  for (int64_t i = 0; i < t.numel(); ++i) ref += double(t[i]) * double(t[i]);
  ref = std::sqrt(ref);
  CHECK(l2_norm(t) == doctest::Approx(ref).epsilon(1e-6));
}

TEST_CASE("max_abs") {
  CHECK(max_abs(Tensor({2}, {-3.0f, 2.0f})) == 3.0f);
  CHECK(max_abs(Tensor(Shape{5})) == 0.0f);
  Tensor t = random_tensor(Shape{777}, 7);
  float ref = 0.0f;  // linear scan oracle
  for (int64_t i = 0; i < t.numel(); ++i) ref = std::max(ref, std::fabs(t[i]));
  CHECK(max_abs(t) == ref);
}

TEST_CASE("has_nonfinite") {
  CHECK_FALSE(has_nonfinite(Tensor({2}, {1.0f, 2.0f})));
  CHECK(has_nonfinite(Tensor({2}, {1.0f, std::numeric_limits<float>::quiet_NaN()})));
  CHECK(has_nonfinite(Tensor({2}, {1.0f, std::numeric_limits<float>::infinity()})));
}

TEST_CASE("row-major index round-trip") {
  Shape s{3, 4, 5};
  for (int64_t flat = 0; flat < s.numel(); ++flat) {
    auto idx = s.unflatten(flat);
    CHECK(s.flatten(idx) == flat);
  }
  // spot-check the layout convention: last dim fastest
  CHECK(s.flatten(std::vector<int64_t>{0, 0, 1}) == 1);
  CHECK(s.flatten(std::vector<int64_t>{0, 1, 0}) == 5);
  CHECK(s.flatten(std::vector<int64_t>{1, 0, 0}) == 20);
}

TEST_CASE("norm of concatenation") {
  Tensor a = random_tensor(Shape{321}, 1);
  Tensor b = random_tensor(Shape{123}, 2);
  std::vector<float> cat(a.data(), a.data() + a.numel());
  cat.insert(cat.end(), b.data(), b.data() + b.numel());
  Tensor c(Shape{a.numel() + b.numel()}, std::move(cat));
  double lhs = sq_l2_norm(a) + sq_l2_norm(b);
  double rhs = l2_norm(c) * l2_norm(c);
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-6));
}

TEST_CASE("shape and tensor invariants") {
  CHECK_THROWS(Shape({2, 0, 3}));
  CHECK_THROWS(Tensor(Shape{4}, std::vector<float>(3)));
  CHECK(Shape({2, 3, 4}).numel() == 24);
}
