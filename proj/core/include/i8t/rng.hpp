#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace i8t {

// SplitMix64. Used for weight init and batch shuffling so that runs are
// reproducible bit-for-bit across platforms; the standard library engines and
// distributions are implementation-defined.
class InitRng {
 public:
  explicit InitRng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // [0, 1)
  double next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Box-Muller; consumes two uniforms per pair, caches the second.
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_uniform();
    double u2 = next_uniform();
    while (u1 <= 0.0) u1 = next_uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // [0, n)
  uint64_t next_below(uint64_t n) { return next_u64() % n; }

 private:
  uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Deterministic Fisher-Yates.
template <typename T>
void shuffle(std::vector<T>& v, InitRng& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(rng.next_below(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace i8t
