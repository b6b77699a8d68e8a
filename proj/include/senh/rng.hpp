#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace senh {

// Deterministic random source. mt19937_64 supplies the bits; all value
// derivation (uniform, normal) is done here because the standard
// distributions are implementation-defined and would break cross-toolchain
// reproducibility.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  // Independent stream derived from (seed, stream, index), so e.g. epoch or
  // row identity can key the randomness without sharing sequence state.
  static Rng keyed(uint64_t seed, uint64_t stream, uint64_t index);

  uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n).
  int64_t uniform_int(int64_t n);

  // Standard normal via Box-Muller.
  double normal();

  // N(0, std^2) truncated to +/- 2 std by resampling.
  double trunc_normal(double std_dev);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int64_t i = static_cast<int64_t>(v.size()) - 1; i > 0; --i) {
      int64_t j = uniform_int(i + 1);
      std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(j)]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace senh
