#include "senh/rng.hpp"

#include <cmath>

namespace senh {

static uint64_t splitmix64(uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Rng Rng::keyed(uint64_t seed, uint64_t stream, uint64_t index) {
  uint64_t state = seed;
  uint64_t a = splitmix64(state);
  state ^= stream * 0xd1342543de82ef95ULL;
  uint64_t b = splitmix64(state);
  state ^= index * 0xaf251af3b0f025b5ULL;
  uint64_t c = splitmix64(state);
  return Rng(a ^ (b * 3) ^ (c * 7));
}

int64_t Rng::uniform_int(int64_t n) {
  if (n <= 0) return 0;
  const uint64_t un = static_cast<uint64_t>(n);
  const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
  uint64_t x;
  do {
    x = gen_();
  } while (x >= limit);
  return static_cast<int64_t>(x % un);
}

double Rng::normal() {
  // u1 in (0, 1] keeps the log finite.
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double Rng::trunc_normal(double std_dev) {
  for (;;) {
    double z = normal();
    if (std::abs(z) <= 2.0) return z * std_dev;
  }
}

}  // namespace senh
