#include "senh/fft.hpp"

#include <cmath>
#include <stdexcept>

namespace senh::detail {

using cplx = std::complex<double>;

static bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

static size_t next_pow2(size_t n) {
  size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Iterative radix-2 Cooley-Tukey, size must be a power of two.
static void fft_pow2(std::vector<cplx>& a, bool inverse) {
  const size_t n = a.size();
  if (n <= 1) return;
  // Bit-reversal permutation.
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
    const cplx wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      cplx w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        cplx u = a[i + k];
        cplx v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

// Bluestein's algorithm: expresses a length-n DFT as a convolution that is
// evaluated with a power-of-two FFT. The chirp exponent is reduced mod 2n to
// keep the angle argument small for large indices.
static void fft_bluestein(std::vector<cplx>& a, bool inverse) {
  const size_t n = a.size();
  const size_t m = next_pow2(2 * n - 1);
  std::vector<cplx> chirp(n);
  for (size_t j = 0; j < n; ++j) {
    const size_t jsq = (j * j) % (2 * n);
    const double ang = (inverse ? 1.0 : -1.0) * M_PI * static_cast<double>(jsq) /
                       static_cast<double>(n);
    chirp[j] = cplx(std::cos(ang), std::sin(ang));
  }
  std::vector<cplx> fa(m, cplx(0.0, 0.0));
  std::vector<cplx> fb(m, cplx(0.0, 0.0));
  for (size_t j = 0; j < n; ++j) fa[j] = a[j] * chirp[j];
  fb[0] = std::conj(chirp[0]);
  for (size_t j = 1; j < n; ++j) fb[j] = fb[m - j] = std::conj(chirp[j]);
  fft_pow2(fa, false);
  fft_pow2(fb, false);
  for (size_t j = 0; j < m; ++j) fa[j] *= fb[j];
  fft_pow2(fa, true);
  const double inv_m = 1.0 / static_cast<double>(m);
  for (size_t j = 0; j < n; ++j) a[j] = fa[j] * inv_m * chirp[j];
}

void fft(std::vector<cplx>& a, bool inverse) {
  if (a.empty()) throw std::invalid_argument("fft: empty input");
  if (is_pow2(a.size()))
    fft_pow2(a, inverse);
  else
    fft_bluestein(a, inverse);
}

}  // namespace senh::detail
