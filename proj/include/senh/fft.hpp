#pragma once

#include <complex>
#include <vector>

namespace senh::detail {

// In-place unnormalized DFT of arbitrary length: radix-2 when the size is a
// power of two, Bluestein's chirp-z otherwise. `inverse` flips the transform
// sign (still unnormalized, i.e. inverse(forward(x)) == n * x).
void fft(std::vector<std::complex<double>>& a, bool inverse);

}  // namespace senh::detail
