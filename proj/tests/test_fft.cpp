#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "senh/fft.hpp"
#include "senh/gradcheck.hpp"
#include "senh/ops.hpp"
#include "tests/helpers.hpp"

using namespace senh;
using testutil::random_tensor;

namespace {

// Oracle: naive O(N^2) 2-D DFT of one real plane, same (unnormalized,
// negative-exponent) convention the implementation documents.
std::vector<std::complex<double>> naive_dft2(const double* x, int64_t h, int64_t w) {
  std::vector<std::complex<double>> out(static_cast<size_t>(h * w));
  for (int64_t k = 0; k < h; ++k)
    for (int64_t l = 0; l < w; ++l) {
      std::complex<double> acc(0.0, 0.0);
      for (int64_t m = 0; m < h; ++m)
        for (int64_t n = 0; n < w; ++n) {
          const double ang = -2.0 * M_PI * (static_cast<double>(k * m) / static_cast<double>(h) +
                                            static_cast<double>(l * n) / static_cast<double>(w));
          acc += x[m * w + n] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
      out[static_cast<size_t>(k * w + l)] = acc;
    }
  return out;
}

}  // namespace

TEST_CASE("1-D fft roundtrip: inverse(forward(x)) == n * x") {
  for (size_t n : {size_t{8}, size_t{5}, size_t{12}, size_t{1}}) {
    Rng rng(n);
    std::vector<std::complex<double>> a(n), orig(n);
    for (size_t i = 0; i < n; ++i) orig[i] = a[i] = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    detail::fft(a, false);
    detail::fft(a, true);
    for (size_t i = 0; i < n; ++i) {
      CHECK(a[i].real() == doctest::Approx(orig[i].real() * static_cast<double>(n)).epsilon(1e-10));
      CHECK(a[i].imag() == doctest::Approx(orig[i].imag() * static_cast<double>(n)).epsilon(1e-10));
    }
  }
}

TEST_CASE("rfft2 constant plane: DC bin 16c, all others zero") {
  const double c = 0.3;
  Tensor x({1, 1, 4, 4}, c);
  Tensor f = rfft2(x);
  CHECK(f.shape() == Shape{1, 1, 4, 3, 2});
  CHECK(f.data()[0] == doctest::Approx(16.0 * c).epsilon(1e-12));
  for (size_t i = 1; i < f.data().size(); ++i) CHECK(std::abs(f.data()[i]) < 1e-12);
}

TEST_CASE("rfft2 single cosine along width concentrates in one bin") {
  const int64_t h = 4, w = 16;
  Tensor x({1, 1, h, w});
  for (int64_t m = 0; m < h; ++m)
    for (int64_t n = 0; n < w; ++n)
      x.data()[static_cast<size_t>(m * w + n)] = std::cos(2.0 * M_PI * 3.0 * static_cast<double>(n) / static_cast<double>(w));
  Tensor f = rfft2(x);
  const int64_t wf = w / 2 + 1;
  double total = 0.0, at_bin = 0.0;
  for (int64_t y = 0; y < h; ++y)
    for (int64_t i = 0; i < wf; ++i) {
      const double re = f.data()[static_cast<size_t>((y * wf + i) * 2)];
      const double im = f.data()[static_cast<size_t>((y * wf + i) * 2 + 1)];
      const double e = re * re + im * im;
      total += e;
      if (y == 0 && i == 3) at_bin = e;
    }
  CHECK(at_bin == doctest::Approx(total).epsilon(1e-10));
  CHECK(at_bin == doctest::Approx(std::pow(static_cast<double>(h * w) / 2.0, 2.0)).epsilon(1e-10));
}

TEST_CASE("rfft2 matches the naive DFT oracle, power-of-two and not") {
  Rng rng(2024);
  for (auto [h, w] : {std::pair<int64_t, int64_t>{4, 4}, {3, 6}, {5, 7}, {8, 12}, {1, 5}}) {
    Tensor x = random_tensor({1, 2, h, w}, rng);
    Tensor f = rfft2(x);
    const int64_t wf = w / 2 + 1;
    for (int64_t c = 0; c < 2; ++c) {
      auto ref = naive_dft2(x.ptr() + c * h * w, h, w);
      for (int64_t k = 0; k < h; ++k)
        for (int64_t l = 0; l < wf; ++l) {
          const double re = f.data()[static_cast<size_t>(((c * h + k) * wf + l) * 2)];
          const double im = f.data()[static_cast<size_t>(((c * h + k) * wf + l) * 2 + 1)];
          CHECK(std::abs(re - ref[static_cast<size_t>(k * w + l)].real()) < 1e-9);
          CHECK(std::abs(im - ref[static_cast<size_t>(k * w + l)].imag()) < 1e-9);
        }
    }
  }
}

TEST_CASE("rfft2 satisfies Parseval over the mirrored spectrum") {
  Rng rng(777);
  for (auto [h, w] : {std::pair<int64_t, int64_t>{6, 8}, {5, 7}, {4, 4}}) {
    Tensor x = random_tensor({1, 1, h, w}, rng);
    Tensor f = rfft2(x);
    double sum_x2 = 0.0;
    for (double v : x.data()) sum_x2 += v * v;
    const int64_t wf = w / 2 + 1;
    double sum_f2 = 0.0;
    for (int64_t k = 0; k < h; ++k)
      for (int64_t l = 0; l < wf; ++l) {
        const double re = f.data()[static_cast<size_t>((k * wf + l) * 2)];
        const double im = f.data()[static_cast<size_t>((k * wf + l) * 2 + 1)];
        // Columns dropped by the half-spectrum have conjugate mirrors except
        // l = 0 and (even width) l = w/2.
        const double weight = (l == 0 || (w % 2 == 0 && l == w / 2)) ? 1.0 : 2.0;
        sum_f2 += weight * (re * re + im * im);
      }
    const double rhs = sum_f2 / static_cast<double>(h * w);
    CHECK(std::abs(sum_x2 - rhs) / sum_x2 < 1e-9);
  }
}

TEST_CASE("rfft2 gradient matches finite differences") {
  Rng rng(31337);
  auto weighted = [&](const Tensor& y, uint64_t seed) {
    Rng krng(seed);
    Tensor k(y.shape());
    for (double& v : k.data()) v = krng.uniform(-1.0, 1.0);
    return reduce_sum(mul(y, k));
  };
  {
    Tensor x = random_tensor({1, 1, 4, 6}, rng);
    std::vector<Tensor> leaves{x};
    Rng prng(1);
    CHECK(gradcheck::max_rel_error([&] { return weighted(rfft2(x), 5); }, leaves, 100, 1e-5,
                                   prng) < 1e-5);
  }
  {
    Tensor x = random_tensor({1, 1, 5, 7}, rng);  // Bluestein path
    std::vector<Tensor> leaves{x};
    Rng prng(2);
    CHECK(gradcheck::max_rel_error([&] { return weighted(rfft2(x), 6); }, leaves, 100, 1e-5,
                                   prng) < 1e-5);
  }
  {
    // L1-on-spectrum shape, as the loss uses it.
    Tensor x = random_tensor({1, 1, 4, 6}, rng);
    Tensor tgt = random_tensor({1, 1, 4, 6}, rng);
    std::vector<Tensor> leaves{x};
    Rng prng(3);
    CHECK(gradcheck::max_rel_error([&] { return reduce_mean(abs(sub(rfft2(x), rfft2(tgt)))); },
                                   leaves, 100, 1e-5, prng) < 1e-5);
  }
}
