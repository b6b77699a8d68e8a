#include <complex>

#include "senh/fft.hpp"
#include "src/ops_common.hpp"

namespace senh {

using detail::attach;
using detail::require_rank4;

// Real 2D FFT over the trailing axes. Rows are transformed first; only the
// kept half-spectrum columns (Hermitian symmetry of a real signal) are then
// transformed along the height axis.
Tensor rfft2(const Tensor& x) {
  require_rank4("rfft2", x, "x");
  const int64_t b = x.extent(0), c = x.extent(1), h = x.extent(2), w = x.extent(3);
  const int64_t wf = w / 2 + 1;
  Tensor out({b, c, h, wf, 2});
  const double* px = x.ptr();
  double* po = out.ptr();
  parallel_for(b * c, [&](int64_t begin, int64_t end) {
    std::vector<std::complex<double>> row(static_cast<size_t>(w));
    std::vector<std::complex<double>> col(static_cast<size_t>(h));
    std::vector<std::complex<double>> half(static_cast<size_t>(h * wf));
    for (int64_t bc = begin; bc < end; ++bc) {
      const double* plane = px + bc * h * w;
      for (int64_t y = 0; y < h; ++y) {
        for (int64_t i = 0; i < w; ++i) row[static_cast<size_t>(i)] = plane[y * w + i];
        detail::fft(row, false);
        for (int64_t i = 0; i < wf; ++i)
          half[static_cast<size_t>(y * wf + i)] = row[static_cast<size_t>(i)];
      }
      double* op = po + bc * h * wf * 2;
      for (int64_t i = 0; i < wf; ++i) {
        for (int64_t y = 0; y < h; ++y) col[static_cast<size_t>(y)] = half[static_cast<size_t>(y * wf + i)];
        detail::fft(col, false);
        for (int64_t y = 0; y < h; ++y) {
          op[(y * wf + i) * 2] = col[static_cast<size_t>(y)].real();
          op[(y * wf + i) * 2 + 1] = col[static_cast<size_t>(y)].imag();
        }
      }
    }
  });
  attach("rfft2", out, {&x},
         [b, c, h, w, wf](const Tensor& g, const std::vector<char>&) -> std::vector<Tensor> {
           // Adjoint of the linear map: real part of the unnormalized inverse
           // DFT of the gradient, zero-padded over the dropped columns.
           Tensor gx({b, c, h, w});
           const double* pg = g.ptr();
           double* p = gx.ptr();
           parallel_for(b * c, [&](int64_t begin, int64_t end) {
             std::vector<std::complex<double>> row(static_cast<size_t>(w));
             std::vector<std::complex<double>> col(static_cast<size_t>(h));
             std::vector<std::complex<double>> full(static_cast<size_t>(h * w));
             for (int64_t bc = begin; bc < end; ++bc) {
               const double* gp = pg + bc * h * wf * 2;
               for (int64_t i = 0; i < wf; ++i) {
                 for (int64_t y = 0; y < h; ++y)
                   col[static_cast<size_t>(y)] =
                       std::complex<double>(gp[(y * wf + i) * 2], gp[(y * wf + i) * 2 + 1]);
                 detail::fft(col, true);
                 for (int64_t y = 0; y < h; ++y) full[static_cast<size_t>(y * w + i)] = col[static_cast<size_t>(y)];
               }
               double* xp = p + bc * h * w;
               for (int64_t y = 0; y < h; ++y) {
                 for (int64_t i = 0; i < w; ++i)
                   row[static_cast<size_t>(i)] =
                       i < wf ? full[static_cast<size_t>(y * w + i)] : std::complex<double>(0.0, 0.0);
                 detail::fft(row, true);
                 for (int64_t i = 0; i < w; ++i) xp[y * w + i] = row[static_cast<size_t>(i)].real();
               }
             }
           });
           return {gx};
         });
  return out;
}

}  // namespace senh
