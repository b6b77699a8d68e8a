#include "senh/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "senh/loss.hpp"

namespace senh {

namespace {

Tensor as_batched(const Tensor& t) {
  if (t.rank() == 4) return t;
  if (t.rank() == 3) {
    Shape s{1, t.extent(0), t.extent(1), t.extent(2)};
    return Tensor(std::move(s), std::vector<double>(t.data()));
  }
  throw std::invalid_argument("metrics: expected [C,H,W] or [B,C,H,W], got " +
                              shape_str(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument("metrics: shape mismatch, " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
}

}  // namespace

double psnr(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b);
  double sq = 0.0;
  for (size_t i = 0; i < a.data().size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    sq += d * d;
  }
  const double mse = sq / static_cast<double>(a.numel());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b);
  return ssim_tensor(as_batched(a), as_batched(b)).value();
}

GrayImage error_map(const Tensor& pred, const Tensor& gt) {
  require_same_shape(pred, gt);
  Tensor p = as_batched(pred);
  Tensor g = as_batched(gt);
  if (p.extent(0) != 1)
    throw std::invalid_argument("error_map: expected a single image, got " +
                                shape_str(pred.shape()));
  const int64_t c = p.extent(1), h = p.extent(2), w = p.extent(3);
  GrayImage out;
  out.height = h;
  out.width = w;
  out.pixels.resize(static_cast<size_t>(h * w));
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      double e = 0.0;
      for (int64_t ch = 0; ch < c; ++ch)
        e += std::abs(p.data()[static_cast<size_t>((ch * h + y) * w + x)] -
                      g.data()[static_cast<size_t>((ch * h + y) * w + x)]);
      e /= static_cast<double>(c);
      e = std::min(1.0, std::max(0.0, e));
      out.pixels[static_cast<size_t>(y * w + x)] =
          static_cast<uint8_t>(std::lround(255.0 * (1.0 - e)));
    }
  return out;
}

std::string psnr_csv(double v) {
  if (std::isinf(v)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string format_metric_pair(double psnr_db, double ssim_v) {
  char buf[64];
  if (std::isinf(psnr_db))
    std::snprintf(buf, sizeof(buf), "+∞/%.3f", ssim_v);
  else
    std::snprintf(buf, sizeof(buf), "%.2f/%.3f", psnr_db, ssim_v);
  return buf;
}

}  // namespace senh
