#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "senh/tensor.hpp"

namespace senh {

// Evaluation metrics over images scaled to [0,1]. Tensors may be [C,H,W] or
// [B,C,H,W].

// 10*log10(1/MSE); +infinity when the images are identical.
double psnr(const Tensor& a, const Tensor& b);

// Mean structural similarity, 11x11 Gaussian window (sigma 1.5), valid
// positions only, per channel then averaged. Requires min(H,W) >= 11.
double ssim(const Tensor& a, const Tensor& b);

struct GrayImage {
  int64_t height = 0;
  int64_t width = 0;
  std::vector<uint8_t> pixels;  // row-major
};

// Per-pixel mean absolute channel error e (clamped to [0,1]) rendered as
// round(255*(1-e)): identical inputs give a white map, larger errors darken.
GrayImage error_map(const Tensor& pred, const Tensor& gt);

// "inf" for infinite PSNR, else fixed-point dB; plain numbers for CSV cells.
std::string psnr_csv(double v);
// Console convention pairing the two metrics, e.g. "34.12/0.953" or
// "+∞/1.000" for ground truth against itself.
std::string format_metric_pair(double psnr_db, double ssim_v);

}  // namespace senh
