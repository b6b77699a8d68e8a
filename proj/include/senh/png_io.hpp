#pragma once

#include <string>

#include "senh/metrics.hpp"
#include "senh/tensor.hpp"

namespace senh {

// Reads any PNG as 8-bit RGB (palette/gray/alpha inputs are converted) into a
// [3,H,W] tensor with values v/255 in [0,1].
Tensor load_png_rgb(const std::string& path);

// Writes a [3,H,W] (or [1,3,H,W]) tensor as 8-bit RGB. Values are clamped to
// [0,1] and quantized with round-half-up, so a load of the written file
// differs from the original by at most 1/510 per sample.
void save_png_rgb(const std::string& path, const Tensor& img);

// Writes an 8-bit grayscale image (used for error maps).
void save_png_gray(const std::string& path, const GrayImage& img);

}  // namespace senh
