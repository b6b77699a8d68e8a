#pragma once

#include <string>
#include <utility>

#include "senh/tensor.hpp"

namespace senh {

// Training objective over a stereo pair: a frequency-domain reconstruction
// term plus a weighted total-variation smoothness term. Pixel-space
// alternatives (L1 / L2 / structural-similarity) can replace the
// reconstruction term for ablation runs.

struct LossReport {
  double l_rec = 0.0;   // reconstruction term (frequency-domain by default)
  double l_tv = 0.0;    // total-variation term
  double total = 0.0;   // l_rec + lambda * l_tv
  double lambda = 0.1;
};

enum class ReconLoss { frequency, l1, l2, ssim };

// Parses "fre" | "l1" | "l2" | "ssim"; throws std::invalid_argument otherwise.
ReconLoss recon_loss_from_string(const std::string& s);
std::string to_string(ReconLoss kind);

// Mean L1 distance between the spectra of predictions and targets, averaged
// over batch, channels and spectrum bins (real and imaginary parts of one bin
// count once), summed over the two views.
Tensor loss_fre(const Tensor& pred_l, const Tensor& pred_r, const Tensor& gt_l,
                const Tensor& gt_r);

// Anisotropic total variation: mean absolute horizontal plus vertical forward
// differences, summed over the two views. Requires H,W >= 2.
Tensor loss_tv(const Tensor& pred_l, const Tensor& pred_r);

// Pixel-space reconstruction alternatives, averaged over the two views.
Tensor alt_loss(ReconLoss kind, const Tensor& pred_l, const Tensor& pred_r, const Tensor& gt_l,
                const Tensor& gt_r);

// Differentiable mean structural similarity (11x11 Gaussian window, sigma 1.5,
// K1=0.01, K2=0.03, valid positions only, channels averaged). Inputs
// [B,C,H,W] with min(H,W) >= 11.
Tensor ssim_tensor(const Tensor& a, const Tensor& b);

struct TotalLoss {
  Tensor value;  // scalar, differentiable
  LossReport report;
};

TotalLoss total_loss(const Tensor& pred_l, const Tensor& pred_r, const Tensor& gt_l,
                     const Tensor& gt_r, double lambda = 0.1,
                     ReconLoss kind = ReconLoss::frequency);

}  // namespace senh
