#include "senh/loss.hpp"

#include <cmath>
#include <stdexcept>

#include "senh/ops.hpp"

namespace senh {

namespace {

void require_pair(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rank() != 4 || a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shapes must match and be rank 4, got " +
                                shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

Tensor fre_term(const Tensor& pred, const Tensor& gt) {
  Tensor diff = sub(rfft2(pred), rfft2(gt));  // [B,C,H,Wf,2]
  const double bins = static_cast<double>(diff.extent(0) * diff.extent(1) * diff.extent(2) *
                                          diff.extent(3));
  return scale(reduce_sum(abs(diff)), 1.0 / bins);
}

Tensor tv_term(const Tensor& x) {
  return add(reduce_mean(abs(diff_horizontal(x))), reduce_mean(abs(diff_vertical(x))));
}

Tensor gaussian_window() {
  const int k = 11;
  const double sigma = 1.5;
  Tensor w({1, 1, k, k});
  double sum = 0.0;
  for (int y = 0; y < k; ++y)
    for (int x = 0; x < k; ++x) {
      const double dy = y - (k - 1) / 2.0, dx = x - (k - 1) / 2.0;
      const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      w.data()[static_cast<size_t>(y * k + x)] = v;
      sum += v;
    }
  for (double& v : w.data()) v /= sum;
  return w;
}

}  // namespace

ReconLoss recon_loss_from_string(const std::string& s) {
  if (s == "fre") return ReconLoss::frequency;
  if (s == "l1") return ReconLoss::l1;
  if (s == "l2") return ReconLoss::l2;
  if (s == "ssim") return ReconLoss::ssim;
  throw std::invalid_argument("loss: unknown kind '" + s + "' (expected fre, l1, l2 or ssim)");
}

std::string to_string(ReconLoss kind) {
  switch (kind) {
    case ReconLoss::frequency: return "fre";
    case ReconLoss::l1: return "l1";
    case ReconLoss::l2: return "l2";
    case ReconLoss::ssim: return "ssim";
  }
  return "?";
}

Tensor loss_fre(const Tensor& pred_l, const Tensor& pred_r, const Tensor& gt_l,
                const Tensor& gt_r) {
  require_pair("loss_fre", pred_l, gt_l);
  require_pair("loss_fre", pred_r, gt_r);
  require_pair("loss_fre", pred_l, pred_r);
  return add(fre_term(pred_l, gt_l), fre_term(pred_r, gt_r));
}

Tensor loss_tv(const Tensor& pred_l, const Tensor& pred_r) {
  require_pair("loss_tv", pred_l, pred_r);
  if (pred_l.extent(2) < 2 || pred_l.extent(3) < 2)
    throw std::invalid_argument("loss_tv: spatial extents must be >= 2, got " +
                                shape_str(pred_l.shape()));
  return add(tv_term(pred_l), tv_term(pred_r));
}

Tensor ssim_tensor(const Tensor& a, const Tensor& b) {
  require_pair("ssim", a, b);
  if (a.extent(2) < 11 || a.extent(3) < 11)
    throw std::invalid_argument("ssim: spatial extents must be >= 11, got " +
                                shape_str(a.shape()));
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  static const Tensor window = gaussian_window();
  Tensor bias({1}, 0.0);
  auto smooth = [&](const Tensor& x) { return conv2d(x, window, bias, 1, 0); };

  const int64_t channels = a.extent(1);
  Tensor acc;
  for (int64_t c = 0; c < channels; ++c) {
    Tensor xa = slice_channels(a, c, c + 1);
    Tensor xb = slice_channels(b, c, c + 1);
    Tensor mu_a = smooth(xa);
    Tensor mu_b = smooth(xb);
    Tensor var_a = sub(smooth(mul(xa, xa)), mul(mu_a, mu_a));
    Tensor var_b = sub(smooth(mul(xb, xb)), mul(mu_b, mu_b));
    Tensor cov = sub(smooth(mul(xa, xb)), mul(mu_a, mu_b));
    Tensor num = mul(add_scalar(scale(mul(mu_a, mu_b), 2.0), c1),
                     add_scalar(scale(cov, 2.0), c2));
    Tensor den = mul(add_scalar(add(mul(mu_a, mu_a), mul(mu_b, mu_b)), c1),
                     add_scalar(add(var_a, var_b), c2));
    Tensor mean_c = reduce_mean(div(num, den));
    acc = acc.defined() ? add(acc, mean_c) : mean_c;
  }
  return scale(acc, 1.0 / static_cast<double>(channels));
}

Tensor alt_loss(ReconLoss kind, const Tensor& pred_l, const Tensor& pred_r, const Tensor& gt_l,
                const Tensor& gt_r) {
  require_pair("alt_loss", pred_l, gt_l);
  require_pair("alt_loss", pred_r, gt_r);
  switch (kind) {
    case ReconLoss::l1: {
      Tensor both = add(reduce_mean(abs(sub(pred_l, gt_l))), reduce_mean(abs(sub(pred_r, gt_r))));
      return scale(both, 0.5);
    }
    case ReconLoss::l2: {
      Tensor dl = sub(pred_l, gt_l);
      Tensor dr = sub(pred_r, gt_r);
      return scale(add(reduce_mean(mul(dl, dl)), reduce_mean(mul(dr, dr))), 0.5);
    }
    case ReconLoss::ssim: {
      Tensor sim = scale(add(ssim_tensor(pred_l, gt_l), ssim_tensor(pred_r, gt_r)), 0.5);
      return add_scalar(scale(sim, -1.0), 1.0);
    }
    case ReconLoss::frequency:
      return loss_fre(pred_l, pred_r, gt_l, gt_r);
  }
  throw std::invalid_argument("loss: unknown kind");
}

TotalLoss total_loss(const Tensor& pred_l, const Tensor& pred_r, const Tensor& gt_l,
                     const Tensor& gt_r, double lambda, ReconLoss kind) {
  if (lambda < 0.0) throw std::invalid_argument("loss: lambda must be >= 0");
  Tensor rec = alt_loss(kind, pred_l, pred_r, gt_l, gt_r);
  Tensor tv = loss_tv(pred_l, pred_r);
  TotalLoss out;
  out.value = add(rec, scale(tv, lambda));
  out.report.l_rec = rec.value();
  out.report.l_tv = tv.value();
  out.report.total = out.value.value();
  out.report.lambda = lambda;
  return out;
}

}  // namespace senh
