#pragma once

#include <vector>

#include "senh/tensor.hpp"

namespace senh {

// Differentiable tensor operators. Each op validates its input shapes (throws
// std::invalid_argument with both shapes in the message), computes the result,
// and registers a backward rule on the active tape when any input takes part
// in differentiation. Ops never mutate their inputs.

// -- elementwise ------------------------------------------------------------
// Binary ops accept equal shapes, or a single-element b broadcast over a.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor sigmoid(const Tensor& a);
Tensor gelu(const Tensor& a);  // exact erf form
Tensor abs(const Tensor& a);   // subgradient 0 at 0

// -- reductions --------------------------------------------------------------
Tensor reduce_sum(const Tensor& a);   // -> [1]
Tensor reduce_mean(const Tensor& a);  // -> [1]

// -- shape -------------------------------------------------------------------
Tensor permute(const Tensor& a, const std::vector<int>& order);
Tensor concat_channels(const std::vector<Tensor>& xs);            // dim 1 of [B,C,H,W]
Tensor slice_channels(const Tensor& x, int64_t c0, int64_t c1);   // [c0, c1)

// -- neural building blocks ---------------------------------------------------
// Batched matrix product over the two trailing dims: a [B,G,M,K] x b [B,G,K,N]
// -> [B,G,M,N].
Tensor matmul_batched(const Tensor& a, const Tensor& b);

// Cross-correlation conv: x [B,Cin,H,W], w [Cout,Cin,k,k], bias [Cout].
// Output spatial size floor((S + 2*pad - k) / stride) + 1; k must be odd and
// no larger than the padded input.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad);

// Depthwise conv (one filter per channel): x [B,C,H,W], w [C,1,k,k],
// bias [C], stride 1. pad must be the same-size padding (k-1)/2.
Tensor dwconv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int pad);

// Per-pixel channel map (1x1 conv): x [B,Cin,H,W], w [Cout,Cin], bias [Cout].
Tensor linear_channels(const Tensor& x, const Tensor& w, const Tensor& bias);

// Normalizes over the channel axis per (b,h,w) position; gamma/beta [C].
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-6);

// Softmax over the last axis.
Tensor softmax_lastdim(const Tensor& x);

// [B,C,H,W] -> [B,C,1,1]
Tensor global_avg_pool(const Tensor& x);

// Per-channel gate: x [B,C,H,W] * g [B,C,1,1].
Tensor mul_channel_gate(const Tensor& x, const Tensor& g);

// Align-corners-false bilinear resize of [B,C,H,W].
Tensor resize_bilinear(const Tensor& x, int64_t out_h, int64_t out_w);

// Forward differences for total-variation terms.
Tensor diff_horizontal(const Tensor& x);  // [B,C,H,W] -> [B,C,H,W-1]
Tensor diff_vertical(const Tensor& x);    // [B,C,H,W] -> [B,C,H-1,W]

// Real 2D FFT of the trailing two axes: [B,C,H,W] -> [B,C,H,W/2+1,2] with
// (re, im) in the last axis. Unnormalized, any H/W >= 1.
Tensor rfft2(const Tensor& x);

}  // namespace senh
