#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "senh/rng.hpp"
#include "senh/tensor.hpp"

namespace senh {

// Named traversal over parameter tensors. Visit order is the canonical
// registration order used by checkpoints and the optimizer.
using ParamVisitor = std::function<void(const std::string& name, Tensor& t)>;

// -- primitive parameter bundles ----------------------------------------------

struct LinearParams {  // 1x1 channel map: w [Cout,Cin], b [Cout]
  Tensor w, b;
};

struct ConvParams {  // kxk conv: w [Cout,Cin,k,k], b [Cout]
  Tensor w, b;
  int stride = 1;
  int pad = 0;
};

struct DwConvParams {  // depthwise kxk: w [C,1,k,k], b [C]
  Tensor w, b;
  int pad = 0;
};

struct LayerNormParams {  // per-channel affine: gamma/beta [C]
  Tensor gamma, beta;
};

// Weights draw from trunc-normal(std 0.02, clipped at 2 std); biases are zero.
// zero_weights makes the whole bundle zero, used for the closing layer of every
// residual branch so a freshly built module starts as the identity map.
LinearParams make_linear(Rng& rng, int64_t cin, int64_t cout, bool zero_weights = false);
ConvParams make_conv(Rng& rng, int64_t cin, int64_t cout, int k, int stride,
                     bool zero_weights = false);
DwConvParams make_dwconv(Rng& rng, int64_t c, int k);
LayerNormParams make_layer_norm(int64_t c);  // gamma ones, beta zeros

void visit_params(LinearParams& p, const std::string& prefix, const ParamVisitor& fn);
void visit_params(ConvParams& p, const std::string& prefix, const ParamVisitor& fn);
void visit_params(DwConvParams& p, const std::string& prefix, const ParamVisitor& fn);
void visit_params(LayerNormParams& p, const std::string& prefix, const ParamVisitor& fn);

Tensor apply(const Tensor& x, const LinearParams& p);
Tensor apply(const Tensor& x, const ConvParams& p);
Tensor apply(const Tensor& x, const DwConvParams& p);
Tensor apply(const Tensor& x, const LayerNormParams& p);

// -- mixing block -------------------------------------------------------------
// The block couples a spatial mixer (norm -> channel map -> large-kernel
// depthwise conv -> channel map, plus residual) with a channel mixer
// (norm -> expand C->eC -> channel-attention gate -> contract eC->C, plus
// residual). Either half can be omitted for ablations.

struct ChannelAttentionParams {  // squeeze-excitation gate over eC channels
  LinearParams fc1;              // eC -> eC/r
  LinearParams fc2;              // eC/r -> eC
};

struct SpatialMixerParams {
  LayerNormParams ln;
  LinearParams mlp_in;   // C -> C
  DwConvParams dw;       // kxk depthwise
  LinearParams mlp_out;  // C -> C, zero-init
};

struct ChannelMixerParams {
  LayerNormParams ln;
  LinearParams expand;  // C -> eC
  ChannelAttentionParams ca;
  LinearParams contract;  // eC -> C, zero-init
};

struct BlockConfig {
  int64_t channels = 32;
  int kernel = 7;      // odd
  int expansion = 2;   // >= 1
  int ca_reduction = 4;  // divides expansion*channels
  bool no_spatial = false;
  bool no_channel = false;
};

struct BlockParams {
  std::optional<SpatialMixerParams> spatial;
  std::optional<ChannelMixerParams> channel;
  int kernel = 7;
};

void validate(const BlockConfig& cfg);
BlockParams make_block(Rng& rng, const BlockConfig& cfg);
void visit_params(BlockParams& p, const std::string& prefix, const ParamVisitor& fn);

// y = mlp_out(dwconv(mlp_in(ln(x)))) + x
Tensor spatial_mixer_forward(const Tensor& x, const SpatialMixerParams& p);
// s = sigmoid(fc2(gelu(fc1(avg_pool(x))))); y = x * s per channel
Tensor channel_attention(const Tensor& x, const ChannelAttentionParams& p);
// y = contract(ca(expand(ln(x)))) + x
Tensor channel_mixer_forward(const Tensor& x, const ChannelMixerParams& p);
// Spatial mixer then channel mixer; omitted halves pass through.
Tensor block_forward(const Tensor& x, const BlockParams& p);

}  // namespace senh
