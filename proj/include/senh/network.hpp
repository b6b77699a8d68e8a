#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "senh/blocks.hpp"
#include "senh/interaction.hpp"
#include "senh/tensor.hpp"

namespace senh {

// Twin-branch enhancement network. One copy of the weights serves both views:
// a shallow conv lifts each view to C channels, a three-scale encoder of
// mixing blocks produces a feature pyramid, the interaction stage couples the
// views and scales, and a mirrored decoder with skip fusions reconstructs a
// residual that is added onto the input image.

struct ModelConfig {
  int64_t base_channels = 32;
  std::array<int, 5> depths = {4, 4, 2, 2, 4};  // enc1, enc2, mid, dec2, dec1
  int kernel = 7;
  int expansion = 2;
  int ca_reduction = 4;
  bool no_cross_view = false;
  bool no_cross_scale = false;
  bool no_spatial = false;
  bool no_channel = false;
  bool softmax_attention = true;
  uint64_t seed = 0;

  bool operator==(const ModelConfig&) const = default;
};

void validate(const ModelConfig& cfg);

// Throws std::invalid_argument naming the first field where the two configs
// disagree (used when resuming training against an existing checkpoint).
void require_same(const ModelConfig& expected, const ModelConfig& actual);

struct Model {
  ModelConfig cfg;
  ConvParams shallow;             // 3 -> C, 3x3
  std::vector<BlockParams> enc1;  // depths[0] blocks @ C
  ConvParams down1;               // C -> 2C, 3x3 stride 2
  std::vector<BlockParams> enc2;  // depths[1] blocks @ 2C
  ConvParams down2;               // 2C -> 4C, 3x3 stride 2
  std::vector<BlockParams> mid;   // depths[2] blocks @ 4C
  InteractionParams interact;
  LinearParams up2;               // 4C -> 2C after bilinear x2
  LinearParams fuse2;             // concat(2C, 2C) -> 2C
  std::vector<BlockParams> dec2;  // depths[3] blocks @ 2C
  LinearParams up1;               // 2C -> C
  LinearParams fuse1;             // concat(C, C) -> C
  std::vector<BlockParams> dec1;  // depths[4] blocks @ C
  ConvParams recon;               // C -> 3, 3x3, zero-init
};

Model build_model(const ModelConfig& cfg);

// Canonical parameter traversal; registration order defines checkpoint and
// optimizer array order.
void visit_params(Model& m, const ParamVisitor& fn);
int64_t param_count(Model& m);
std::vector<std::pair<std::string, Tensor*>> named_params(Model& m);

struct ViewPair {
  Tensor left, right;
};

// Enhance both views. Spatial extents must be divisible by 4; outputs are not
// clamped (clamping belongs to image export).
ViewPair model_forward(const Model& m, const Tensor& left, const Tensor& right);

}  // namespace senh
