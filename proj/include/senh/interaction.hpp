#pragma once

#include <array>
#include <optional>

#include "senh/blocks.hpp"
#include "senh/tensor.hpp"

namespace senh {

// Stereo interaction stage: per-scale cross-view attention along image rows,
// followed by cross-scale fusion within each view. All weights are shared
// between the two views, which makes the stage exactly symmetric under a
// left/right swap.

struct FeaturePyramid {
  // Scale s halves the spatial extents of scale s-1 and doubles its channels.
  std::array<Tensor, 3> left, right;
};

// Throws std::invalid_argument when the two views disagree, the spatial
// extents are not successively floor-halved, or channels are not successively
// doubled.
void validate(const FeaturePyramid& pyr);

struct CrossViewParams {
  LinearParams proj;   // C -> C, shared between query and key roles
  LinearParams value;  // C -> C, shared between the views
  LinearParams fuse;   // 2C -> C, zero-init (residual tail)
};

struct CrossViewResult {
  Tensor left, right;
  // Raw row-wise correlation volume [B,H,W,W]: entry (b,h,i,j) correlates
  // left column i with right column j of row h.
  Tensor volume;
};

struct CrossScaleParams {
  std::array<LinearParams, 3> reduce;  // 7C -> scale channels, zero-init
  std::array<BlockParams, 3> block;
};

struct InteractionConfig {
  int64_t base_channels = 32;
  int kernel = 7;
  int expansion = 2;
  int ca_reduction = 4;
  bool no_cross_view = false;
  bool no_cross_scale = false;
  bool no_spatial = false;   // forwarded to the fusion blocks
  bool no_channel = false;   // forwarded to the fusion blocks
  bool softmax_attention = true;
};

struct InteractionParams {
  std::optional<std::array<CrossViewParams, 3>> cross_view;  // one per scale
  std::optional<CrossScaleParams> cross_scale;
  bool softmax_attention = true;
};

CrossViewParams make_cross_view(Rng& rng, int64_t channels);
InteractionParams make_interaction(Rng& rng, const InteractionConfig& cfg);
void visit_params(CrossViewParams& p, const std::string& prefix, const ParamVisitor& fn);
void visit_params(InteractionParams& p, const std::string& prefix, const ParamVisitor& fn);

// Row-wise cross-view attention. Both views are projected by shared maps;
// each left row attends over the same right row (and vice versa through the
// transposed volume), and the attended features are fused back residually.
CrossViewResult cross_view_forward(const Tensor& left, const Tensor& right,
                                   const CrossViewParams& p, bool softmax_attention = true);

// Cross-scale fusion for one view: every scale is resized to each target
// scale, densely concatenated (7C channels), reduced to the target width,
// mixed by one block, and added back residually.
std::array<Tensor, 3> cross_scale_forward(const std::array<Tensor, 3>& f,
                                          const CrossScaleParams& p);

FeaturePyramid interaction_forward(const FeaturePyramid& pyr, const InteractionParams& p);

}  // namespace senh
