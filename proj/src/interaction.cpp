#include "senh/interaction.hpp"

#include <stdexcept>
#include <string>

#include "senh/ops.hpp"

namespace senh {

namespace {

void fail_pyramid(const std::string& why) {
  throw std::invalid_argument("feature_pyramid: " + why);
}

}  // namespace

void validate(const FeaturePyramid& pyr) {
  for (int s = 0; s < 3; ++s) {
    const Tensor& l = pyr.left[static_cast<size_t>(s)];
    const Tensor& r = pyr.right[static_cast<size_t>(s)];
    if (!l.defined() || !r.defined()) fail_pyramid("undefined tensor at scale " + std::to_string(s + 1));
    if (l.rank() != 4 || r.rank() != 4)
      fail_pyramid("scale " + std::to_string(s + 1) + " must be rank 4");
    if (l.shape() != r.shape())
      fail_pyramid("views disagree at scale " + std::to_string(s + 1) + ": left " +
                   shape_str(l.shape()) + " vs right " + shape_str(r.shape()));
  }
  for (int s = 1; s < 3; ++s) {
    const Tensor& prev = pyr.left[static_cast<size_t>(s - 1)];
    const Tensor& cur = pyr.left[static_cast<size_t>(s)];
    if (cur.extent(0) != prev.extent(0)) fail_pyramid("batch size changes across scales");
    if (cur.extent(1) != prev.extent(1) * 2)
      fail_pyramid("scale " + std::to_string(s + 1) + " must double channels: " +
                   shape_str(prev.shape()) + " then " + shape_str(cur.shape()));
    if (cur.extent(2) != prev.extent(2) / 2 || cur.extent(3) != prev.extent(3) / 2)
      fail_pyramid("scale " + std::to_string(s + 1) + " must floor-halve spatial extents: " +
                   shape_str(prev.shape()) + " then " + shape_str(cur.shape()));
  }
}

CrossViewParams make_cross_view(Rng& rng, int64_t channels) {
  CrossViewParams p;
  p.proj = make_linear(rng, channels, channels);
  p.value = make_linear(rng, channels, channels);
  p.fuse = make_linear(rng, 2 * channels, channels, /*zero_weights=*/true);
  return p;
}

InteractionParams make_interaction(Rng& rng, const InteractionConfig& cfg) {
  if (cfg.base_channels < 1)
    throw std::invalid_argument("interaction: base_channels must be >= 1");
  InteractionParams p;
  p.softmax_attention = cfg.softmax_attention;
  if (!cfg.no_cross_view) {
    std::array<CrossViewParams, 3> cv;
    for (int s = 0; s < 3; ++s)
      cv[static_cast<size_t>(s)] = make_cross_view(rng, cfg.base_channels << s);
    p.cross_view = std::move(cv);
  }
  if (!cfg.no_cross_scale) {
    CrossScaleParams cs;
    const int64_t total = 7 * cfg.base_channels;
    for (int s = 0; s < 3; ++s) {
      const int64_t c = cfg.base_channels << s;
      cs.reduce[static_cast<size_t>(s)] = make_linear(rng, total, c, /*zero_weights=*/true);
      cs.block[static_cast<size_t>(s)] =
          make_block(rng, BlockConfig{.channels = c,
                                      .kernel = cfg.kernel,
                                      .expansion = cfg.expansion,
                                      .ca_reduction = cfg.ca_reduction,
                                      .no_spatial = cfg.no_spatial,
                                      .no_channel = cfg.no_channel});
    }
    p.cross_scale = std::move(cs);
  }
  return p;
}

void visit_params(CrossViewParams& p, const std::string& prefix, const ParamVisitor& fn) {
  visit_params(p.proj, prefix + ".proj", fn);
  visit_params(p.value, prefix + ".value", fn);
  visit_params(p.fuse, prefix + ".fuse", fn);
}

void visit_params(InteractionParams& p, const std::string& prefix, const ParamVisitor& fn) {
  if (p.cross_view)
    for (int s = 0; s < 3; ++s)
      visit_params((*p.cross_view)[static_cast<size_t>(s)],
                   prefix + ".cv" + std::to_string(s + 1), fn);
  if (p.cross_scale)
    for (int s = 0; s < 3; ++s) {
      visit_params(p.cross_scale->reduce[static_cast<size_t>(s)],
                   prefix + ".cs.reduce" + std::to_string(s + 1), fn);
      visit_params(p.cross_scale->block[static_cast<size_t>(s)],
                   prefix + ".cs.block" + std::to_string(s + 1), fn);
    }
}

CrossViewResult cross_view_forward(const Tensor& left, const Tensor& right,
                                   const CrossViewParams& p, bool softmax_attention) {
  if (left.rank() != 4 || left.shape() != right.shape())
    throw std::invalid_argument("cross_view: views must share a rank-4 shape, got " +
                                shape_str(left.shape()) + " vs " + shape_str(right.shape()));
  Tensor lq = apply(left, p.proj);
  Tensor rk = apply(right, p.proj);
  Tensor lv = apply(left, p.value);
  Tensor rv = apply(right, p.value);

  // Rows attend only within themselves: batch the product over (B, H).
  Tensor vol = matmul_batched(permute(lq, {0, 2, 3, 1}), permute(rk, {0, 2, 1, 3}));
  Tensor vol_t = permute(vol, {0, 1, 3, 2});
  Tensor attn_l = softmax_attention ? softmax_lastdim(vol) : vol;
  Tensor attn_r = softmax_attention ? softmax_lastdim(vol_t) : vol_t;
  Tensor to_left = permute(matmul_batched(attn_l, permute(rv, {0, 2, 3, 1})), {0, 3, 1, 2});
  Tensor to_right = permute(matmul_batched(attn_r, permute(lv, {0, 2, 3, 1})), {0, 3, 1, 2});

  CrossViewResult out;
  out.left = add(left, apply(concat_channels({left, to_left}), p.fuse));
  out.right = add(right, apply(concat_channels({right, to_right}), p.fuse));
  out.volume = vol;
  return out;
}

std::array<Tensor, 3> cross_scale_forward(const std::array<Tensor, 3>& f,
                                          const CrossScaleParams& p) {
  std::array<Tensor, 3> out;
  for (int s = 0; s < 3; ++s) {
    const Tensor& target = f[static_cast<size_t>(s)];
    const int64_t h = target.extent(2), w = target.extent(3);
    std::vector<Tensor> parts;
    parts.reserve(3);
    for (int j = 0; j < 3; ++j)
      parts.push_back(resize_bilinear(f[static_cast<size_t>(j)], h, w));
    Tensor y = apply(concat_channels(parts), p.reduce[static_cast<size_t>(s)]);
    y = block_forward(y, p.block[static_cast<size_t>(s)]);
    out[static_cast<size_t>(s)] = add(target, y);
  }
  return out;
}

FeaturePyramid interaction_forward(const FeaturePyramid& pyr, const InteractionParams& p) {
  validate(pyr);
  FeaturePyramid cur = pyr;
  if (p.cross_view) {
    for (int s = 0; s < 3; ++s) {
      CrossViewResult r =
          cross_view_forward(cur.left[static_cast<size_t>(s)], cur.right[static_cast<size_t>(s)],
                             (*p.cross_view)[static_cast<size_t>(s)], p.softmax_attention);
      cur.left[static_cast<size_t>(s)] = r.left;
      cur.right[static_cast<size_t>(s)] = r.right;
    }
  }
  if (p.cross_scale) {
    cur.left = cross_scale_forward(cur.left, *p.cross_scale);
    cur.right = cross_scale_forward(cur.right, *p.cross_scale);
  }
  return cur;
}

}  // namespace senh
