#include "senh/network.hpp"

#include <stdexcept>

#include "senh/ops.hpp"

namespace senh {

namespace {

BlockConfig block_config(const ModelConfig& cfg, int64_t channels) {
  return BlockConfig{.channels = channels,
                     .kernel = cfg.kernel,
                     .expansion = cfg.expansion,
                     .ca_reduction = cfg.ca_reduction,
                     .no_spatial = cfg.no_spatial,
                     .no_channel = cfg.no_channel};
}

std::vector<BlockParams> make_stage(Rng& rng, const ModelConfig& cfg, int64_t channels,
                                    int count) {
  std::vector<BlockParams> stage;
  stage.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) stage.push_back(make_block(rng, block_config(cfg, channels)));
  return stage;
}

void visit_stage(std::vector<BlockParams>& stage, const std::string& prefix,
                 const ParamVisitor& fn) {
  for (size_t i = 0; i < stage.size(); ++i)
    visit_params(stage[i], prefix + "." + std::to_string(i), fn);
}

}  // namespace

void validate(const ModelConfig& cfg) {
  if (cfg.base_channels < 4)
    throw std::invalid_argument("model: base_channels must be >= 4, got " +
                                std::to_string(cfg.base_channels));
  for (int d : cfg.depths)
    if (d < 1) throw std::invalid_argument("model: every stage depth must be >= 1");
  // The narrowest stage must satisfy the block constraints; wider stages only
  // scale the channel count up by powers of two.
  validate(block_config(cfg, cfg.base_channels));
}

void require_same(const ModelConfig& expected, const ModelConfig& actual) {
  auto fail = [](const std::string& field, const std::string& want, const std::string& got) {
    throw std::invalid_argument("model config mismatch at " + field + ": expected " + want +
                                ", got " + got);
  };
  auto num = [](auto v) { return std::to_string(v); };
  if (expected.base_channels != actual.base_channels)
    fail("base_channels", num(expected.base_channels), num(actual.base_channels));
  for (int i = 0; i < 5; ++i)
    if (expected.depths[static_cast<size_t>(i)] != actual.depths[static_cast<size_t>(i)])
      fail("depths[" + std::to_string(i) + "]", num(expected.depths[static_cast<size_t>(i)]),
           num(actual.depths[static_cast<size_t>(i)]));
  if (expected.kernel != actual.kernel) fail("kernel", num(expected.kernel), num(actual.kernel));
  if (expected.expansion != actual.expansion)
    fail("expansion", num(expected.expansion), num(actual.expansion));
  if (expected.ca_reduction != actual.ca_reduction)
    fail("ca_reduction", num(expected.ca_reduction), num(actual.ca_reduction));
  if (expected.no_cross_view != actual.no_cross_view)
    fail("no_cross_view", num(expected.no_cross_view), num(actual.no_cross_view));
  if (expected.no_cross_scale != actual.no_cross_scale)
    fail("no_cross_scale", num(expected.no_cross_scale), num(actual.no_cross_scale));
  if (expected.no_spatial != actual.no_spatial)
    fail("no_spatial", num(expected.no_spatial), num(actual.no_spatial));
  if (expected.no_channel != actual.no_channel)
    fail("no_channel", num(expected.no_channel), num(actual.no_channel));
  if (expected.softmax_attention != actual.softmax_attention)
    fail("softmax_attention", num(expected.softmax_attention), num(actual.softmax_attention));
  if (expected.seed != actual.seed) fail("seed", num(expected.seed), num(actual.seed));
}

Model build_model(const ModelConfig& cfg) {
  validate(cfg);
  Model m;
  m.cfg = cfg;
  Rng rng = Rng::keyed(cfg.seed, /*stream=*/1, /*index=*/0);
  const int64_t c = cfg.base_channels;
  m.shallow = make_conv(rng, 3, c, 3, 1);
  m.enc1 = make_stage(rng, cfg, c, cfg.depths[0]);
  m.down1 = make_conv(rng, c, 2 * c, 3, 2);
  m.enc2 = make_stage(rng, cfg, 2 * c, cfg.depths[1]);
  m.down2 = make_conv(rng, 2 * c, 4 * c, 3, 2);
  m.mid = make_stage(rng, cfg, 4 * c, cfg.depths[2]);
  m.interact = make_interaction(rng, InteractionConfig{.base_channels = c,
                                                       .kernel = cfg.kernel,
                                                       .expansion = cfg.expansion,
                                                       .ca_reduction = cfg.ca_reduction,
                                                       .no_cross_view = cfg.no_cross_view,
                                                       .no_cross_scale = cfg.no_cross_scale,
                                                       .no_spatial = cfg.no_spatial,
                                                       .no_channel = cfg.no_channel,
                                                       .softmax_attention = cfg.softmax_attention});
  m.up2 = make_linear(rng, 4 * c, 2 * c);
  m.fuse2 = make_linear(rng, 4 * c, 2 * c);
  m.dec2 = make_stage(rng, cfg, 2 * c, cfg.depths[3]);
  m.up1 = make_linear(rng, 2 * c, c);
  m.fuse1 = make_linear(rng, 2 * c, c);
  m.dec1 = make_stage(rng, cfg, c, cfg.depths[4]);
  // Zero-init tail conv: a fresh model reproduces its input exactly through
  // the global residual.
  m.recon = make_conv(rng, c, 3, 3, 1, /*zero_weights=*/true);
  return m;
}

void visit_params(Model& m, const ParamVisitor& fn) {
  visit_params(m.shallow, "shallow", fn);
  visit_stage(m.enc1, "enc1", fn);
  visit_params(m.down1, "down1", fn);
  visit_stage(m.enc2, "enc2", fn);
  visit_params(m.down2, "down2", fn);
  visit_stage(m.mid, "mid", fn);
  visit_params(m.interact, "interact", fn);
  visit_params(m.up2, "up2", fn);
  visit_params(m.fuse2, "fuse2", fn);
  visit_stage(m.dec2, "dec2", fn);
  visit_params(m.up1, "up1", fn);
  visit_params(m.fuse1, "fuse1", fn);
  visit_stage(m.dec1, "dec1", fn);
  visit_params(m.recon, "recon", fn);
}

int64_t param_count(Model& m) {
  int64_t n = 0;
  visit_params(m, [&](const std::string&, Tensor& t) { n += t.numel(); });
  return n;
}

std::vector<std::pair<std::string, Tensor*>> named_params(Model& m) {
  std::vector<std::pair<std::string, Tensor*>> out;
  visit_params(m, [&](const std::string& name, Tensor& t) { out.emplace_back(name, &t); });
  return out;
}

ViewPair model_forward(const Model& m, const Tensor& left, const Tensor& right) {
  if (left.rank() != 4 || right.rank() != 4 || left.shape() != right.shape())
    throw std::invalid_argument("model: views must share a rank-4 shape, got " +
                                shape_str(left.shape()) + " vs " + shape_str(right.shape()));
  if (left.extent(1) != 3)
    throw std::invalid_argument("model: expected 3-channel inputs, got " +
                                shape_str(left.shape()));
  const int64_t h = left.extent(2), w = left.extent(3);
  if (h % 4 != 0 || w % 4 != 0)
    throw std::invalid_argument(
        "model: spatial extents must be divisible by 4, got " + shape_str(left.shape()) +
        "; reflect-pad the inputs to a multiple of 4 and crop the result back");

  auto run_stage = [](Tensor f, const std::vector<BlockParams>& stage) {
    for (const BlockParams& b : stage) f = block_forward(f, b);
    return f;
  };
  auto encode = [&](const Tensor& img) {
    std::array<Tensor, 3> scales;
    Tensor f = apply(img, m.shallow);
    scales[0] = run_stage(f, m.enc1);
    scales[1] = run_stage(apply(scales[0], m.down1), m.enc2);
    scales[2] = run_stage(apply(scales[1], m.down2), m.mid);
    return scales;
  };

  FeaturePyramid pyr;
  pyr.left = encode(left);
  pyr.right = encode(right);
  pyr = interaction_forward(pyr, m.interact);

  auto decode = [&](const std::array<Tensor, 3>& scales, const Tensor& img) {
    Tensor g = apply(resize_bilinear(scales[2], h / 2, w / 2), m.up2);
    g = apply(concat_channels({g, scales[1]}), m.fuse2);
    g = run_stage(g, m.dec2);
    g = apply(resize_bilinear(g, h, w), m.up1);
    g = apply(concat_channels({g, scales[0]}), m.fuse1);
    g = run_stage(g, m.dec1);
    return add(apply(g, m.recon), img);
  };

  ViewPair out;
  out.left = decode(pyr.left, left);
  out.right = decode(pyr.right, right);
  return out;
}

}  // namespace senh
