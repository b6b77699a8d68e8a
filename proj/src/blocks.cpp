#include "senh/blocks.hpp"

#include <stdexcept>

#include "senh/ops.hpp"

namespace senh {

namespace {

constexpr double kInitStd = 0.02;

Tensor weight_tensor(Rng& rng, Shape shape, bool zero) {
  Tensor t(std::move(shape));
  if (!zero) {
    for (double& v : t.data()) v = rng.trunc_normal(kInitStd);
  }
  t.set_requires_grad(true);
  return t;
}

Tensor zeros_tensor(Shape shape) {
  Tensor t(std::move(shape));
  t.set_requires_grad(true);
  return t;
}

void require_channels(const char* op, const Tensor& x, int64_t c) {
  if (x.rank() != 4 || x.extent(1) != c)
    throw std::invalid_argument(std::string(op) + ": expected [B," + std::to_string(c) +
                                ",H,W] input, got " + shape_str(x.shape()));
}

}  // namespace

LinearParams make_linear(Rng& rng, int64_t cin, int64_t cout, bool zero_weights) {
  LinearParams p;
  p.w = weight_tensor(rng, {cout, cin}, zero_weights);
  p.b = zeros_tensor({cout});
  return p;
}

ConvParams make_conv(Rng& rng, int64_t cin, int64_t cout, int k, int stride, bool zero_weights) {
  ConvParams p;
  p.w = weight_tensor(rng, {cout, cin, k, k}, zero_weights);
  p.b = zeros_tensor({cout});
  p.stride = stride;
  p.pad = (k - 1) / 2;
  return p;
}

DwConvParams make_dwconv(Rng& rng, int64_t c, int k) {
  DwConvParams p;
  p.w = weight_tensor(rng, {c, 1, k, k}, false);
  p.b = zeros_tensor({c});
  p.pad = (k - 1) / 2;
  return p;
}

LayerNormParams make_layer_norm(int64_t c) {
  LayerNormParams p;
  p.gamma = Tensor({c}, 1.0);
  p.gamma.set_requires_grad(true);
  p.beta = zeros_tensor({c});
  return p;
}

void visit_params(LinearParams& p, const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + ".w", p.w);
  fn(prefix + ".b", p.b);
}

void visit_params(ConvParams& p, const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + ".w", p.w);
  fn(prefix + ".b", p.b);
}

void visit_params(DwConvParams& p, const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + ".w", p.w);
  fn(prefix + ".b", p.b);
}

void visit_params(LayerNormParams& p, const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + ".gamma", p.gamma);
  fn(prefix + ".beta", p.beta);
}

Tensor apply(const Tensor& x, const LinearParams& p) { return linear_channels(x, p.w, p.b); }

Tensor apply(const Tensor& x, const ConvParams& p) {
  return conv2d(x, p.w, p.b, p.stride, p.pad);
}

Tensor apply(const Tensor& x, const DwConvParams& p) { return dwconv2d(x, p.w, p.b, p.pad); }

Tensor apply(const Tensor& x, const LayerNormParams& p) {
  return layer_norm(x, p.gamma, p.beta);
}

void validate(const BlockConfig& cfg) {
  if (cfg.channels < 1) throw std::invalid_argument("block: channels must be >= 1");
  if (cfg.kernel < 1 || cfg.kernel % 2 == 0)
    throw std::invalid_argument("block: kernel must be odd and >= 1, got " +
                                std::to_string(cfg.kernel));
  if (cfg.expansion < 1) throw std::invalid_argument("block: expansion must be >= 1");
  const int64_t ec = cfg.channels * cfg.expansion;
  if (cfg.ca_reduction < 1 || ec % cfg.ca_reduction != 0)
    throw std::invalid_argument("block: ca_reduction must divide expansion*channels (" +
                                std::to_string(ec) + "), got " +
                                std::to_string(cfg.ca_reduction));
}

BlockParams make_block(Rng& rng, const BlockConfig& cfg) {
  validate(cfg);
  BlockParams p;
  p.kernel = cfg.kernel;
  const int64_t c = cfg.channels;
  if (!cfg.no_spatial) {
    SpatialMixerParams s;
    s.ln = make_layer_norm(c);
    s.mlp_in = make_linear(rng, c, c);
    s.dw = make_dwconv(rng, c, cfg.kernel);
    s.mlp_out = make_linear(rng, c, c, /*zero_weights=*/true);
    p.spatial = std::move(s);
  }
  if (!cfg.no_channel) {
    ChannelMixerParams m;
    const int64_t ec = c * cfg.expansion;
    m.ln = make_layer_norm(c);
    m.expand = make_linear(rng, c, ec);
    m.ca.fc1 = make_linear(rng, ec, ec / cfg.ca_reduction);
    m.ca.fc2 = make_linear(rng, ec / cfg.ca_reduction, ec);
    m.contract = make_linear(rng, ec, c, /*zero_weights=*/true);
    p.channel = std::move(m);
  }
  return p;
}

void visit_params(BlockParams& p, const std::string& prefix, const ParamVisitor& fn) {
  if (p.spatial) {
    visit_params(p.spatial->ln, prefix + ".sp.ln", fn);
    visit_params(p.spatial->mlp_in, prefix + ".sp.mlp_in", fn);
    visit_params(p.spatial->dw, prefix + ".sp.dw", fn);
    visit_params(p.spatial->mlp_out, prefix + ".sp.mlp_out", fn);
  }
  if (p.channel) {
    visit_params(p.channel->ln, prefix + ".ch.ln", fn);
    visit_params(p.channel->expand, prefix + ".ch.expand", fn);
    visit_params(p.channel->ca.fc1, prefix + ".ch.ca.fc1", fn);
    visit_params(p.channel->ca.fc2, prefix + ".ch.ca.fc2", fn);
    visit_params(p.channel->contract, prefix + ".ch.contract", fn);
  }
}

Tensor spatial_mixer_forward(const Tensor& x, const SpatialMixerParams& p) {
  require_channels("spatial_mixer", x, p.mlp_in.w.extent(1));
  Tensor y = apply(x, p.ln);
  y = apply(y, p.mlp_in);
  y = apply(y, p.dw);
  y = apply(y, p.mlp_out);
  return add(x, y);
}

Tensor channel_attention(const Tensor& x, const ChannelAttentionParams& p) {
  Tensor s = global_avg_pool(x);
  s = apply(s, p.fc1);
  s = gelu(s);
  s = apply(s, p.fc2);
  s = sigmoid(s);
  return mul_channel_gate(x, s);
}

Tensor channel_mixer_forward(const Tensor& x, const ChannelMixerParams& p) {
  require_channels("channel_mixer", x, p.expand.w.extent(1));
  Tensor y = apply(x, p.ln);
  y = apply(y, p.expand);
  y = channel_attention(y, p.ca);
  y = apply(y, p.contract);
  return add(x, y);
}

Tensor block_forward(const Tensor& x, const BlockParams& p) {
  Tensor y = x;
  if (p.spatial) y = spatial_mixer_forward(y, *p.spatial);
  if (p.channel) y = channel_mixer_forward(y, *p.channel);
  return y;
}

}  // namespace senh
