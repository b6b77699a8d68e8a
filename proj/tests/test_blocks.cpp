#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "senh/blocks.hpp"
#include "senh/gradcheck.hpp"
#include "senh/ops.hpp"

using namespace senh;
using testutil::bitwise_equal;
using testutil::max_abs_diff;
using testutil::random_tensor;

namespace {

double fd(const std::function<Tensor()>& forward, std::vector<Tensor> leaves, uint64_t seed) {
  Rng rng(seed);
  return gradcheck::max_rel_error(forward, leaves, /*probes=*/120, /*step=*/1e-5, rng);
}

void randomize(Tensor& t, Rng& rng, double lo = -0.4, double hi = 0.4) {
  for (double& v : t.data()) v = rng.uniform(lo, hi);
}

std::vector<Tensor> all_params(BlockParams& p) {
  std::vector<Tensor> out;
  visit_params(p, "b", [&](const std::string&, Tensor& t) { out.push_back(t); });
  return out;
}

int64_t param_numel(BlockParams& p) {
  int64_t n = 0;
  visit_params(p, "b", [&](const std::string&, Tensor& t) { n += t.numel(); });
  return n;
}

// Circular shift of the spatial axes.
Tensor circshift(const Tensor& x, int64_t dy, int64_t dx) {
  const int64_t b = x.extent(0), c = x.extent(1), h = x.extent(2), w = x.extent(3);
  Tensor out(x.shape());
  for (int64_t i = 0; i < b * c; ++i)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t xx = 0; xx < w; ++xx) {
        const int64_t sy = ((y - dy) % h + h) % h;
        const int64_t sx = ((xx - dx) % w + w) % w;
        out.data()[static_cast<size_t>((i * h + y) * w + xx)] =
            x.data()[static_cast<size_t>((i * h + sy) * w + sx)];
      }
  return out;
}

}  // namespace

TEST_CASE("block config validation rejects bad settings") {
  CHECK_THROWS_AS(validate(BlockConfig{.channels = 8, .kernel = 4}), std::invalid_argument);
  CHECK_THROWS_AS(validate(BlockConfig{.channels = 8, .kernel = 7, .expansion = 0}),
                  std::invalid_argument);
  // reduction 3 does not divide 8*2=16
  CHECK_THROWS_AS(validate(BlockConfig{.channels = 8, .kernel = 7, .expansion = 2,
                                       .ca_reduction = 3}),
                  std::invalid_argument);
  CHECK_NOTHROW(validate(BlockConfig{}));
}

TEST_CASE("freshly built block is the identity map, bit-exact") {
  // Every residual branch closes with a zero-initialized layer, so a new block
  // must pass its input through unchanged.
  Rng prng(11);
  BlockParams p = make_block(prng, BlockConfig{.channels = 6, .kernel = 5, .expansion = 2,
                                               .ca_reduction = 4});
  Rng xrng(12);
  Tensor x = random_tensor({2, 6, 7, 9}, xrng);
  CHECK(bitwise_equal(block_forward(x, p), x));
}

TEST_CASE("fully zeroed block is the identity map, bit-exact") {
  Rng prng(13);
  BlockParams p = make_block(prng, BlockConfig{.channels = 4});
  visit_params(p, "b", [](const std::string&, Tensor& t) {
    for (double& v : t.data()) v = 0.0;
  });
  Rng xrng(14);
  Tensor x = random_tensor({1, 4, 5, 5}, xrng);
  CHECK(bitwise_equal(block_forward(x, p), x));
}

TEST_CASE("spatial mixer preserves shape") {
  Rng prng(15);
  BlockParams p = make_block(prng, BlockConfig{.channels = 8});
  Rng xrng(16);
  Tensor x = random_tensor({1, 8, 16, 20}, xrng);
  Tensor y = spatial_mixer_forward(x, *p.spatial);
  CHECK(y.shape() == x.shape());
  Tensor z = block_forward(x, p);
  CHECK(z.shape() == x.shape());
}

TEST_CASE("spatial mixer rejects channel mismatch") {
  Rng prng(17);
  BlockParams p = make_block(prng, BlockConfig{.channels = 8});
  Tensor x({1, 6, 4, 4}, 0.3);
  CHECK_THROWS_AS(spatial_mixer_forward(x, *p.spatial), std::invalid_argument);
  CHECK_THROWS_AS(channel_mixer_forward(x, *p.channel), std::invalid_argument);
}

TEST_CASE("channel attention with zero fc weights halves the input") {
  Rng prng(19);
  ChannelAttentionParams ca;
  ca.fc1 = make_linear(prng, 8, 2, /*zero_weights=*/true);
  ca.fc2 = make_linear(prng, 2, 8, /*zero_weights=*/true);
  Rng xrng(20);
  Tensor x = random_tensor({2, 8, 3, 4}, xrng);
  Tensor y = channel_attention(x, ca);
  CHECK(max_abs_diff(y, scale(x, 0.5)) == 0.0);
}

TEST_CASE("channel attention keeps spatially constant inputs spatially constant") {
  Rng prng(21);
  ChannelAttentionParams ca;
  ca.fc1 = make_linear(prng, 6, 3);
  ca.fc2 = make_linear(prng, 3, 6);
  randomize(ca.fc1.w, prng);
  randomize(ca.fc2.w, prng);
  Tensor x({1, 6, 4, 4});
  Rng xrng(22);
  for (int64_t c = 0; c < 6; ++c) {
    const double v = xrng.uniform(-1.0, 1.0);
    for (int64_t i = 0; i < 16; ++i) x.data()[static_cast<size_t>(c * 16 + i)] = v;
  }
  Tensor y = channel_attention(x, ca);
  for (int64_t c = 0; c < 6; ++c)
    for (int64_t i = 1; i < 16; ++i)
      CHECK(y.data()[static_cast<size_t>(c * 16 + i)] ==
            y.data()[static_cast<size_t>(c * 16)]);
}

TEST_CASE("channel attention gates lie strictly in (0,1)") {
  Rng prng(23);
  ChannelAttentionParams ca;
  ca.fc1 = make_linear(prng, 4, 1);
  ca.fc2 = make_linear(prng, 1, 4);
  randomize(ca.fc1.w, prng, -2.0, 2.0);
  randomize(ca.fc2.w, prng, -2.0, 2.0);
  Rng xrng(24);
  Tensor x = random_tensor({1, 4, 3, 3}, xrng);
  Tensor y = channel_attention(x, ca);
  // Gate = y/x elementwise wherever x != 0.
  for (size_t i = 0; i < x.data().size(); ++i) {
    if (x.data()[i] == 0.0) continue;
    const double g = y.data()[i] / x.data()[i];
    CHECK(g > 0.0);
    CHECK(g < 1.0);
  }
}

TEST_CASE("channel mixer expands to expansion*channels internally") {
  Rng prng(25);
  BlockParams p = make_block(prng, BlockConfig{.channels = 8, .expansion = 3,
                                               .ca_reduction = 4});
  CHECK(p.channel->expand.w.extent(0) == 24);
  CHECK(p.channel->expand.w.extent(1) == 8);
  CHECK(p.channel->ca.fc1.w.extent(0) == 6);
  CHECK(p.channel->contract.w.extent(0) == 8);
  CHECK(p.channel->contract.w.extent(1) == 24);
}

TEST_CASE("channel mixer gating scales output deviation monotonically") {
  // With expand = identity embedding and contract = projection, the mixer's
  // update is gate_c * ln(x)_c per channel, so raising the (constant) gate
  // scales every deviation by the same known ratio.
  const int64_t c = 4, ec = 8;
  Rng prng(27);
  ChannelMixerParams m;
  m.ln = make_layer_norm(c);
  m.expand = make_linear(prng, c, ec, /*zero_weights=*/true);
  for (int64_t i = 0; i < c; ++i)
    m.expand.w.data()[static_cast<size_t>(i * c + i)] = 1.0;
  m.ca.fc1 = make_linear(prng, ec, 2, /*zero_weights=*/true);
  m.ca.fc2 = make_linear(prng, 2, ec, /*zero_weights=*/true);
  m.contract = make_linear(prng, ec, c, /*zero_weights=*/true);
  for (int64_t i = 0; i < c; ++i)
    m.contract.w.data()[static_cast<size_t>(i * ec + i)] = 1.0;
  Rng xrng(28);
  Tensor x = random_tensor({1, c, 3, 3}, xrng);

  auto deviation = [&](double logit) {
    for (double& v : m.ca.fc2.b.data()) v = logit;
    return sub(channel_mixer_forward(x, m), x);
  };
  Tensor d_lo = deviation(-2.0);
  Tensor d_hi = deviation(2.0);
  const double ratio = (1.0 / (1.0 + std::exp(-2.0))) / (1.0 / (1.0 + std::exp(2.0)));
  for (size_t i = 0; i < d_lo.data().size(); ++i) {
    if (std::abs(d_lo.data()[i]) < 1e-12) continue;
    CHECK(d_hi.data()[i] / d_lo.data()[i] == doctest::Approx(ratio).epsilon(1e-10));
  }
}

TEST_CASE("spatial path is translation equivariant away from the borders") {
  const int64_t h = 20, w = 20, dy = 2, dx = 3;
  Rng prng(29);
  BlockParams p = make_block(prng, BlockConfig{.channels = 4, .kernel = 7});
  randomize(p.spatial->mlp_out.w, prng);  // make the branch non-trivial
  Rng xrng(30);
  Tensor x = random_tensor({1, 4, h, w}, xrng);
  Tensor y1 = spatial_mixer_forward(x, *p.spatial);
  Tensor y2 = spatial_mixer_forward(circshift(x, dy, dx), *p.spatial);
  // Positions whose kernel support avoids both the wrap seam and zero padding.
  const int64_t pad = 3;
  int64_t checked = 0;
  for (int64_t c = 0; c < 4; ++c)
    for (int64_t y = dy + pad; y + pad < h; ++y)
      for (int64_t xx = dx + pad; xx + pad < w; ++xx) {
        const double shifted = y2.data()[static_cast<size_t>((c * h + y) * w + xx)];
        const double base = y1.data()[static_cast<size_t>((c * h + y - dy) * w + xx - dx)];
        CHECK(shifted == base);
        ++checked;
      }
  CHECK(checked > 100);
}

TEST_CASE("parameter count matches the closed-form enumeration") {
  auto closed_form = [](int64_t c, int64_t k, int64_t e, int64_t r) {
    const int64_t ec = c * e;
    const int64_t spatial = 2 * c + (c * c + c) + (c * k * k + c) + (c * c + c);
    const int64_t channel = 2 * c + (ec * c + ec) + (ec / r * ec + ec / r) +
                            (ec * ec / r + ec) + (c * ec + c);
    return spatial + channel;
  };
  Rng prng(31);
  BlockParams p = make_block(prng, BlockConfig{});  // C=32, k=7, e=2, r=4
  CHECK(param_numel(p) == closed_form(32, 7, 2, 4));
  CHECK(param_numel(p) == 10160);

  BlockParams q = make_block(prng, BlockConfig{.channels = 16, .kernel = 3});
  CHECK(param_numel(q) == closed_form(16, 3, 2, 4));

  BlockParams no_sp = make_block(prng, BlockConfig{.no_spatial = true});
  const int64_t c = 32, k = 7;
  CHECK(param_numel(no_sp) ==
        closed_form(32, 7, 2, 4) - (2 * c + (c * c + c) + (c * k * k + c) + (c * c + c)));
  BlockParams no_ch = make_block(prng, BlockConfig{.no_channel = true});
  CHECK(param_numel(no_ch) == 2 * c + (c * c + c) + (c * k * k + c) + (c * c + c));
}

TEST_CASE("ablated halves pass through and drop their parameters") {
  Rng prng(33);
  BlockParams both_off = make_block(prng, BlockConfig{.channels = 4, .no_spatial = true,
                                                      .no_channel = true});
  CHECK(param_numel(both_off) == 0);
  Rng xrng(34);
  Tensor x = random_tensor({1, 4, 4, 4}, xrng);
  CHECK(bitwise_equal(block_forward(x, both_off), x));
}

TEST_CASE("spatial mixer gradients match finite differences") {
  Rng prng(35);
  BlockParams p = make_block(prng, BlockConfig{.channels = 4, .kernel = 7});
  randomize(p.spatial->mlp_out.w, prng);
  Rng xrng(36);
  Tensor x = random_tensor({1, 4, 8, 8}, xrng);
  std::vector<Tensor> leaves = all_params(p);
  leaves.push_back(x);
  CHECK(fd([&] { return reduce_mean(spatial_mixer_forward(x, *p.spatial)); }, leaves, 137) <
        1e-4);
}

TEST_CASE("channel attention gradients match finite differences") {
  Rng prng(37);
  ChannelAttentionParams ca;
  ca.fc1 = make_linear(prng, 8, 2);
  ca.fc2 = make_linear(prng, 2, 8);
  randomize(ca.fc1.w, prng);
  randomize(ca.fc2.w, prng);
  Rng xrng(38);
  Tensor x = random_tensor({2, 8, 4, 4}, xrng);
  std::vector<Tensor> leaves = {ca.fc1.w, ca.fc1.b, ca.fc2.w, ca.fc2.b, x};
  CHECK(fd([&] { return reduce_mean(channel_attention(x, ca)); }, leaves, 139) < 1e-5);
}

TEST_CASE("channel mixer gradients match finite differences") {
  Rng prng(39);
  BlockParams p = make_block(prng, BlockConfig{.channels = 4, .kernel = 3});
  randomize(p.channel->contract.w, prng);
  Rng xrng(40);
  Tensor x = random_tensor({1, 4, 6, 6}, xrng);
  std::vector<Tensor> leaves;
  visit_params(p, "b", [&](const std::string& n, Tensor& t) {
    if (n.find(".ch.") != std::string::npos) leaves.push_back(t);
  });
  leaves.push_back(x);
  CHECK(fd([&] { return reduce_mean(channel_mixer_forward(x, *p.channel)); }, leaves, 141) <
        1e-4);
}

TEST_CASE("full block gradients match finite differences") {
  Rng prng(41);
  BlockParams p = make_block(prng, BlockConfig{.channels = 4, .kernel = 5});
  randomize(p.spatial->mlp_out.w, prng);
  randomize(p.channel->contract.w, prng);
  Rng xrng(42);
  Tensor x = random_tensor({1, 4, 8, 8}, xrng);
  std::vector<Tensor> leaves = all_params(p);
  leaves.push_back(x);
  CHECK(fd([&] { return reduce_mean(block_forward(x, p)); }, leaves, 143) < 1e-4);
}
