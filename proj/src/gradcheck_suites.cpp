#include <cmath>

#include "senh/blocks.hpp"
#include "senh/gradcheck.hpp"
#include "senh/interaction.hpp"
#include "senh/loss.hpp"
#include "senh/network.hpp"
#include "senh/ops.hpp"

namespace senh::gradcheck {
namespace {

Tensor rand_t(Rng& rng, const Shape& s, double lo = -1.0, double hi = 1.0) {
  Tensor t(s);
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// Magnitudes in [lo, hi] with random sign; keeps |x| away from kinks at 0.
Tensor rand_signed(Rng& rng, const Shape& s, double lo, double hi) {
  Tensor t(s);
  for (double& v : t.data()) v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(lo, hi);
  return t;
}

// Weighted scalarization so degenerate reductions (e.g. softmax rows summing
// to one) cannot hide a broken backward.
Tensor pick(const Tensor& out, const Tensor& wts) { return reduce_sum(mul(out, wts)); }

void fill_params(Rng& rng, const std::function<void(const ParamVisitor&)>& visit,
                 std::vector<Tensor>* leaves, double mag = 0.3) {
  visit([&](const std::string&, Tensor& t) {
    for (double& v : t.data()) v = rng.uniform(-mag, mag);
    if (leaves) leaves->push_back(t);
  });
}

}  // namespace

std::vector<Check> op_suite(uint64_t seed) {
  std::vector<Check> cs;
  Rng rng = Rng::keyed(seed, 0x09, 0);
  const double tol = 1e-5;

  auto check = [&](const std::string& name, std::function<Tensor()> fwd,
                   std::vector<Tensor> leaves) {
    cs.push_back({name, std::move(fwd), std::move(leaves), tol, 100, 1e-5});
  };

  {
    Tensor a = rand_t(rng, {2, 3, 4, 5}), b = rand_t(rng, {2, 3, 4, 5});
    Tensor w = rand_t(rng, {2, 3, 4, 5});
    check("add", [=] { return pick(add(a, b), w); }, {a, b});
    check("sub", [=] { return pick(sub(a, b), w); }, {a, b});
    check("mul", [=] { return pick(mul(a, b), w); }, {a, b});
    check("scale", [=] { return pick(scale(a, -1.7), w); }, {a});
    check("add_scalar", [=] { return pick(add_scalar(a, 0.4), w); }, {a});
    check("sigmoid", [=] { return pick(sigmoid(a), w); }, {a});
    check("gelu", [=] { return pick(gelu(a), w); }, {a});
    check("reduce_sum", [=] { return reduce_sum(mul(a, b)); }, {a, b});
    check("reduce_mean", [=] { return scale(reduce_mean(mul(a, b)), 3.0); }, {a, b});
  }
  {
    Tensor a = rand_t(rng, {2, 3, 4, 5}, 0.5, 1.5);
    Tensor d = rand_signed(rng, {2, 3, 4, 5}, 0.5, 1.5);
    Tensor n = rand_signed(rng, {2, 3, 4, 5}, 0.2, 1.0);
    Tensor w = rand_t(rng, {2, 3, 4, 5});
    check("div", [=] { return pick(div(a, d), w); }, {a, d});
    check("abs", [=] { return pick(abs(n), w); }, {n});
  }
  {
    Tensor x = rand_t(rng, {2, 3, 4, 5});
    Tensor w = rand_t(rng, {2, 4, 5, 3});
    check("permute", [=] { return pick(permute(x, {0, 2, 3, 1}), w); }, {x});
  }
  {
    Tensor a = rand_t(rng, {1, 2, 4, 5}), b = rand_t(rng, {1, 3, 4, 5});
    Tensor c = rand_t(rng, {1, 1, 4, 5});
    Tensor w = rand_t(rng, {1, 6, 4, 5});
    Tensor ws = rand_t(rng, {1, 2, 4, 5});
    check("concat_channels",
          [=] { return pick(concat_channels({a, b, c}), w); }, {a, b, c});
    check("slice_channels", [=] { return pick(slice_channels(b, 1, 3), ws); }, {b});
  }
  {
    Tensor a = rand_t(rng, {2, 2, 3, 4}), b = rand_t(rng, {2, 2, 4, 5});
    Tensor w = rand_t(rng, {2, 2, 3, 5});
    check("matmul_batched", [=] { return pick(matmul_batched(a, b), w); }, {a, b});
  }
  {
    Tensor x = rand_t(rng, {2, 3, 6, 7});
    Tensor cw = rand_t(rng, {4, 3, 3, 3}), cb = rand_t(rng, {4});
    Tensor w1 = rand_t(rng, {2, 4, 6, 7});
    Tensor w2 = rand_t(rng, {2, 4, 3, 4});
    check("conv2d", [=] { return pick(conv2d(x, cw, cb, 1, 1), w1); }, {x, cw, cb});
    check("conv2d_stride2", [=] { return pick(conv2d(x, cw, cb, 2, 1), w2); }, {x, cw, cb});

    Tensor dw = rand_t(rng, {3, 1, 3, 3}), db = rand_t(rng, {3});
    Tensor w3 = rand_t(rng, {2, 3, 6, 7});
    check("dwconv2d", [=] { return pick(dwconv2d(x, dw, db, 1), w3); }, {x, dw, db});

    Tensor lw = rand_t(rng, {5, 3}), lb = rand_t(rng, {5});
    Tensor w4 = rand_t(rng, {2, 5, 6, 7});
    check("linear_channels", [=] { return pick(linear_channels(x, lw, lb), w4); },
          {x, lw, lb});

    Tensor gamma = rand_t(rng, {3}, 0.5, 1.5), beta = rand_t(rng, {3});
    check("layer_norm", [=] { return pick(layer_norm(x, gamma, beta), w3); },
          {x, gamma, beta});

    Tensor g = rand_t(rng, {2, 3, 1, 1}, 0.2, 0.8);
    check("global_avg_pool",
          [=] { return pick(global_avg_pool(x), g); }, {x});
    check("mul_channel_gate", [=] { return pick(mul_channel_gate(x, g), w3); }, {x, g});

    Tensor w5 = rand_t(rng, {2, 3, 9, 5});
    check("resize_bilinear", [=] { return pick(resize_bilinear(x, 9, 5), w5); }, {x});

    Tensor wh = rand_t(rng, {2, 3, 6, 6}), wv = rand_t(rng, {2, 3, 5, 7});
    check("diff_horizontal", [=] { return pick(diff_horizontal(x), wh); }, {x});
    check("diff_vertical", [=] { return pick(diff_vertical(x), wv); }, {x});

    Tensor wf = rand_t(rng, {2, 3, 6, 4, 2});
    check("rfft2", [=] { return pick(rfft2(x), wf); }, {x});
  }
  {
    Tensor x = rand_t(rng, {2, 3, 4, 6});
    Tensor w = rand_t(rng, {2, 3, 4, 6});
    check("softmax_lastdim", [=] { return pick(softmax_lastdim(x), w); }, {x});
  }
  return cs;
}

std::vector<Check> block_suite(uint64_t seed) {
  std::vector<Check> cs;
  Rng rng = Rng::keyed(seed, 0x0b, 0);
  const double tol = 1e-4;

  BlockConfig bc;
  bc.channels = 4;
  bc.kernel = 3;
  bc.expansion = 2;
  bc.ca_reduction = 2;

  {
    Rng init = Rng::keyed(seed, 0x0b, 1);
    BlockParams p = make_block(init, bc);
    std::vector<Tensor> leaves;
    fill_params(rng, [&](const ParamVisitor& fn) { visit_params(p, "b", fn); }, &leaves);
    Tensor x = rand_t(rng, {1, 4, 6, 6});
    Tensor w = rand_t(rng, {1, 4, 6, 6});
    leaves.push_back(x);
    cs.push_back({"spatial_mixer",
                  [=] { return pick(spatial_mixer_forward(x, *p.spatial), w); }, leaves,
                  tol, 100, 1e-5});
    cs.push_back({"channel_mixer",
                  [=] { return pick(channel_mixer_forward(x, *p.channel), w); }, leaves,
                  tol, 100, 1e-5});
    cs.push_back(
        {"block", [=] { return pick(block_forward(x, p), w); }, leaves, tol, 100, 1e-5});

    Tensor g = rand_t(rng, {1, 8, 5, 5});
    Tensor gw = rand_t(rng, {1, 8, 5, 5});
    std::vector<Tensor> ca_leaves = {g, p.channel->ca.fc1.w, p.channel->ca.fc1.b,
                                     p.channel->ca.fc2.w, p.channel->ca.fc2.b};
    cs.push_back({"channel_attention",
                  [=] { return pick(channel_attention(g, p.channel->ca), gw); }, ca_leaves,
                  tol, 100, 1e-5});
  }
  {
    Rng init = Rng::keyed(seed, 0x0b, 2);
    CrossViewParams p = make_cross_view(init, 4);
    std::vector<Tensor> leaves;
    fill_params(rng, [&](const ParamVisitor& fn) { visit_params(p, "cv", fn); }, &leaves);
    Tensor l = rand_t(rng, {1, 4, 5, 6}), r = rand_t(rng, {1, 4, 5, 6});
    Tensor wl = rand_t(rng, {1, 4, 5, 6}), wr = rand_t(rng, {1, 4, 5, 6});
    leaves.push_back(l);
    leaves.push_back(r);
    cs.push_back({"cross_view",
                  [=] {
                    CrossViewResult out = cross_view_forward(l, r, p, true);
                    return add(pick(out.left, wl), pick(out.right, wr));
                  },
                  leaves, tol, 100, 1e-5});
  }
  {
    InteractionConfig ic;
    ic.base_channels = 4;
    ic.kernel = 3;
    ic.expansion = 2;
    ic.ca_reduction = 2;
    Rng init = Rng::keyed(seed, 0x0b, 3);
    InteractionParams p = make_interaction(init, ic);
    std::vector<Tensor> leaves;
    fill_params(rng, [&](const ParamVisitor& fn) { visit_params(p, "interact", fn); }, &leaves,
                0.2);
    FeaturePyramid pyr;
    pyr.left = {rand_t(rng, {1, 4, 8, 8}), rand_t(rng, {1, 8, 4, 4}),
                rand_t(rng, {1, 16, 2, 2})};
    pyr.right = {rand_t(rng, {1, 4, 8, 8}), rand_t(rng, {1, 8, 4, 4}),
                 rand_t(rng, {1, 16, 2, 2})};
    Tensor wl = rand_t(rng, {1, 4, 8, 8}), wr = rand_t(rng, {1, 16, 2, 2});
    for (Tensor& t : pyr.left) leaves.push_back(t);
    for (Tensor& t : pyr.right) leaves.push_back(t);
    cs.push_back({"interaction",
                  [=] {
                    FeaturePyramid out = interaction_forward(pyr, p);
                    return add(pick(out.left[0], wl), pick(out.right[2], wr));
                  },
                  leaves, tol, 100, 1e-5});
  }
  {
    Tensor pl = rand_t(rng, {1, 3, 4, 6}, 0.0, 1.0), pr = rand_t(rng, {1, 3, 4, 6}, 0.0, 1.0);
    Tensor gl = rand_t(rng, {1, 3, 4, 6}, 0.0, 1.0), gr = rand_t(rng, {1, 3, 4, 6}, 0.0, 1.0);
    cs.push_back({"loss_fre", [=] { return loss_fre(pl, pr, gl, gr); }, {pl, pr, gl, gr},
                  tol, 100, 1e-5});
    cs.push_back({"loss_tv", [=] { return loss_tv(pl, gl); }, {pl, gl}, tol, 100, 1e-5});
    cs.push_back({"loss_total",
                  [=] { return total_loss(pl, pr, gl, gr).value; }, {pl, pr, gl, gr}, tol,
                  100, 1e-5});

    Tensor sl = rand_t(rng, {1, 1, 12, 12}, 0.1, 0.9), sr = rand_t(rng, {1, 1, 12, 12}, 0.1, 0.9);
    Tensor tl = rand_t(rng, {1, 1, 12, 12}, 0.1, 0.9), tr = rand_t(rng, {1, 1, 12, 12}, 0.1, 0.9);
    cs.push_back({"loss_ssim",
                  [=] { return alt_loss(ReconLoss::ssim, sl, sr, tl, tr); }, {sl, sr, tl, tr},
                  tol, 60, 1e-5});
  }
  return cs;
}

std::vector<Check> model_suite(uint64_t seed) {
  std::vector<Check> cs;
  Rng rng = Rng::keyed(seed, 0x0d, 0);

  ModelConfig cfg;
  cfg.base_channels = 4;
  cfg.depths = {1, 1, 1, 1, 1};
  cfg.kernel = 3;
  cfg.expansion = 2;
  cfg.ca_reduction = 2;
  cfg.seed = seed;
  auto model = std::make_shared<Model>(build_model(cfg));

  std::vector<Tensor> leaves;
  fill_params(rng, [&](const ParamVisitor& fn) { visit_params(*model, fn); }, &leaves, 0.2);

  Tensor left = rand_t(rng, {1, 3, 8, 8}, 0.0, 1.0);
  Tensor right = rand_t(rng, {1, 3, 8, 8}, 0.0, 1.0);
  Tensor gt_left = rand_t(rng, {1, 3, 8, 8}, 0.0, 1.0);
  Tensor gt_right = rand_t(rng, {1, 3, 8, 8}, 0.0, 1.0);
  leaves.push_back(left);
  leaves.push_back(right);

  // One closure through every stage down to the training loss, probed at
  // randomly chosen parameters and input pixels.
  cs.push_back({"model_total_loss",
                [model, left, right, gt_left, gt_right] {
                  ViewPair out = model_forward(*model, left, right);
                  return total_loss(out.left, out.right, gt_left, gt_right).value;
                },
                leaves, 1e-4, 150, 1e-5});
  return cs;
}

}  // namespace senh::gradcheck
