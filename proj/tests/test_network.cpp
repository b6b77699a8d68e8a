#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "senh/checkpoint.hpp"
#include "senh/network.hpp"
#include "senh/ops.hpp"

using namespace senh;
using testutil::bitwise_equal;
using testutil::max_abs_diff;
using testutil::random_tensor;

namespace {

// Independent shape-walk over the declared layer layout; kept free of any
// library calls so it can disagree with the implementation.
namespace oracle {

int64_t conv(int64_t cin, int64_t cout, int64_t k) { return cout * cin * k * k + cout; }
int64_t linear(int64_t cin, int64_t cout) { return cout * cin + cout; }

int64_t spatial_half(int64_t c, int64_t k) {
  return 2 * c + linear(c, c) + (c * k * k + c) + linear(c, c);
}

int64_t channel_half(int64_t c, int64_t e, int64_t r) {
  const int64_t ec = c * e;
  return 2 * c + linear(c, ec) + linear(ec, ec / r) + linear(ec / r, ec) + linear(ec, c);
}

int64_t block(int64_t c, int64_t k, int64_t e, int64_t r, bool no_sp, bool no_ch) {
  return (no_sp ? 0 : spatial_half(c, k)) + (no_ch ? 0 : channel_half(c, e, r));
}

int64_t cross_view(int64_t c) { return 2 * linear(c, c) + linear(2 * c, c); }

int64_t model(const ModelConfig& g) {
  const int64_t c = g.base_channels;
  auto blk = [&](int64_t ch) { return block(ch, g.kernel, g.expansion, g.ca_reduction,
                                            g.no_spatial, g.no_channel); };
  int64_t n = conv(3, c, 3);
  n += g.depths[0] * blk(c) + conv(c, 2 * c, 3);
  n += g.depths[1] * blk(2 * c) + conv(2 * c, 4 * c, 3);
  n += g.depths[2] * blk(4 * c);
  if (!g.no_cross_view) n += cross_view(c) + cross_view(2 * c) + cross_view(4 * c);
  if (!g.no_cross_scale)
    for (int s = 0; s < 3; ++s) n += linear(7 * c, c << s) + blk(c << s);
  n += linear(4 * c, 2 * c) + linear(4 * c, 2 * c) + g.depths[3] * blk(2 * c);
  n += linear(2 * c, c) + linear(2 * c, c) + g.depths[4] * blk(c);
  n += conv(c, 3, 3);
  return n;
}

}  // namespace oracle

ModelConfig tiny_config() {
  return ModelConfig{.base_channels = 4, .depths = {1, 1, 1, 1, 1}, .kernel = 3};
}

void unlock_tails(Model& m, uint64_t seed) {
  Rng rng(seed);
  visit_params(m, [&](const std::string& name, Tensor& t) {
    if (name.size() < 2 || name.compare(name.size() - 2, 2, ".w") != 0) return;
    bool all_zero = true;
    for (double v : t.data())
      if (v != 0.0) {
        all_zero = false;
        break;
      }
    if (all_zero)
      for (double& v : t.data()) v = rng.uniform(-0.05, 0.05);
  });
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("senh-test-" + std::to_string(::getpid()) + "-" +
            std::to_string(reinterpret_cast<uintptr_t>(this)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("config validation rejects bad settings") {
  CHECK_THROWS_AS(validate(ModelConfig{.base_channels = 2}), std::invalid_argument);
  CHECK_THROWS_AS(validate(ModelConfig{.depths = {4, 0, 2, 2, 4}}), std::invalid_argument);
  CHECK_THROWS_AS(validate(ModelConfig{.kernel = 6}), std::invalid_argument);
  CHECK_NOTHROW(validate(ModelConfig{}));
}

TEST_CASE("parameter count matches the shape-walk enumeration") {
  Model def = build_model(ModelConfig{});
  CHECK(param_count(def) == oracle::model(ModelConfig{}));
  CHECK(param_count(def) == 1017075);

  ModelConfig c16{.base_channels = 16};
  Model small = build_model(c16);
  CHECK(param_count(small) == oracle::model(c16));
  CHECK(param_count(small) == 272251);

  ModelConfig k3 = tiny_config();
  Model tiny = build_model(k3);
  CHECK(param_count(tiny) == oracle::model(k3));
}

TEST_CASE("each ablation removes exactly its own parameters") {
  const int64_t base = oracle::model(ModelConfig{});
  for (ModelConfig cfg : {ModelConfig{.no_cross_view = true}, ModelConfig{.no_cross_scale = true},
                          ModelConfig{.no_spatial = true}, ModelConfig{.no_channel = true}}) {
    Model m = build_model(cfg);
    CHECK(param_count(m) == oracle::model(cfg));
    CHECK(param_count(m) < base);
  }
  // Dropping the spatial half removes its blocks' spatial parameters from
  // every stage and every fusion block, nothing else.
  Model no_sp = build_model(ModelConfig{.no_spatial = true});
  const int64_t expected_drop = 9 * oracle::spatial_half(32, 7) + 7 * oracle::spatial_half(64, 7) +
                                3 * oracle::spatial_half(128, 7);
  CHECK(base - param_count(no_sp) == expected_drop);
  CHECK(param_count(no_sp) == 782515);
}

TEST_CASE("parameter count grows with every depth and with width") {
  const int64_t base = oracle::model(ModelConfig{});
  for (int i = 0; i < 5; ++i) {
    ModelConfig cfg;
    ++cfg.depths[static_cast<size_t>(i)];
    CHECK(oracle::model(cfg) > base);
    Model m = build_model(cfg);
    CHECK(param_count(m) == oracle::model(cfg));
  }
  CHECK(oracle::model(ModelConfig{.base_channels = 48}) > base);
}

TEST_CASE("same seed builds bit-identical models, different seeds differ") {
  ModelConfig cfg = tiny_config();
  cfg.seed = 7;
  Model a = build_model(cfg);
  Model b = build_model(cfg);
  auto pa = named_params(a);
  auto pb = named_params(b);
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].first == pb[i].first);
    CHECK(bitwise_equal(*pa[i].second, *pb[i].second));
  }
  cfg.seed = 8;
  Model c = build_model(cfg);
  bool any_diff = false;
  auto pc = named_params(c);
  for (size_t i = 0; i < pa.size(); ++i)
    if (!bitwise_equal(*pa[i].second, *pc[i].second)) any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("forward preserves the input shape") {
  Model m = build_model(tiny_config());
  Rng rng(90);
  Tensor left = random_tensor({2, 3, 64, 64}, rng, 0.0, 1.0);
  Tensor right = random_tensor({2, 3, 64, 64}, rng, 0.0, 1.0);
  ViewPair out = model_forward(m, left, right);
  CHECK(out.left.shape() == Shape{2, 3, 64, 64});
  CHECK(out.right.shape() == Shape{2, 3, 64, 64});
}

TEST_CASE("forward rejects extents not divisible by four") {
  Model m = build_model(tiny_config());
  Tensor left({1, 3, 10, 12}, 0.5);
  Tensor right({1, 3, 10, 12}, 0.5);
  CHECK_THROWS_WITH_AS(model_forward(m, left, right),
                       doctest::Contains("divisible by 4"), std::invalid_argument);
  Tensor ok_l({1, 3, 12, 12}, 0.5), bad_r({1, 3, 12, 16}, 0.5);
  CHECK_THROWS_AS(model_forward(m, ok_l, bad_r), std::invalid_argument);
}

TEST_CASE("a freshly initialized model is the identity on both views") {
  Model m = build_model(tiny_config());
  Rng rng(91);
  Tensor left = random_tensor({1, 3, 16, 16}, rng, 0.0, 1.0);
  Tensor right = random_tensor({1, 3, 16, 16}, rng, 0.0, 1.0);
  ViewPair out = model_forward(m, left, right);
  CHECK(bitwise_equal(out.left, left));
  CHECK(bitwise_equal(out.right, right));
}

TEST_CASE("zeroing branches and head/tail convs keeps the model an exact identity") {
  Model m = build_model(tiny_config());
  unlock_tails(m, 92);  // give the tails values first, then zero the safety set
  for (Tensor* t : {&m.shallow.w, &m.shallow.b, &m.recon.w, &m.recon.b})
    for (double& v : t->data()) v = 0.0;
  Rng rng(93);
  Tensor left = random_tensor({1, 3, 16, 16}, rng, 0.0, 1.0);
  Tensor right = random_tensor({1, 3, 16, 16}, rng, 0.0, 1.0);
  ViewPair out = model_forward(m, left, right);
  CHECK(bitwise_equal(out.left, left));
  CHECK(bitwise_equal(out.right, right));
}

TEST_CASE("swapping the input views swaps the outputs") {
  Model m = build_model(tiny_config());
  unlock_tails(m, 94);
  Rng rng(95);
  Tensor left = random_tensor({1, 3, 16, 16}, rng, 0.0, 1.0);
  Tensor right = random_tensor({1, 3, 16, 16}, rng, 0.0, 1.0);
  ViewPair fwd = model_forward(m, left, right);
  ViewPair rev = model_forward(m, right, left);
  CHECK(max_abs_diff(rev.left, fwd.right) <= 1e-9);
  CHECK(max_abs_diff(rev.right, fwd.left) <= 1e-9);
}

TEST_CASE("left and right losses touch the same trainable arrays") {
  Model m = build_model(tiny_config());
  unlock_tails(m, 96);
  Rng rng(97);
  Tensor left = random_tensor({1, 3, 8, 8}, rng, 0.0, 1.0);
  Tensor right = random_tensor({1, 3, 8, 8}, rng, 0.0, 1.0);
  auto touched = [&](bool use_left) {
    Tape tape;
    ViewPair out = model_forward(m, left, right);
    tape.backward(reduce_mean(use_left ? out.left : out.right));
    std::set<std::string> names;
    visit_params(m, [&](const std::string& name, Tensor& t) {
      if (tape.grad(t).defined()) names.insert(name);
    });
    return names;
  };
  std::set<std::string> from_left = touched(true);
  std::set<std::string> from_right = touched(false);
  CHECK(from_left == from_right);
  CHECK(from_left.size() > 0);
}

TEST_CASE("checkpoint roundtrip restores parameters and behavior bitwise") {
  TempDir dir;
  ModelConfig cfg = tiny_config();
  cfg.seed = 21;
  Model m = build_model(cfg);
  unlock_tails(m, 98);
  CheckpointMeta meta{.step = 17, .epoch = 3};
  save_checkpoint(dir.file("a.ckpt"), m, meta);

  LoadedCheckpoint loaded = load_checkpoint(dir.file("a.ckpt"));
  CHECK(loaded.meta.step == 17);
  CHECK(loaded.meta.epoch == 3);
  CHECK(loaded.model.cfg == cfg);
  CHECK(loaded.optimizer_arrays.empty());

  auto pa = named_params(m);
  auto pb = named_params(loaded.model);
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i) CHECK(bitwise_equal(*pa[i].second, *pb[i].second));

  Rng rng(99);
  Tensor left = random_tensor({1, 3, 8, 8}, rng, 0.0, 1.0);
  Tensor right = random_tensor({1, 3, 8, 8}, rng, 0.0, 1.0);
  ViewPair a = model_forward(m, left, right);
  ViewPair b = model_forward(loaded.model, left, right);
  CHECK(bitwise_equal(a.left, b.left));
  CHECK(bitwise_equal(a.right, b.right));

  save_checkpoint(dir.file("b.ckpt"), loaded.model, loaded.meta);
  CHECK(slurp(dir.file("a.ckpt")) == slurp(dir.file("b.ckpt")));
}

TEST_CASE("checkpoint carries optimizer arrays through a roundtrip") {
  TempDir dir;
  Model m = build_model(tiny_config());
  Rng rng(100);
  std::vector<NamedArray> opt;
  opt.push_back({"opt.m.shallow.w", random_tensor({4, 3, 3, 3}, rng)});
  opt.push_back({"opt.v.shallow.w", random_tensor({4, 3, 3, 3}, rng)});
  save_checkpoint(dir.file("o.ckpt"), m, CheckpointMeta{.step = 5, .epoch = 1}, opt);
  LoadedCheckpoint loaded = load_checkpoint(dir.file("o.ckpt"));
  REQUIRE(loaded.optimizer_arrays.size() == 2);
  CHECK(loaded.optimizer_arrays[0].name == "opt.m.shallow.w");
  CHECK(bitwise_equal(loaded.optimizer_arrays[0].tensor, opt[0].tensor));
  CHECK(bitwise_equal(loaded.optimizer_arrays[1].tensor, opt[1].tensor));
}

TEST_CASE("checkpoint loading rejects truncated and corrupt files") {
  TempDir dir;
  Model m = build_model(tiny_config());
  save_checkpoint(dir.file("full.ckpt"), m, CheckpointMeta{});
  std::string bytes = slurp(dir.file("full.ckpt"));

  {
    std::ofstream os(dir.file("cut.ckpt"), std::ios::binary);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  CHECK_THROWS_AS(load_checkpoint(dir.file("cut.ckpt")), std::runtime_error);

  {
    std::string twisted = bytes;
    // Flip a byte inside the JSON header.
    twisted[9] = '!';
    std::ofstream os(dir.file("bad.ckpt"), std::ios::binary);
    os.write(twisted.data(), static_cast<std::streamsize>(twisted.size()));
  }
  CHECK_THROWS_AS(load_checkpoint(dir.file("bad.ckpt")), std::runtime_error);

  CHECK_THROWS_AS(load_checkpoint(dir.file("missing.ckpt")), std::runtime_error);
}

TEST_CASE("config comparison names the first differing field") {
  ModelConfig a, b;
  b.base_channels = 16;
  CHECK_THROWS_WITH_AS(require_same(a, b), doctest::Contains("base_channels"),
                       std::invalid_argument);
  ModelConfig c;
  c.depths[2] = 3;
  CHECK_THROWS_WITH_AS(require_same(a, c), doctest::Contains("depths[2]"),
                       std::invalid_argument);
  ModelConfig d;
  d.softmax_attention = false;
  CHECK_THROWS_WITH_AS(require_same(a, d), doctest::Contains("softmax_attention"),
                       std::invalid_argument);
  CHECK_NOTHROW(require_same(a, ModelConfig{}));
}
