#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "senh/data.hpp"
#include "senh/png_io.hpp"
#include "senh/trainer.hpp"

using namespace senh;
using testutil::bitwise_equal;
using testutil::slurp;
using testutil::spit;
using testutil::TempDir;

namespace {

ModelConfig tiny_model() {
  ModelConfig cfg;
  cfg.base_channels = 4;
  cfg.depths = {1, 1, 1, 1, 1};
  cfg.kernel = 3;
  cfg.expansion = 2;
  cfg.ca_reduction = 2;
  cfg.seed = 5;
  return cfg;
}

TrainConfig tiny_train(const std::string& out_dir) {
  TrainConfig cfg;
  cfg.batch_size = 2;
  cfg.crop = 8;
  cfg.lr0 = 1e-3;
  cfg.decay_epochs = 500;
  cfg.epochs = 2;
  cfg.seed = 11;
  cfg.out_dir = out_dir;
  return cfg;
}

Manifest scene_manifest(const TempDir& dir, int n, int64_t h, int64_t w) {
  std::string csv = "id,left,right,gt_left,gt_right\n";
  for (int i = 0; i < n; ++i) {
    StereoPair s = make_scene(500 + static_cast<uint64_t>(i), h, w);
    const std::string base = "s" + std::to_string(i);
    save_png_rgb(dir.file(base + "_l.png"), s.left);
    save_png_rgb(dir.file(base + "_r.png"), s.right);
    csv += base + "," + base + "_l.png," + base + "_r.png," + base + "_l.png," + base +
           "_r.png\n";
  }
  spit(dir.file("m.csv"), csv);
  return load_manifest(dir.file("m.csv"));
}

size_t line_count(const std::string& text) {
  size_t n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

}  // namespace

TEST_CASE("learning rate halves on the epoch schedule") {
  TrainConfig cfg;
  cfg.lr0 = 2e-4;
  cfg.decay_epochs = 500;
  CHECK(lr_at(0, cfg) == 2e-4);
  CHECK(lr_at(499, cfg) == 2e-4);
  CHECK(lr_at(500, cfg) == 1e-4);
  CHECK(lr_at(999, cfg) == 1e-4);
  CHECK(lr_at(1000, cfg) == 5e-5);
  CHECK(lr_at(1999, cfg) == 2.5e-5);

  cfg.decay_epochs = 2;
  CHECK(lr_at(4, cfg) == 5e-5);
  CHECK_THROWS_AS(lr_at(-1, cfg), std::runtime_error);
}

TEST_CASE("adam state matches the parameter layout") {
  Model m = build_model(tiny_model());
  AdamState st = make_adam_state(m);
  const int64_t n = param_count(m);
  int64_t counted = 0;
  size_t i = 0;
  visit_params(m, [&](const std::string&, Tensor& t) {
    REQUIRE(i < st.m.size());
    CHECK(st.m[i].shape() == t.shape());
    CHECK(st.v[i].shape() == t.shape());
    counted += t.numel();
    ++i;
  });
  CHECK(counted == n);
  CHECK(st.step == 0);
}

TEST_CASE("first adam step on unit gradients matches the hand value") {
  Model m = build_model(tiny_model());
  std::vector<std::pair<std::string, Tensor*>> params = named_params(m);
  for (auto& [name, p] : params)
    for (double& v : p->data()) v = 0.0;

  std::vector<Tensor> grads;
  for (auto& [name, p] : params) grads.emplace_back(p->shape(), 1.0);

  AdamState st = make_adam_state(m);
  adam_step(m, grads, st, 0.1);
  CHECK(st.step == 1);

  const double expected = -0.1 / (1.0 + 1e-8);  // bias correction cancels on step one
  for (auto& [name, p] : params)
    for (double v : p->data()) CHECK(v == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("zero gradients leave parameters untouched but advance the step") {
  Model m = build_model(tiny_model());
  Model ref = build_model(tiny_model());
  AdamState st = make_adam_state(m);
  std::vector<Tensor> grads(named_params(m).size());  // all undefined = zero
  adam_step(m, grads, st, 0.5);
  CHECK(st.step == 1);

  auto pa = named_params(m);
  auto pb = named_params(ref);
  for (size_t i = 0; i < pa.size(); ++i) CHECK(bitwise_equal(*pa[i].second, *pb[i].second));
}

TEST_CASE("adam update is deterministic") {
  auto run = [] {
    Model m = build_model(tiny_model());
    AdamState st = make_adam_state(m);
    std::vector<Tensor> grads;
    Rng rng(77);
    for (auto& [name, p] : named_params(m)) {
      Tensor g(p->shape());
      for (double& v : g.data()) v = rng.uniform(-1.0, 1.0);
      grads.push_back(g);
    }
    adam_step(m, grads, st, 1e-3);
    adam_step(m, grads, st, 1e-3);
    return m;
  };
  Model a = run(), b = run();
  auto pa = named_params(a), pb = named_params(b);
  for (size_t i = 0; i < pa.size(); ++i) CHECK(bitwise_equal(*pa[i].second, *pb[i].second));
}

TEST_CASE("a non-finite gradient aborts naming the parameter") {
  Model m = build_model(tiny_model());
  AdamState st = make_adam_state(m);
  auto params = named_params(m);
  std::vector<Tensor> grads(params.size());
  grads[3] = Tensor(params[3].second->shape(), 0.0);
  grads[3].data()[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(adam_step(m, grads, st, 1e-3),
                       doctest::Contains(("'" + params[3].first + "'").c_str()),
                       std::runtime_error);
}

TEST_CASE("optimizer arrays round-trip through their named form") {
  Model m = build_model(tiny_model());
  AdamState st = make_adam_state(m);
  Rng rng(78);
  for (Tensor& t : st.m)
    for (double& v : t.data()) v = rng.uniform(-1.0, 1.0);
  for (Tensor& t : st.v)
    for (double& v : t.data()) v = rng.uniform(0.0, 1.0);
  st.step = 17;

  std::vector<NamedArray> arrays = adam_arrays(m, st);
  CHECK(arrays.size() == 2 * st.m.size());
  CHECK(arrays[0].name.rfind("adam.m.", 0) == 0);
  CHECK(arrays[1].name.rfind("adam.v.", 0) == 0);

  AdamState back = adam_from_arrays(m, arrays, st.step);
  CHECK(back.step == 17);
  for (size_t i = 0; i < st.m.size(); ++i) {
    CHECK(bitwise_equal(back.m[i], st.m[i]));
    CHECK(bitwise_equal(back.v[i], st.v[i]));
  }

  std::swap(arrays[0], arrays[1]);
  CHECK_THROWS_WITH_AS(adam_from_arrays(m, arrays, 1), doctest::Contains("expected 'adam.m."),
                       std::runtime_error);
  arrays.pop_back();
  CHECK_THROWS_AS(adam_from_arrays(m, arrays, 1), std::runtime_error);
}

TEST_CASE("training runs, logs and checkpoints at desk scale") {
  TempDir dir;
  Manifest manifest = scene_manifest(dir, 3, 12, 16);
  TrainConfig cfg = tiny_train(dir.file("out"));
  cfg.checkpoint_every = 1;

  TrainResult r = train(tiny_model(), cfg, manifest);
  CHECK(r.steps == 4);  // 2 epochs x ceil(3/2) batches
  CHECK(r.epochs_done == 2);
  CHECK(r.last_total > 0.0);

  const std::string log = slurp(r.log_path);
  CHECK(line_count(log) == 5);  // header + one row per step
  CHECK(log.rfind("epoch,step,l_fre,l_tv,total,lr,val_psnr,val_ssim\n", 0) == 0);

  LoadedCheckpoint final = load_checkpoint(r.final_checkpoint);
  CHECK(final.meta.epoch == 2);
  CHECK(final.meta.step == 4);
  CHECK(final.model.cfg == tiny_model());
  CHECK(final.optimizer_arrays.size() == 2 * named_params(final.model).size());

  CHECK(std::filesystem::exists(dir.file("out/checkpoint_epoch000001.ckpt")));

  // Training moved the parameters away from initialization.
  Model fresh = build_model(tiny_model());
  bool moved = false;
  auto pa = named_params(final.model), pb = named_params(fresh);
  for (size_t i = 0; i < pa.size() && !moved; ++i)
    moved = !bitwise_equal(*pa[i].second, *pb[i].second);
  CHECK(moved);
}

TEST_CASE("loss decreases when overfitting one pair") {
  TempDir dir;
  Manifest manifest = scene_manifest(dir, 1, 8, 8);
  TrainConfig cfg = tiny_train(dir.file("out"));
  cfg.batch_size = 1;
  cfg.crop = 8;
  cfg.lr0 = 2e-3;
  cfg.epochs = 50;

  TrainResult r = train(tiny_model(), cfg, manifest);
  CHECK(r.steps == 50);

  // First and last logged totals.
  std::ifstream in(r.log_path);
  std::string line;
  std::getline(in, line);  // header
  double first = 0.0, last = 0.0;
  bool have_first = false;
  while (std::getline(in, line)) {
    const size_t c1 = line.find(',');
    const size_t c2 = line.find(',', c1 + 1);
    const size_t c3 = line.find(',', c2 + 1);
    const size_t c4 = line.find(',', c3 + 1);
    const size_t c5 = line.find(',', c4 + 1);
    const double total = std::stod(line.substr(c4 + 1, c5 - c4 - 1));
    if (!have_first) {
      first = total;
      have_first = true;
    }
    last = total;
  }
  REQUIRE(have_first);
  CHECK(last < first);
  CHECK(r.last_total == doctest::Approx(last).epsilon(1e-12));
}

TEST_CASE("identical seeds reproduce logs and checkpoints bit for bit") {
  TempDir dir;
  Manifest manifest = scene_manifest(dir, 3, 12, 16);

  TrainConfig c1 = tiny_train(dir.file("a"));
  TrainConfig c2 = tiny_train(dir.file("b"));
  TrainResult r1 = train(tiny_model(), c1, manifest);
  TrainResult r2 = train(tiny_model(), c2, manifest);

  CHECK(slurp(r1.log_path) == slurp(r2.log_path));
  CHECK(slurp(r1.final_checkpoint) == slurp(r2.final_checkpoint));

  TrainConfig c3 = tiny_train(dir.file("c"));
  c3.seed = 999;
  TrainResult r3 = train(tiny_model(), c3, manifest);
  CHECK(slurp(r1.log_path) != slurp(r3.log_path));
}

TEST_CASE("resuming continues the identical trajectory") {
  TempDir dir;
  Manifest manifest = scene_manifest(dir, 4, 12, 16);

  TrainConfig full = tiny_train(dir.file("full"));
  full.epochs = 4;
  TrainResult rf = train(tiny_model(), full, manifest);

  TrainConfig part = tiny_train(dir.file("part"));
  part.epochs = 2;
  TrainResult rp = train(tiny_model(), part, manifest);

  TrainConfig rest = tiny_train(dir.file("part"));
  rest.epochs = 4;
  TrainResult rr = train(tiny_model(), rest, manifest, rp.final_checkpoint);

  CHECK(rr.steps == rf.steps - rp.steps);
  CHECK(slurp(rf.log_path) == slurp(rr.log_path));              // appended rows line up
  CHECK(slurp(rf.final_checkpoint) == slurp(rr.final_checkpoint));

  ModelConfig other = tiny_model();
  other.base_channels = 8;
  CHECK_THROWS_WITH_AS(train(other, rest, manifest, rp.final_checkpoint),
                       doctest::Contains("base_channels"), std::invalid_argument);
}

TEST_CASE("an empty manifest trains zero steps but writes a valid checkpoint") {
  TempDir dir;
  spit(dir.file("m.csv"), "id,left,right,gt_left,gt_right\n");
  Manifest manifest = load_manifest(dir.file("m.csv"));
  TrainConfig cfg = tiny_train(dir.file("out"));
  cfg.epochs = 1;

  TrainResult r = train(tiny_model(), cfg, manifest);
  CHECK(r.steps == 0);
  CHECK(r.last_total == 0.0);

  LoadedCheckpoint lc = load_checkpoint(r.final_checkpoint);
  CHECK(lc.meta.epoch == 1);
  CHECK(lc.meta.step == 0);
  Model fresh = build_model(tiny_model());
  auto pa = named_params(lc.model), pb = named_params(fresh);
  for (size_t i = 0; i < pa.size(); ++i) CHECK(bitwise_equal(*pa[i].second, *pb[i].second));

  CHECK(line_count(slurp(r.log_path)) == 1);  // header only
}

TEST_CASE("rows without ground truth are rejected up front") {
  TempDir dir;
  StereoPair s = make_scene(9, 8, 8);
  save_png_rgb(dir.file("l.png"), s.left);
  save_png_rgb(dir.file("r.png"), s.right);
  spit(dir.file("m.csv"), "id,left,right,gt_left,gt_right\nraw,l.png,r.png,,\n");
  Manifest manifest = load_manifest(dir.file("m.csv"));
  CHECK_THROWS_WITH_AS(train(tiny_model(), tiny_train(dir.file("out")), manifest),
                       doctest::Contains("(id 'raw') has no ground truth"), std::runtime_error);
}

TEST_CASE("a diverging run aborts and retains the last checkpoint") {
  TempDir dir;
  Manifest manifest = scene_manifest(dir, 2, 8, 8);
  TrainConfig cfg = tiny_train(dir.file("out"));
  // Normalization keeps moderate divergence finite, so force overflow: the
  // first update writes ~1e300 weights and the next forward pass goes inf/nan.
  cfg.lr0 = 1e300;
  cfg.epochs = 40;

  CHECK_THROWS_WITH_AS(train(tiny_model(), cfg, manifest), doctest::Contains("non-finite"),
                       std::runtime_error);

  // The pre-training checkpoint written at startup is still loadable.
  LoadedCheckpoint lc =
      load_checkpoint((std::filesystem::path(cfg.out_dir) / "checkpoint_final.ckpt").string());
  CHECK(lc.meta.step == 0);
}

TEST_CASE("validation columns appear once a hold-out exists") {
  TempDir dir;
  Manifest manifest = scene_manifest(dir, 10, 12, 16);  // 1 val row
  TrainConfig cfg = tiny_train(dir.file("out"));
  cfg.epochs = 1;
  cfg.batch_size = 9;

  TrainResult r = train(tiny_model(), cfg, manifest);
  CHECK(r.steps == 1);
  std::ifstream in(r.log_path);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  // Last two cells are non-empty numbers.
  const size_t tail = row.rfind(",,");
  CHECK(tail == std::string::npos);
  const size_t last = row.rfind(',');
  CHECK(last + 1 < row.size());
  const double val_ssim = std::stod(row.substr(last + 1));
  CHECK(val_ssim > -1.0);
  CHECK(val_ssim <= 1.0);
}

TEST_CASE("every parameter of a randomized model receives gradient signal") {
  for (uint64_t seed : {31ull, 32ull, 33ull}) {
    ModelConfig mc = tiny_model();
    mc.seed = seed;
    Model m = build_model(mc);
    Rng rng = Rng::keyed(seed, 90, 0);
    visit_params(m, [&](const std::string&, Tensor& t) {
      for (double& v : t.data()) v = rng.uniform(-0.25, 0.25);
    });

    Tensor left({1, 3, 8, 8}), right({1, 3, 8, 8}), gl({1, 3, 8, 8}), gr({1, 3, 8, 8});
    for (Tensor* t : {&left, &right, &gl, &gr})
      for (double& v : t->data()) v = rng.uniform(0.0, 1.0);

    Tape tape;
    ViewPair out = model_forward(m, left, right);
    TotalLoss tl = total_loss(out.left, out.right, gl, gr);
    tape.backward(tl.value);

    size_t dead = 0;
    for (auto& [name, p] : named_params(m)) {
      Tensor g = tape.grad(*p);
      bool alive = false;
      if (g.defined())
        for (double v : g.data()) alive = alive || v != 0.0;
      if (!alive) ++dead;
    }
    CHECK(dead == 0);
  }
}
