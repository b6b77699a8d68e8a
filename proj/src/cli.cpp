#include "senh/cli.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "senh/checkpoint.hpp"
#include "senh/config.hpp"
#include "senh/data.hpp"
#include "senh/gradcheck.hpp"
#include "senh/metrics.hpp"
#include "senh/network.hpp"
#include "senh/png_io.hpp"
#include "senh/rng.hpp"
#include "senh/trainer.hpp"

namespace senh {
namespace {

namespace fs = std::filesystem;

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string num17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int64_t up4(int64_t n) { return (n + 3) / 4 * 4; }

// [3,h,w] -> [1,3,H,W] with H,W the next multiples of 4; the new bottom/right
// rows mirror the interior (no edge repeat), so crops at (0,0) recover the
// original exactly.
Tensor pad_reflect_batch(const Tensor& img) {
  const Shape& s = img.shape();
  int64_t h = s[1], w = s[2];
  int64_t hh = up4(h), ww = up4(w);
  if (hh - h > h - 1 || ww - w > w - 1)
    throw std::runtime_error("images must be at least 3x3 to pad to a multiple of 4");
  Tensor out({1, 3, hh, ww});
  const double* src = img.ptr();
  double* dst = out.ptr();
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t y = 0; y < hh; ++y) {
      int64_t sy = y < h ? y : 2 * h - 2 - y;
      for (int64_t x = 0; x < ww; ++x) {
        int64_t sx = x < w ? x : 2 * w - 2 - x;
        dst[(c * hh + y) * ww + x] = src[(c * h + sy) * w + sx];
      }
    }
  return out;
}

// [1,3,H,W] -> [3,h,w]: the top-left window, clamped to [0,1].
Tensor crop_clamp(const Tensor& t, int64_t h, int64_t w) {
  const Shape& s = t.shape();
  int64_t hh = s[2], ww = s[3];
  Tensor out({3, h, w});
  const double* src = t.ptr();
  double* dst = out.ptr();
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x) {
        double v = src[(c * hh + y) * ww + x];
        dst[(c * h + y) * w + x] = std::clamp(v, 0.0, 1.0);
      }
  return out;
}

// Pads both views, runs the model, and crops the outputs back to the input
// size (clamped for export and metrics).
ViewPair enhance_pair(const Model& model, const Tensor& left, const Tensor& right) {
  if (left.shape() != right.shape())
    throw std::runtime_error("left and right images differ in size: " + shape_str(left.shape()) +
                             " vs " + shape_str(right.shape()));
  int64_t h = left.shape()[1], w = left.shape()[2];
  ViewPair out = model_forward(model, pad_reflect_batch(left), pad_reflect_batch(right));
  return {crop_clamp(out.left, h, w), crop_clamp(out.right, h, w)};
}

std::string config_footer() {
  std::ostringstream os;
  os << "Config keys (config file lines and --set key=value):\n";
  for (const ConfigKeyDoc& d : config_key_docs()) {
    os << "  " << std::left << std::setw(18) << d.key << " " << std::setw(14)
       << ("[" + d.default_value + "]") << " " << d.help << "\n";
  }
  return os.str();
}

// ---- train ------------------------------------------------------------------

struct TrainOpts {
  std::string config;
  std::vector<std::string> sets;       // raw key=value overrides
  std::vector<std::string> ablations;  // component toggles
  std::string resume;
  // dedicated flags, kept as text and funneled through apply_override so the
  // config layer owns all value validation
  std::string manifest, out_dir, epochs, batch_size, crop, lr0, seed, loss, kernel,
      base_channels, checkpoint_every;
};

std::string ablation_key(const std::string& name) {
  static const std::vector<std::pair<std::string, std::string>> table = {
      {"no_cross_view", "no_cross_view"}, {"no_cvi", "no_cross_view"},
      {"no_cross_scale", "no_cross_scale"}, {"no_csi", "no_cross_scale"},
      {"no_spatial", "no_spatial"}, {"no_lrdc", "no_spatial"},
      {"no_channel", "no_channel"}, {"no_ecir", "no_channel"},
  };
  for (const auto& [alias, key] : table)
    if (name == alias) return key;
  std::string valid;
  for (const auto& [alias, key] : table) valid += (valid.empty() ? "" : ", ") + alias;
  throw std::runtime_error("unknown ablation '" + name + "' (valid: " + valid + ")");
}

int run_train(const TrainOpts& o) {
  CliConfig cfg = o.config.empty() ? CliConfig{} : load_config(o.config);
  for (const std::string& kv : o.sets) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("--set expects key=value, got '" + kv + "'");
    apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  for (const std::string& name : o.ablations) apply_override(cfg, ablation_key(name), "true");
  auto flag = [&](const std::string& key, const std::string& value) {
    if (!value.empty()) apply_override(cfg, key, value);
  };
  flag("manifest", o.manifest);
  flag("out_dir", o.out_dir);
  flag("epochs", o.epochs);
  flag("batch_size", o.batch_size);
  flag("crop", o.crop);
  flag("lr0", o.lr0);
  flag("seed", o.seed);
  flag("loss", o.loss);
  flag("kernel", o.kernel);
  flag("base_channels", o.base_channels);
  flag("checkpoint_every", o.checkpoint_every);

  if (cfg.manifest.empty())
    throw std::runtime_error("no manifest given (--manifest or the manifest config key)");
  Manifest m = load_manifest(cfg.manifest);
  std::optional<std::string> resume;
  if (!o.resume.empty()) resume = o.resume;

  TrainResult r = train(cfg.model, cfg.train, m, resume);
  std::cout << "trained " << r.steps << " steps over " << r.epochs_done
            << " epochs, final loss " << num17(r.last_total) << "\n"
            << "checkpoint: " << r.final_checkpoint << "\n"
            << "log: " << r.log_path << "\n";
  return 0;
}

// ---- enhance ----------------------------------------------------------------

struct EnhanceOpts {
  std::string checkpoint, left, right, out;
};

int run_enhance(const EnhanceOpts& o) {
  LoadedCheckpoint ck = load_checkpoint(o.checkpoint);
  Tensor left = load_png_rgb(o.left);
  Tensor right = load_png_rgb(o.right);
  ViewPair out = enhance_pair(ck.model, left, right);
  fs::create_directories(o.out);
  std::string lp = (fs::path(o.out) / "left_enhanced.png").string();
  std::string rp = (fs::path(o.out) / "right_enhanced.png").string();
  save_png_rgb(lp, out.left);
  save_png_rgb(rp, out.right);
  std::cout << "wrote " << lp << "\nwrote " << rp << "\n";
  return 0;
}

// ---- eval -------------------------------------------------------------------

struct EvalOpts {
  std::string checkpoint, manifest, out;
};

int run_eval(const EvalOpts& o) {
  LoadedCheckpoint ck = load_checkpoint(o.checkpoint);
  Manifest m = load_manifest(o.manifest);
  if (m.rows.empty()) throw std::runtime_error("eval: manifest has no rows");
  for (const ManifestRow& row : m.rows)
    if (!row.has_gt())
      throw std::runtime_error("eval: row (id '" + row.id + "') has no ground truth");
  fs::create_directories(o.out);

  std::ostringstream csv;
  csv << "id,psnr_left,ssim_left,psnr_right,ssim_right,psnr_pair,ssim_pair\n";
  double sum_psnr_left = 0, sum_ssim_left = 0, sum_psnr_pair = 0, sum_ssim_pair = 0;
  for (size_t i = 0; i < m.rows.size(); ++i) {
    StereoPair p = load_pair(m, i);
    ViewPair out = enhance_pair(ck.model, p.left, p.right);
    double pl = psnr(out.left, *p.gt_left), sl = ssim(out.left, *p.gt_left);
    double pr = psnr(out.right, *p.gt_right), sr = ssim(out.right, *p.gt_right);
    double pp = 0.5 * (pl + pr), sp = 0.5 * (sl + sr);
    csv << p.id << "," << psnr_csv(pl) << "," << fixed6(sl) << "," << psnr_csv(pr) << ","
        << fixed6(sr) << "," << psnr_csv(pp) << "," << fixed6(sp) << "\n";
    sum_psnr_left += pl;
    sum_ssim_left += sl;
    sum_psnr_pair += pp;
    sum_ssim_pair += sp;
    save_png_gray((fs::path(o.out) / (p.id + "_error_left.png")).string(),
                  error_map(out.left, *p.gt_left));
    save_png_gray((fs::path(o.out) / (p.id + "_error_right.png")).string(),
                  error_map(out.right, *p.gt_right));
  }
  double n = static_cast<double>(m.rows.size());
  std::string summary = "left: " + format_metric_pair(sum_psnr_left / n, sum_ssim_left / n) +
                        "\npair: " + format_metric_pair(sum_psnr_pair / n, sum_ssim_pair / n) +
                        "\n";

  std::ofstream cf(fs::path(o.out) / "eval.csv", std::ios::binary);
  cf << csv.str();
  std::ofstream sf(fs::path(o.out) / "summary.txt", std::ios::binary);
  sf << summary;
  if (!cf || !sf) throw std::runtime_error("eval: failed to write outputs to " + o.out);
  std::cout << summary;
  return 0;
}

// ---- synth ------------------------------------------------------------------

struct SynthOpts {
  std::string out;
  uint64_t seed = 0;
  std::string manifest;  // take ground truth from these rows
  int64_t scenes = 0;    // or generate this many procedural scenes
  int64_t height = 128, width = 128, max_disparity = 6;
  SynthParams params;
};

int run_synth(const SynthOpts& o) {
  if (o.manifest.empty() == (o.scenes == 0))
    throw std::runtime_error("synth: give exactly one source: --manifest or --scenes");
  if (o.scenes < 0) throw std::runtime_error("synth: --scenes must be non-negative");
  fs::create_directories(o.out);

  std::vector<StereoPair> gts;
  if (!o.manifest.empty()) {
    Manifest src = load_manifest(o.manifest);
    for (size_t i = 0; i < src.rows.size(); ++i) {
      StereoPair p = load_pair(src, i);
      // Rows without GT are treated as clean captures: their inputs become
      // the ground truth that synthesis degrades.
      if (!p.gt_left) {
        p.gt_left = p.left;
        p.gt_right = p.right;
      } else {
        p.left = *p.gt_left;
        p.right = *p.gt_right;
      }
      gts.push_back(std::move(p));
    }
  } else {
    for (int64_t i = 0; i < o.scenes; ++i) {
      StereoPair p = make_scene(Rng::keyed(o.seed, 5, static_cast<uint64_t>(i)).next_u64(),
                                o.height, o.width, o.max_disparity);
      char id[32];
      std::snprintf(id, sizeof id, "scene%03lld", static_cast<long long>(i));
      p.id = id;
      gts.push_back(std::move(p));
    }
  }

  std::ostringstream mf, rf;
  mf << "id,left,right,gt_left,gt_right\n";
  rf << "id,gamma,scale,sigma\n";
  for (size_t i = 0; i < gts.size(); ++i) {
    SynthRecipe rec;
    StereoPair low =
        synthesize_lowlight(gts[i], Rng::keyed(o.seed, 7, i).next_u64(), o.params, &rec);
    const std::string& id = low.id;
    save_png_rgb((fs::path(o.out) / (id + "_low_l.png")).string(), low.left);
    save_png_rgb((fs::path(o.out) / (id + "_low_r.png")).string(), low.right);
    save_png_rgb((fs::path(o.out) / (id + "_gt_l.png")).string(), *low.gt_left);
    save_png_rgb((fs::path(o.out) / (id + "_gt_r.png")).string(), *low.gt_right);
    mf << id << "," << id << "_low_l.png," << id << "_low_r.png," << id << "_gt_l.png," << id
       << "_gt_r.png\n";
    rf << id << "," << num17(rec.gamma) << "," << num17(rec.scale) << "," << num17(rec.sigma)
       << "\n";
  }
  {
    std::ofstream f(fs::path(o.out) / "recipes.csv", std::ios::binary);
    f << rf.str();
    if (!f) throw std::runtime_error("synth: failed to write recipes.csv");
  }
  {
    // Written last so an interrupted run never leaves a manifest that names
    // missing files.
    std::ofstream f(fs::path(o.out) / "manifest.csv", std::ios::binary);
    f << mf.str();
    if (!f) throw std::runtime_error("synth: failed to write manifest.csv");
  }
  std::cout << "wrote " << gts.size() << " pairs to " << o.out << "\n";
  return 0;
}

// ---- gradcheck --------------------------------------------------------------

struct GradcheckOpts {
  std::string scope = "all";
  uint64_t seed = 0;
};

int run_gradcheck(const GradcheckOpts& o) {
  namespace gk = senh::gradcheck;
  std::vector<gk::Check> cs;
  auto take = [&](std::vector<gk::Check> suite) {
    for (gk::Check& c : suite) cs.push_back(std::move(c));
  };
  if (o.scope == "ops" || o.scope == "all") take(gk::op_suite(o.seed));
  if (o.scope == "blocks" || o.scope == "all") take(gk::block_suite(o.seed));
  if (o.scope == "model" || o.scope == "all") take(gk::model_suite(o.seed));
  std::vector<gk::CheckResult> rs = gk::run_checks(cs, o.seed);
  gk::print_results(rs, std::cout);
  return gk::exit_code(rs);
}

}  // namespace

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"Low-light stereo image enhancement", "stereo-enhance"};
  app.require_subcommand(1);
  app.footer(config_footer());

  TrainOpts to;
  CLI::App* tc = app.add_subcommand("train", "Train a model on a stereo manifest");
  tc->add_option("--config", to.config, "Config file (flat key = value lines)")
      ->check(CLI::ExistingFile);
  tc->add_option("--set", to.sets, "Override one config key (key=value, repeatable)");
  tc->add_option("--ablation", to.ablations,
                 "Disable a component: no_cross_view (no_cvi), no_cross_scale (no_csi), "
                 "no_spatial (no_lrdc), no_channel (no_ecir); repeatable");
  tc->add_option("--resume", to.resume, "Continue from a checkpoint")->check(CLI::ExistingFile);
  tc->add_option("--manifest", to.manifest, "Training manifest CSV");
  tc->add_option("--out-dir", to.out_dir, "Directory for checkpoints and the log");
  tc->add_option("--epochs", to.epochs, "Total epochs to train");
  tc->add_option("--batch-size", to.batch_size, "Pairs per optimization step");
  tc->add_option("--crop", to.crop, "Square crop size (0 = full frames)");
  tc->add_option("--lr0", to.lr0, "Initial learning rate");
  tc->add_option("--seed", to.seed, "Seed for init, shuffling, and synthesis");
  tc->add_option("--loss", to.loss, "Reconstruction loss: fre, l1, l2, or ssim");
  tc->add_option("--kernel-size", to.kernel, "Spatial mixing kernel size (odd)");
  tc->add_option("--base-channels", to.base_channels, "Channel width of the first stage");
  tc->add_option("--checkpoint-every", to.checkpoint_every,
                 "Epochs between periodic checkpoints (0 = final only)");
  tc->footer(config_footer());

  EnhanceOpts eo;
  CLI::App* ec = app.add_subcommand("enhance", "Enhance one stereo pair with a checkpoint");
  ec->add_option("--checkpoint", eo.checkpoint, "Model checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  ec->add_option("--left", eo.left, "Left input PNG")->required()->check(CLI::ExistingFile);
  ec->add_option("--right", eo.right, "Right input PNG")->required()->check(CLI::ExistingFile);
  ec->add_option("--out", eo.out, "Output directory")->required();

  EvalOpts vo;
  CLI::App* vc = app.add_subcommand("eval", "Score a checkpoint against ground truth");
  vc->add_option("--checkpoint", vo.checkpoint, "Model checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  vc->add_option("--manifest", vo.manifest, "Manifest CSV; every row needs ground truth")
      ->required()
      ->check(CLI::ExistingFile);
  vc->add_option("--out", vo.out, "Directory for eval.csv, summary.txt, and error maps")
      ->required();

  SynthOpts so;
  CLI::App* sc = app.add_subcommand("synth", "Produce low-light pairs from clean images");
  sc->add_option("--out", so.out, "Output directory")->required();
  sc->add_option("--seed", so.seed, "Seed for photometric draws and scenes");
  sc->add_option("--manifest", so.manifest, "Source manifest of clean pairs")
      ->check(CLI::ExistingFile);
  sc->add_option("--scenes", so.scenes, "Generate this many procedural stereo scenes");
  sc->add_option("--height", so.height, "Scene height")->check(CLI::PositiveNumber);
  sc->add_option("--width", so.width, "Scene width")->check(CLI::PositiveNumber);
  sc->add_option("--max-disparity", so.max_disparity, "Largest scene disparity")
      ->check(CLI::PositiveNumber);
  sc->add_option("--gamma-lo", so.params.gamma_lo, "Darkening exponent, lower bound");
  sc->add_option("--gamma-hi", so.params.gamma_hi, "Darkening exponent, upper bound");
  sc->add_option("--scale-lo", so.params.scale_lo, "Brightness scale, lower bound");
  sc->add_option("--scale-hi", so.params.scale_hi, "Brightness scale, upper bound");
  sc->add_option("--sigma-lo", so.params.sigma_lo, "Noise std, lower bound");
  sc->add_option("--sigma-hi", so.params.sigma_hi, "Noise std, upper bound");

  GradcheckOpts go;
  CLI::App* gc = app.add_subcommand("gradcheck", "Finite-difference check of every gradient");
  gc->add_option("scope", go.scope, "ops, blocks, model, or all")
      ->check(CLI::IsMember({"ops", "blocks", "model", "all"}));
  gc->add_option("--seed", go.seed, "Seed for check inputs");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (tc->parsed()) return run_train(to);
    if (ec->parsed()) return run_enhance(eo);
    if (vc->parsed()) return run_eval(vo);
    if (sc->parsed()) return run_synth(so);
    if (gc->parsed()) return run_gradcheck(go);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace senh
