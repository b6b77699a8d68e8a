#include "senh/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "senh/metrics.hpp"
#include "senh/ops.hpp"

namespace senh {
namespace {

namespace fs = std::filesystem;

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("trainer: " + msg); }

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Tensor clamp01(const Tensor& t) {
  Tensor out = t.clone();
  for (double& v : out.data()) v = std::clamp(v, 0.0, 1.0);
  return out;
}

struct ValScores {
  double psnr = 0.0, ssim = 0.0;
  bool present = false;
};

// Mean over held-out rows of the per-pair (left+right)/2 PSNR and SSIM of
// clamped outputs. Inputs are synthesized with epoch-independent seeds so the
// metric is comparable across the run.
ValScores score_validation(const Model& model, const Manifest& manifest,
                           const std::vector<size_t>& rows, const TrainConfig& cfg) {
  ValScores s;
  if (rows.empty()) return s;
  double psnr_sum = 0.0, ssim_sum = 0.0;
  for (size_t r : rows) {
    StereoPair p = load_pair(manifest, r);
    if (cfg.synthesize)
      p = synthesize_lowlight(p, Rng::keyed(cfg.seed, 6, r).next_u64(), cfg.synth);
    p = center_crop_div4(p);
    Batch b = stack_pairs({p});
    ViewPair out = model_forward(model, b.left, b.right);
    Tensor el = clamp01(out.left), er = clamp01(out.right);
    psnr_sum += 0.5 * (psnr(el, b.gt_left) + psnr(er, b.gt_right));
    const int64_t min_edge = std::min(el.extent(2), el.extent(3));
    ssim_sum += min_edge >= 11
                    ? 0.5 * (ssim(el, b.gt_left) + ssim(er, b.gt_right))
                    : std::numeric_limits<double>::quiet_NaN();
  }
  s.psnr = psnr_sum / static_cast<double>(rows.size());
  s.ssim = ssim_sum / static_cast<double>(rows.size());
  s.present = true;
  return s;
}

}  // namespace

void validate(const TrainConfig& cfg) {
  if (!(cfg.lr0 > 0.0)) fail("lr0 must be positive");
  if (cfg.epochs < 1) fail("epochs must be >= 1");
  if (cfg.batch_size < 1) fail("batch_size must be >= 1");
  if (cfg.crop < 4 || cfg.crop % 4 != 0) fail("crop must be a positive multiple of 4");
  if (cfg.decay_epochs < 1) fail("decay_epochs must be >= 1");
  if (cfg.lambda < 0.0) fail("lambda must be >= 0");
  if (cfg.checkpoint_every < 0) fail("checkpoint_every must be >= 0");
}

double lr_at(int64_t epoch, const TrainConfig& cfg) {
  if (epoch < 0) fail("epoch must be >= 0");
  return std::ldexp(cfg.lr0, -static_cast<int>(epoch / cfg.decay_epochs));
}

AdamState make_adam_state(Model& model) {
  AdamState st;
  visit_params(model, [&](const std::string&, Tensor& t) {
    st.m.emplace_back(t.shape(), 0.0);
    st.v.emplace_back(t.shape(), 0.0);
  });
  return st;
}

void adam_step(Model& model, const std::vector<Tensor>& grads, AdamState& st, double lr) {
  std::vector<std::pair<std::string, Tensor*>> params = named_params(model);
  if (grads.size() != params.size() || st.m.size() != params.size())
    fail("adam: gradient/state count does not match the " + std::to_string(params.size()) +
         " model parameters");

  st.step += 1;
  const double bc1 = 1.0 - std::pow(st.cfg.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.cfg.beta2, static_cast<double>(st.step));

  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i].second;
    Tensor& m = st.m[i];
    Tensor& v = st.v[i];
    const bool has_grad = grads[i].defined();
    if (has_grad && grads[i].shape() != p.shape())
      fail("adam: gradient shape " + shape_str(grads[i].shape()) + " does not match '" +
           params[i].first + "' " + shape_str(p.shape()));
    for (int64_t j = 0; j < p.numel(); ++j) {
      const double g = has_grad ? grads[i].data()[static_cast<size_t>(j)] : 0.0;
      if (!std::isfinite(g))
        throw std::runtime_error("trainer: adam: non-finite gradient in '" + params[i].first +
                                 "'");
      double& mj = m.data()[static_cast<size_t>(j)];
      double& vj = v.data()[static_cast<size_t>(j)];
      mj = st.cfg.beta1 * mj + (1.0 - st.cfg.beta1) * g;
      vj = st.cfg.beta2 * vj + (1.0 - st.cfg.beta2) * g * g;
      p.data()[static_cast<size_t>(j)] -=
          lr * (mj / bc1) / (std::sqrt(vj / bc2) + st.cfg.eps);
    }
  }
}

std::vector<NamedArray> adam_arrays(Model& model, const AdamState& st) {
  std::vector<std::pair<std::string, Tensor*>> params = named_params(model);
  if (st.m.size() != params.size()) fail("adam: state does not match the model");
  std::vector<NamedArray> out;
  out.reserve(2 * params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    out.push_back({"adam.m." + params[i].first, st.m[i]});
    out.push_back({"adam.v." + params[i].first, st.v[i]});
  }
  return out;
}

AdamState adam_from_arrays(Model& model, const std::vector<NamedArray>& arrays, int64_t step) {
  std::vector<std::pair<std::string, Tensor*>> params = named_params(model);
  if (arrays.size() != 2 * params.size())
    fail("checkpoint optimizer state has " + std::to_string(arrays.size()) +
         " arrays, expected " + std::to_string(2 * params.size()) +
         " (was this checkpoint written by train?)");
  AdamState st;
  st.step = step;
  for (size_t i = 0; i < params.size(); ++i) {
    for (size_t half = 0; half < 2; ++half) {
      const NamedArray& a = arrays[2 * i + half];
      const std::string want = (half == 0 ? "adam.m." : "adam.v.") + params[i].first;
      if (a.name != want)
        fail("optimizer state mismatch: expected '" + want + "', found '" + a.name + "'");
      if (a.tensor.shape() != params[i].second->shape())
        fail("optimizer array '" + a.name + "' has shape " + shape_str(a.tensor.shape()) +
             ", parameter expects " + shape_str(params[i].second->shape()));
      (half == 0 ? st.m : st.v).push_back(a.tensor);
    }
  }
  return st;
}

TrainResult train(const ModelConfig& cfg_model, const TrainConfig& cfg,
                  const Manifest& manifest, const std::optional<std::string>& resume_from) {
  validate(cfg_model);
  validate(cfg);
  fs::create_directories(cfg.out_dir);

  for (size_t i = 0; i < manifest.rows.size(); ++i)
    if (!manifest.rows[i].has_gt())
      fail("manifest row " + std::to_string(i + 1) + " (id '" + manifest.rows[i].id +
           "') has no ground truth");

  Model model;
  AdamState adam;
  int64_t start_epoch = 0;
  if (resume_from) {
    LoadedCheckpoint lc = load_checkpoint(*resume_from);
    require_same(cfg_model, lc.model.cfg);
    model = std::move(lc.model);
    adam = adam_from_arrays(model, lc.optimizer_arrays, lc.meta.step);
    start_epoch = lc.meta.epoch;
    if (start_epoch > cfg.epochs)
      fail("checkpoint is at epoch " + std::to_string(start_epoch) + ", past the requested " +
           std::to_string(cfg.epochs));
  } else {
    model = build_model(cfg_model);
    adam = make_adam_state(model);
  }

  const size_t n = manifest.rows.size();
  const size_t n_val = n / 10;  // fixed hold-out: the last tenth of the rows
  std::vector<size_t> train_rows, val_rows;
  for (size_t i = 0; i < n - n_val; ++i) train_rows.push_back(i);
  for (size_t i = n - n_val; i < n; ++i) val_rows.push_back(i);

  TrainResult result;
  result.final_checkpoint = (fs::path(cfg.out_dir) / "checkpoint_final.ckpt").string();
  result.log_path = (fs::path(cfg.out_dir) / "train_log.csv").string();

  const bool append = resume_from.has_value() && fs::exists(result.log_path);
  std::ofstream log(result.log_path, append ? std::ios::app : std::ios::trunc);
  if (!log) fail("cannot write log '" + result.log_path + "'");
  if (!append) log << "epoch,step,l_fre,l_tv,total,lr,val_psnr,val_ssim\n";

  if (!resume_from)
    save_checkpoint(result.final_checkpoint, model, {adam.step, 0}, adam_arrays(model, adam));

  for (int64_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    IterateOptions opt;
    opt.batch = cfg.batch_size;
    opt.crop = cfg.crop;
    opt.synthesize = cfg.synthesize;
    opt.synth = cfg.synth;
    opt.seed = cfg.seed;
    opt.epoch = static_cast<uint64_t>(epoch);
    BatchStream stream(manifest, train_rows, opt);
    const double lr = lr_at(epoch, cfg);
    const size_t total_batches = stream.batches();

    size_t batch_index = 0;
    while (std::optional<Batch> b = stream.next()) {
      TotalLoss tl;
      std::vector<Tensor> grads;
      {
        Tape tape;
        ViewPair out = model_forward(model, b->left, b->right);
        tl = total_loss(out.left, out.right, b->gt_left, b->gt_right, cfg.lambda, cfg.recon);
        if (!std::isfinite(tl.report.total))
          fail("non-finite loss at epoch " + std::to_string(epoch) + " step " +
               std::to_string(adam.step + 1) + "; the last written checkpoint is intact");
        tape.backward(tl.value);
        for (auto& [name, p] : named_params(model)) grads.push_back(tape.grad(*p));
      }
      adam_step(model, grads, adam, lr);
      result.steps += 1;
      result.last_total = tl.report.total;

      log << epoch << ',' << adam.step << ',' << num(tl.report.l_rec) << ','
          << num(tl.report.l_tv) << ',' << num(tl.report.total) << ',' << num(lr);
      if (++batch_index == total_batches) {
        const ValScores vs = score_validation(model, manifest, val_rows, cfg);
        if (vs.present)
          log << ',' << num(vs.psnr) << ',' << num(vs.ssim) << '\n';
        else
          log << ",,\n";
      } else {
        log << ",,\n";
      }
      log.flush();
    }

    if (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0 &&
        epoch + 1 < cfg.epochs) {
      char name[48];
      std::snprintf(name, sizeof name, "checkpoint_epoch%06lld.ckpt",
                    static_cast<long long>(epoch + 1));
      save_checkpoint((fs::path(cfg.out_dir) / name).string(), model, {adam.step, epoch + 1},
                      adam_arrays(model, adam));
    }
  }

  save_checkpoint(result.final_checkpoint, model, {adam.step, cfg.epochs},
                  adam_arrays(model, adam));
  result.epochs_done = cfg.epochs;
  return result;
}

}  // namespace senh
