#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "senh/checkpoint.hpp"
#include "senh/data.hpp"
#include "senh/loss.hpp"
#include "senh/network.hpp"

namespace senh {

struct TrainConfig {
  int64_t batch_size = 16;
  int64_t crop = 128;          // random-crop size for training rows
  double lr0 = 2e-4;
  int64_t decay_epochs = 500;  // halve the learning rate every this many epochs
  int64_t epochs = 2000;
  double lambda = 0.1;         // smoothness weight in the total loss
  ReconLoss recon = ReconLoss::frequency;
  bool synthesize = true;      // derive low-light inputs from the GT images
  SynthParams synth;
  uint64_t seed = 0;
  int64_t checkpoint_every = 0;  // epochs between periodic checkpoints; 0 = final only
  std::string out_dir = ".";
};

void validate(const TrainConfig& cfg);

// lr0 halved once per `decay_epochs` completed epochs.
double lr_at(int64_t epoch, const TrainConfig& cfg);

struct AdamConfig {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

// First/second moment per parameter, in canonical visit order.
struct AdamState {
  AdamConfig cfg;
  int64_t step = 0;
  std::vector<Tensor> m, v;
};

AdamState make_adam_state(Model& model);

// One bias-corrected update over the visited parameters. `grads[i]` pairs
// with the i-th visited parameter; an undefined grad is treated as zero. A
// non-finite gradient aborts naming the parameter.
void adam_step(Model& model, const std::vector<Tensor>& grads, AdamState& st, double lr);

// Moment arrays under checkpoint names ("adam.m.<param>", "adam.v.<param>"),
// and their reconstruction when resuming.
std::vector<NamedArray> adam_arrays(Model& model, const AdamState& st);
AdamState adam_from_arrays(Model& model, const std::vector<NamedArray>& arrays, int64_t step);

struct TrainResult {
  int64_t steps = 0;           // optimization steps performed in this call
  int64_t epochs_done = 0;     // total completed epochs including resumed ones
  double last_total = 0.0;     // total loss of the final step (0 when no steps ran)
  std::string final_checkpoint;
  std::string log_path;
};

// Runs the optimization loop: per epoch, shuffle the training rows, derive
// each batch (synthesis + shared random crop), take one Adam step per batch,
// and log `epoch,step,l_fre,l_tv,total,lr,val_psnr,val_ssim` rows to
// train_log.csv in cfg.out_dir. The last tenth of the manifest rows is held
// out and scored (PSNR/SSIM of the clamped outputs, averaged over both views)
// on each epoch's final row. Checkpoints carry the optimizer state; one is
// written before the first epoch, every cfg.checkpoint_every epochs, and at
// the end. A non-finite loss or gradient aborts with the last written
// checkpoint intact. `resume_from` continues a previous run (the stored
// model config must match cfg_model exactly).
TrainResult train(const ModelConfig& cfg_model, const TrainConfig& cfg,
                  const Manifest& manifest,
                  const std::optional<std::string>& resume_from = std::nullopt);

}  // namespace senh
