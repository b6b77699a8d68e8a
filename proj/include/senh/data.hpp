#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "senh/rng.hpp"
#include "senh/tensor.hpp"

namespace senh {

// A rectified stereo item: inputs (and optional ground truth) as [3,H,W]
// tensors with values in [0,1]. Left and right always share one shape.
struct StereoPair {
  std::string id;
  Tensor left, right;
  std::optional<Tensor> gt_left, gt_right;  // both present or both absent
};

void validate(const StereoPair& p);

struct ManifestRow {
  std::string id;
  std::string left, right;        // image paths relative to the manifest file
  std::string gt_left, gt_right;  // empty when the row carries no ground truth
  bool has_gt() const { return !gt_left.empty(); }
};

struct Manifest {
  std::string dir;  // directory the row paths resolve against
  std::vector<ManifestRow> rows;
};

// CSV with header `id,left,right,gt_left,gt_right`. Ids must be unique, every
// referenced file must exist, and gt columns must be set or empty together;
// violations throw naming the offending row.
Manifest load_manifest(const std::string& path);

// Loads the row's PNGs and checks the shape invariants.
StereoPair load_pair(const Manifest& m, size_t row);

// Photometric degradation ranges. A degenerate range (lo == hi) pins the
// parameter, e.g. {1,1},{1,1},{0,0} makes synthesis the identity.
struct SynthParams {
  double gamma_lo = 2.0, gamma_hi = 3.5;  // darkening exponent
  double scale_lo = 0.25, scale_hi = 0.6;  // linear brightness scale
  double sigma_lo = 0.01, sigma_hi = 0.05;  // sensor noise std
};

struct SynthRecipe {
  double gamma = 1.0, scale = 1.0, sigma = 0.0;
};

// Derives low-light inputs from the pair's ground truth:
//   low = clamp(scale * gt^gamma + noise, 0, 1)
// gamma/scale/sigma are drawn once per pair (both views see the same
// photometric state); the Gaussian noise is fresh per pixel and view. The
// result is fully determined by `seed`.
StereoPair synthesize_lowlight(const StereoPair& gt, uint64_t seed,
                               const SynthParams& params = {},
                               SynthRecipe* recipe = nullptr);

// One crop window drawn from `seed`, applied identically to all images of the
// pair so horizontal correspondence is preserved. `size` must be a multiple
// of 4 and fit both extents.
StereoPair random_crop(const StereoPair& p, int64_t size, uint64_t seed);

// Largest centered crop whose extents are multiples of 4.
StereoPair center_crop_div4(const StereoPair& p);

// Pairs stacked along a new batch axis. GT tensors are present only when
// every stacked pair carries ground truth.
struct Batch {
  std::vector<std::string> ids;
  Tensor left, right;        // [B,3,h,w]
  Tensor gt_left, gt_right;  // undefined when absent
  bool has_gt() const { return gt_left.defined(); }
};

Batch stack_pairs(const std::vector<StereoPair>& ps);

// Deterministic epoch plan: `rows` indices shuffled by `shuffle_seed` and
// chunked into groups of `batch` (the last group may be short).
std::vector<std::vector<size_t>> epoch_order(size_t rows, int64_t batch, uint64_t shuffle_seed);

struct IterateOptions {
  int64_t batch = 1;
  int64_t crop = 0;          // 0 keeps full frames (center-cropped to /4)
  bool synthesize = false;   // derive low-light inputs from GT per epoch
  SynthParams synth;
  uint64_t seed = 0;
  uint64_t epoch = 0;
};

// Pull-based pass over selected manifest rows. Per-row randomness is keyed by
// (seed, epoch, position), so the stream's results do not depend on how or
// when batches are pulled.
class BatchStream {
 public:
  BatchStream(const Manifest& m, std::vector<size_t> rows, const IterateOptions& opt);

  std::optional<Batch> next();
  size_t batches() const { return order_.size(); }

 private:
  const Manifest* manifest_;
  std::vector<size_t> rows_;
  std::vector<std::vector<size_t>> order_;  // positions into rows_
  IterateOptions opt_;
  size_t cursor_ = 0;
};

// Procedural ground-truth stereo scene: a smooth random field whose right
// view is the left view shifted horizontally (wrapping) by a disparity in
// [1, max_disparity]. Used by tests and the synthetic-data command.
StereoPair make_scene(uint64_t seed, int64_t h, int64_t w, int64_t max_disparity = 6);

}  // namespace senh
