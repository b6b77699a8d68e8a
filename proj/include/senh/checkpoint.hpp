#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "senh/network.hpp"

namespace senh {

// Checkpoint file layout (little-endian):
//   u64    header byte length
//   bytes  JSON header: format_version, config, step, epoch, optimizer flag
//   then one record per array, model parameters first in canonical visit
//   order, optimizer arrays after:
//   u32    name length, name bytes
//   u32    rank, u64 extents[rank]
//   f64    values
// Save -> load -> save reproduces the file byte for byte.

struct CheckpointMeta {
  int64_t step = 0;
  int64_t epoch = 0;
};

struct NamedArray {
  std::string name;
  Tensor tensor;
};

void save_checkpoint(const std::string& path, Model& model, const CheckpointMeta& meta,
                     const std::vector<NamedArray>& optimizer_arrays = {});

struct LoadedCheckpoint {
  Model model;
  CheckpointMeta meta;
  std::vector<NamedArray> optimizer_arrays;
};

// Throws std::runtime_error on truncation, version mismatch, malformed
// headers, or arrays that disagree with the stored config.
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace senh
