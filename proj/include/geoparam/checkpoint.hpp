#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "geoparam/model.hpp"

namespace geoparam {

/// Binary layout, all integers little-endian:
///   "GEOPCKPT"  u32 version  u32 block count
///   per block:  u32 name length, name bytes, u64 rows, u64 cols,
///               rows * cols float64 values in row-major order
/// A text sidecar `<path>.shapes.txt` lists `name rows cols trainable`.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointBlock {
  std::string name;
  Tensor value;
  bool trainable = true;
};

/// Every slot of every layer, running statistics included.
std::vector<CheckpointBlock> checkpoint_blocks(const Model& model);

void save_checkpoint(const Model& model, const std::filesystem::path& path);
std::vector<CheckpointBlock> read_checkpoint(const std::filesystem::path& path);

/// Copies blocks into a model of the same architecture. Throws ShapeError on
/// any name or shape mismatch.
void load_checkpoint(Model& model, const std::filesystem::path& path);

}  // namespace geoparam
