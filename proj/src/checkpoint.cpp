#include "geoparam/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "geoparam/csv.hpp"
#include "geoparam/error.hpp"

namespace geoparam {

namespace {

constexpr char kMagic[8] = {'G', 'E', 'O', 'P', 'C', 'K', 'P', 'T'};

template <typename T>
void put_le(std::ostream& out, T v) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in, const std::filesystem::path& path) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw IoError(path.string() + ": truncated checkpoint");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

}  // namespace

std::vector<CheckpointBlock> checkpoint_blocks(const Model& model) {
  std::vector<CheckpointBlock> blocks;
  for (std::size_t l = 0; l < model.params.size(); ++l) {
    for (const ParamSlot& s : model.params[l].slots()) {
      blocks.push_back({"layer" + std::to_string(l) + "." + s.name, s.value, s.trainable});
    }
  }
  return blocks;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  const auto blocks = checkpoint_blocks(model);
  {
    std::ofstream out = csv::open_output(path);
    out.write(kMagic, sizeof kMagic);
    put_le<std::uint32_t>(out, kCheckpointVersion);
    put_le<std::uint32_t>(out, std::uint32_t(blocks.size()));
    for (const CheckpointBlock& b : blocks) {
      put_le<std::uint32_t>(out, std::uint32_t(b.name.size()));
      out.write(b.name.data(), std::streamsize(b.name.size()));
      put_le<std::uint64_t>(out, std::uint64_t(b.value.rows()));
      put_le<std::uint64_t>(out, std::uint64_t(b.value.cols()));
      for (Eigen::Index i = 0; i < b.value.rows(); ++i) {
        for (Eigen::Index j = 0; j < b.value.cols(); ++j) put_le<double>(out, b.value(i, j));
      }
    }
    if (!out) throw IoError("write failed for " + path.string());
  }
  std::ofstream side = csv::open_output(path.string() + ".shapes.txt");
  side << "# name rows cols trainable\n";
  for (const CheckpointBlock& b : blocks) {
    side << b.name << ' ' << b.value.rows() << ' ' << b.value.cols() << ' ' << (b.trainable ? 1 : 0) << '\n';
  }
  if (!side) throw IoError("write failed for " + path.string() + ".shapes.txt");
}

std::vector<CheckpointBlock> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in = csv::open_input(path);
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw IoError(path.string() + ": not a geoparam checkpoint");
  }
  const auto version = get_le<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw IoError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = get_le<std::uint32_t>(in, path);
  std::vector<CheckpointBlock> blocks;
  for (std::uint32_t k = 0; k < count; ++k) {
    CheckpointBlock b;
    const auto len = get_le<std::uint32_t>(in, path);
    if (len > 4096) throw IoError(path.string() + ": corrupt block name length");
    b.name.resize(len);
    if (!in.read(b.name.data(), len)) throw IoError(path.string() + ": truncated checkpoint");
    const auto rows = get_le<std::uint64_t>(in, path);
    const auto cols = get_le<std::uint64_t>(in, path);
    if (rows > (1u << 26) || cols > (1u << 26) || rows * cols > (1u << 28)) {
      throw IoError(path.string() + ": corrupt block shape");
    }
    b.value.resize(Eigen::Index(rows), Eigen::Index(cols));
    for (Eigen::Index i = 0; i < b.value.rows(); ++i) {
      for (Eigen::Index j = 0; j < b.value.cols(); ++j) b.value(i, j) = get_le<double>(in, path);
    }
    blocks.push_back(std::move(b));
  }
  return blocks;
}

void load_checkpoint(Model& model, const std::filesystem::path& path) {
  const auto blocks = read_checkpoint(path);
  const auto expected = checkpoint_blocks(model);
  if (blocks.size() != expected.size()) {
    throw ShapeError(path.string() + ": " + std::to_string(blocks.size()) + " blocks, model has " +
                     std::to_string(expected.size()));
  }
  std::size_t k = 0;
  for (ParamSet& p : model.params) {
    for (ParamSlot& s : p.slots()) {
      const CheckpointBlock& b = blocks[k];
      if (b.name != expected[k].name || b.value.rows() != s.value.rows() || b.value.cols() != s.value.cols()) {
        throw ShapeError(path.string() + ": block '" + b.name + "' does not match '" + expected[k].name + "'");
      }
      s.value = b.value;
      ++k;
    }
  }
}

}  // namespace geoparam
