#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "geoparam/checkpoint.hpp"
#include "geoparam/error.hpp"

using namespace geoparam;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("geoparam_ckpt_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

Model random_model(Parameterization p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Model m = build(make_mlp(3, {5, 4}, 2, p, LossKind::mse), InitOptions{}, rng);
  std::normal_distribution<double> normal;
  for (ParamSet& ps : m.params) {
    for (ParamSlot& s : ps.slots()) {
      // Absolute values keep running variances valid.
      for (Eigen::Index i = 0; i < s.value.size(); ++i) s.value.data()[i] = std::abs(normal(rng)) / 3.0 + 0.01;
    }
  }
  return m;
}

}  // namespace

TEST(Checkpoint, ExactRoundTripForEveryParameterization) {
  const auto dir = temp_dir("roundtrip");
  for (Parameterization p : {Parameterization::sp, Parameterization::wn_mbn, Parameterization::bn,
                             Parameterization::gmp_imn}) {
    const Model saved = random_model(p, 1);
    save_checkpoint(saved, dir / "m.bin");
    Model loaded = random_model(p, 2);
    load_checkpoint(loaded, dir / "m.bin");
    for (std::size_t l = 0; l < saved.params.size(); ++l) {
      for (std::size_t s = 0; s < saved.params[l].slots().size(); ++s) {
        EXPECT_TRUE(saved.params[l].slots()[s].value == loaded.params[l].slots()[s].value)
            << to_string(p) << " " << saved.params[l].slots()[s].name;
      }
    }
    const Tensor x = Tensor::Random(4, 3);
    EXPECT_TRUE(predict(saved, x) == predict(loaded, x));
  }
}

TEST(Checkpoint, BlocksIncludeRunningStatistics) {
  const Model m = random_model(Parameterization::bn, 3);
  std::vector<std::string> names;
  for (const CheckpointBlock& b : checkpoint_blocks(m)) names.push_back(b.name);
  EXPECT_NE(std::find(names.begin(), names.end(), "layer0.running_var"), names.end());
  EXPECT_NE(std::find(names.begin(), names.end(), "layer1.W"), names.end());
}

TEST(Checkpoint, HeaderAndSidecar) {
  const auto dir = temp_dir("header");
  const Model m = random_model(Parameterization::sp, 4);
  save_checkpoint(m, dir / "m.bin");
  std::ifstream in(dir / "m.bin", std::ios::binary);
  char magic[8];
  in.read(magic, 8);
  EXPECT_EQ(std::memcmp(magic, "GEOPCKPT", 8), 0);
  unsigned char version[4];
  in.read(reinterpret_cast<char*>(version), 4);
  EXPECT_EQ(version[0], kCheckpointVersion);
  EXPECT_EQ(version[1] | version[2] | version[3], 0);

  std::ifstream side(dir / "m.bin.shapes.txt");
  std::string line;
  std::getline(side, line);
  EXPECT_EQ(line, "# name rows cols trainable");
  std::getline(side, line);
  EXPECT_EQ(line, "layer0.W 5 3 1");
  const auto blocks = read_checkpoint(dir / "m.bin");
  EXPECT_EQ(blocks.size(), checkpoint_blocks(m).size());
}

TEST(Checkpoint, ShapeMismatchRejected) {
  const auto dir = temp_dir("mismatch");
  save_checkpoint(random_model(Parameterization::sp, 5), dir / "m.bin");
  std::mt19937_64 rng(6);
  Model wider = build(make_mlp(3, {6, 4}, 2, Parameterization::sp, LossKind::mse), InitOptions{}, rng);
  EXPECT_THROW(load_checkpoint(wider, dir / "m.bin"), ShapeError);
  Model other = random_model(Parameterization::gmp, 7);
  EXPECT_THROW(load_checkpoint(other, dir / "m.bin"), ShapeError);
}

TEST(Checkpoint, CorruptFilesRejected) {
  const auto dir = temp_dir("corrupt");
  EXPECT_THROW(read_checkpoint(dir / "absent.bin"), IoError);
  std::ofstream(dir / "junk.bin", std::ios::binary) << "NOTACKPT";
  EXPECT_THROW(read_checkpoint(dir / "junk.bin"), IoError);
  save_checkpoint(random_model(Parameterization::sp, 8), dir / "m.bin");
  std::filesystem::resize_file(dir / "m.bin", std::filesystem::file_size(dir / "m.bin") - 5);
  EXPECT_THROW(read_checkpoint(dir / "m.bin"), IoError);
}
