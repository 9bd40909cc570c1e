#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "geoparam/data.hpp"
#include "geoparam/error.hpp"

using namespace geoparam;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("geoparam_data_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::filesystem::path write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path) << text;
  return path;
}

std::string ten_row_csv() {
  std::string s = "a,b,y\n";
  for (int i = 0; i < 10; ++i) {
    s += std::to_string(i) + "," + std::to_string(i * i) + "," + std::to_string(2 * i + 1) + "\n";
  }
  return s;
}

// Logistic regression by full-batch gradient descent; returns training accuracy.
double linear_accuracy(const Dataset& d) {
  Eigen::Vector3d w = Eigen::Vector3d::Zero();
  const Eigen::Index n = d.rows();
  for (int it = 0; it < 3000; ++it) {
    Eigen::Vector3d g = Eigen::Vector3d::Zero();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double z = w[0] * d.X(i, 0) + w[1] * d.X(i, 1) + w[2];
      const double r = 1.0 / (1.0 + std::exp(-z)) - d.Y(i, 0);
      g += r * Eigen::Vector3d(d.X(i, 0), d.X(i, 1), 1.0);
    }
    w -= 1.0 * g / double(n);
  }
  int correct = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z = w[0] * d.X(i, 0) + w[1] * d.X(i, 1) + w[2];
    correct += (z > 0) == (d.Y(i, 0) > 0.5);
  }
  return double(correct) / double(n);
}

double knn_accuracy(const Dataset& train, const Dataset& test, int k) {
  int correct = 0;
  std::vector<std::pair<double, double>> dist(std::size_t(train.rows()));
  for (Eigen::Index i = 0; i < test.rows(); ++i) {
    for (Eigen::Index j = 0; j < train.rows(); ++j) {
      dist[std::size_t(j)] = {(train.X.row(j) - test.X.row(i)).squaredNorm(), train.Y(j, 0)};
    }
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    double votes = 0;
    for (int j = 0; j < k; ++j) votes += dist[std::size_t(j)].second;
    correct += (votes > k / 2.0) == (test.Y(i, 0) > 0.5);
  }
  return double(correct) / double(test.rows());
}

}  // namespace

TEST(Levy, KnownValues) {
  EXPECT_NEAR(levy(1.0), 0.0, 1e-15);
  EXPECT_NEAR(levy(5.0), 1.0, 1e-12);
}

TEST(Levy, NoiseFreeCurve) {
  std::mt19937_64 rng(1);
  const Dataset d = gen_levy(200, LevyOptions{-10, 10, 0.0}, rng);
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    EXPECT_EQ(d.Y(i, 0), levy(d.X(i, 0)));
    EXPECT_GE(d.X(i, 0), -10.0);
    EXPECT_LE(d.X(i, 0), 10.0);
  }
}

TEST(Levy, NoiseLevel) {
  std::mt19937_64 rng(2);
  const Dataset d = gen_levy(10000, LevyOptions{}, rng);
  double sum = 0, sq = 0;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    const double r = d.Y(i, 0) - levy(d.X(i, 0));
    sum += r;
    sq += r * r;
  }
  const double mean = sum / 1e4;
  const double std = std::sqrt(sq / 1e4 - mean * mean);
  EXPECT_NEAR(std, 0.5, 0.05);
}

TEST(Levy, SeedsReproduceBitForBit) {
  std::mt19937_64 a(3), b(3);
  const Dataset x = gen_levy(50, LevyOptions{}, a), y = gen_levy(50, LevyOptions{}, b);
  EXPECT_TRUE(x.X == y.X);
  EXPECT_TRUE(x.Y == y.Y);
}

TEST(Levy, InvalidOptions) {
  std::mt19937_64 rng(4);
  EXPECT_THROW(gen_levy(1, LevyOptions{}, rng), DataError);
  EXPECT_THROW(gen_levy(10, LevyOptions{1, 1, 0.5}, rng), DataError);
  EXPECT_THROW(gen_levy(10, LevyOptions{-1, 1, -0.5}, rng), DataError);
}

TEST(Banana, NoiseFreePointsLieOnArcs) {
  std::mt19937_64 rng(5);
  BananaOptions opt;
  opt.noise_std = 0.0;
  const Dataset d = gen_banana(400, opt, rng);
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    const double x = d.X(i, 0), y = d.X(i, 1);
    if (d.Y(i, 0) == 0.0) {
      EXPECT_NEAR(std::hypot(x, y), opt.radius, 1e-12);
      EXPECT_GE(y, -1e-12);
    } else {
      EXPECT_NEAR(std::hypot(x - opt.radius, y + opt.gap), opt.radius, 1e-12);
      EXPECT_LE(y + opt.gap, 1e-12);
    }
  }
}

TEST(Banana, LabelsBalanced) {
  std::mt19937_64 rng(6);
  const Dataset d = gen_banana(500, BananaOptions{}, rng);
  EXPECT_DOUBLE_EQ(d.Y.sum(), 250.0);
  EXPECT_THROW(gen_banana(7, BananaOptions{}, rng), DataError);
}

TEST(Banana, LinearVersusLocalClassifiers) {
  std::mt19937_64 rng(7);
  const Dataset train = gen_banana(500, BananaOptions{}, rng);
  const Dataset test = gen_banana(500, BananaOptions{}, rng);
  EXPECT_LE(linear_accuracy(train), 0.87);
  EXPECT_GT(knn_accuracy(train, test, 15), 0.95);
}

TEST(RegressionCsv, ReadsTargetAndFeatures) {
  const auto dir = temp_dir("read");
  const Dataset d = read_regression_csv(write_file(dir / "t.csv", "a, y ,b\n1,2,3\n4,5,6\n"), "y");
  EXPECT_EQ(d.feature_names, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(d.X, (Tensor(2, 2) << 1, 3, 4, 6).finished());
  EXPECT_EQ(d.Y, (Tensor(2, 1) << 2, 5).finished());
}

TEST(RegressionCsv, Errors) {
  const auto dir = temp_dir("errors");
  EXPECT_THROW(read_regression_csv(dir / "missing.csv", "y"), IoError);
  EXPECT_THROW(read_regression_csv(write_file(dir / "nocol.csv", "a,b\n1,2\n"), "y"), DataError);
  try {
    read_regression_csv(write_file(dir / "short.csv", "a,y\n1,2\n3\n"), "y");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("short.csv:3"), std::string::npos) << e.what();
  }
  try {
    read_regression_csv(write_file(dir / "text.csv", "a,y\n1,2\n3,4\nx,5\n"), "y");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("text.csv:4"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_uci_csv(write_file(dir / "tiny.csv", "a,y\n1,2\n3,4\n"), "y", 1), DataError);
}

TEST(BananaCsv, MapsMinusOneLabels) {
  const auto dir = temp_dir("banana");
  const Dataset d = load_banana_csv(write_file(dir / "banana.csv", "x1,x2,label\n0.5,1,-1\n0.1,0.2,1\n"));
  EXPECT_EQ(d.Y, (Tensor(2, 1) << 0, 1).finished());
  EXPECT_THROW(load_banana_csv(write_file(dir / "bad.csv", "x1,x2,label\n0,0,2\n1,1,0\n")), DataError);
  EXPECT_THROW(load_banana_csv(write_file(dir / "cols.csv", "a,b,c\n0,0,1\n1,1,0\n")), DataError);
}

TEST(Split, TenRowsGiveEightAndTwo) {
  const auto dir = temp_dir("split");
  const auto path = write_file(dir / "ten.csv", ten_row_csv());
  const auto [train, test] = load_uci_csv(path, "y", 42);
  EXPECT_EQ(train.rows(), 8);
  EXPECT_EQ(test.rows(), 2);
  const auto [train2, test2] = load_uci_csv(path, "y", 42);
  EXPECT_TRUE(train.X == train2.X && test.Y == test2.Y);
  const auto [train3, test3] = load_uci_csv(path, "y", 43);
  EXPECT_FALSE(train.Y == train3.Y);
}

TEST(Split, PartsCoverTheData) {
  const auto dir = temp_dir("cover");
  const Dataset raw = read_regression_csv(write_file(dir / "ten.csv", ten_row_csv()), "y");
  const auto [a, b] = split_dataset(raw, 0.8, 9);
  std::vector<double> ys;
  for (Eigen::Index i = 0; i < a.rows(); ++i) ys.push_back(a.Y(i, 0));
  for (Eigen::Index i = 0; i < b.rows(); ++i) ys.push_back(b.Y(i, 0));
  std::sort(ys.begin(), ys.end());
  for (int i = 0; i < 10; ++i) EXPECT_EQ(ys[std::size_t(i)], 2 * i + 1);
  EXPECT_THROW(split_dataset(raw, 1.0, 9), DataError);
}

TEST(Standardize, UsesTrainingStatistics) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal(3.0, 5.0);
  Dataset train, test;
  train.X.resize(200, 3);
  test.X.resize(50, 3);
  for (Eigen::Index i = 0; i < train.X.size(); ++i) train.X.data()[i] = normal(rng);
  for (Eigen::Index i = 0; i < test.X.size(); ++i) test.X.data()[i] = normal(rng);
  train.X.col(2).setConstant(7.0);
  const Tensor raw_test = test.X;
  const Eigen::RowVectorXd mean = train.X.colwise().mean();
  standardize(train, test);
  const Eigen::RowVectorXd m = train.X.colwise().mean();
  const Eigen::RowVectorXd var = train.X.array().square().colwise().mean();
  EXPECT_LT(m.cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_NEAR(var[0], 1.0, 1e-6);
  EXPECT_NEAR(var[1], 1.0, 1e-6);
  EXPECT_TRUE(train.X.col(2).isZero(0.0));
  EXPECT_EQ(train.feature_stds[2], 1.0);
  for (Eigen::Index j = 0; j < 3; ++j) {
    const Eigen::VectorXd expected = (raw_test.col(j).array() - mean[j]) / train.feature_stds[j];
    EXPECT_LT((test.X.col(j) - expected).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Uci, RegistryAndBundledFiles) {
  for (const UciEntry& e : uci_registry()) {
    const auto [train, test] = load_uci_csv(data_dir() / e.file, e.target, 1);
    EXPECT_GT(train.rows(), 300) << e.name;
    EXPECT_EQ(train.features(), test.features());
    EXPECT_TRUE(train.Y.allFinite());
  }
  EXPECT_EQ(uci_entry("boston").target, "medv");
  EXPECT_THROW(uci_entry("yacht"), ConfigError);
}
