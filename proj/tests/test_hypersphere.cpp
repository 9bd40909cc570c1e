#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "geoparam/error.hpp"
#include "geoparam/hypersphere.hpp"

using namespace geoparam;
using Eigen::VectorXd;

namespace {

constexpr double kPi = std::numbers::pi;

AngularCoordinates<double> angles(std::initializer_list<double> values) {
  VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return AngularCoordinates<double>(v);
}

VectorXd vec(std::initializer_list<double> values) {
  VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

VectorXd random_direction(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v / v.norm();
}

// Finite-difference Jacobian of unit_vector with respect to the angles.
Eigen::MatrixXd jacobian(const VectorXd& theta, double h) {
  const Eigen::Index k = theta.size();
  Eigen::MatrixXd j(k + 1, k);
  for (Eigen::Index c = 0; c < k; ++c) {
    VectorXd plus = theta, minus = theta;
    plus[c] += h;
    minus[c] -= h;
    j.col(c) = (unit_vector(AngularCoordinates<double>(plus)).components() -
                unit_vector(AngularCoordinates<double>(minus)).components()) /
               (2 * h);
  }
  return j;
}

}  // namespace

TEST(UnitVector, KnownDirections) {
  EXPECT_TRUE(unit_vector(angles({0.0})).components().isApprox(vec({1, 0})));
  const VectorXd u = unit_vector(angles({kPi / 2})).components();
  EXPECT_NEAR(u[0], 0.0, 1e-15);
  EXPECT_NEAR(u[1], 1.0, 1e-15);
  const VectorXd u3 = unit_vector(angles({kPi / 2, kPi / 2})).components();
  EXPECT_NEAR(u3[0], 0.0, 1e-15);
  EXPECT_NEAR(u3[1], 0.0, 1e-15);
  EXPECT_NEAR(u3[2], 1.0, 1e-15);
}

TEST(UnitVector, MatchesExpandedFormulaInThreeDimensions) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> a(-10, 10);
  for (int i = 0; i < 100; ++i) {
    const double t1 = a(rng), t2 = a(rng);
    const VectorXd u = unit_vector(angles({t1, t2})).components();
    EXPECT_NEAR(u[0], std::cos(t1), 1e-15);
    EXPECT_NEAR(u[1], std::sin(t1) * std::cos(t2), 1e-15);
    EXPECT_NEAR(u[2], std::sin(t1) * std::sin(t2), 1e-15);
    EXPECT_NEAR(u.norm(), 1.0, 1e-12);
  }
}

TEST(UnitVector, RejectsEmptyAngles) {
  EXPECT_THROW(AngularCoordinates<double>(VectorXd(0)), InvalidDimension);
  EXPECT_THROW(AngularCoordinates<double>(vec({std::nan("")})), NumericError);
}

TEST(AnglesFromDirection, KnownDirections) {
  const auto a = angles_from_direction<double>(vec({0, 1}));
  ASSERT_EQ(a.size(), 1);
  EXPECT_NEAR(a[0], kPi / 2, 1e-15);
  const auto b = angles_from_direction<double>(vec({-1, 0, 0}));
  EXPECT_DOUBLE_EQ(b[0], kPi);
  EXPECT_DOUBLE_EQ(b[1], 0.0);
  const auto c = angles_from_direction<double>(vec({0, -1}));
  EXPECT_NEAR(c[0], 3 * kPi / 2, 1e-15);
}

TEST(AnglesFromDirection, ZeroVectorThrows) {
  EXPECT_THROW(angles_from_direction<double>(VectorXd::Zero(3)), DegenerateDirection);
  EXPECT_THROW(angles_from_direction<double>(vec({1})), InvalidDimension);
}

TEST(AnglesFromDirection, RoundTrip) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> dim(2, 12);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const VectorXd u = random_direction(dim(rng), rng);
    const auto theta = angles_from_direction(u);
    EXPECT_TRUE(theta.in_canonical_range());
    worst = std::max(worst, (unit_vector(theta).components() - u).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(AnglesFromDirection, TrailingZerosGiveZeroAngles) {
  const auto a = angles_from_direction<double>(vec({0.6, 0.8, 0, 0}));
  EXPECT_NEAR(a[0], std::acos(0.6), 1e-15);
  EXPECT_DOUBLE_EQ(a[1], 0.0);
  EXPECT_DOUBLE_EQ(a[2], 0.0);
}

TEST(SpatialLocation, Examples) {
  EXPECT_TRUE(spatial_location(CharacteristicBoundary<double>{0.0, angles({1.0, 2.0})}).isZero());
  const VectorXd p = spatial_location(CharacteristicBoundary<double>{-1.0, angles({kPi / 4})});
  EXPECT_NEAR(p[0], std::sqrt(2.0) / 2, 1e-15);
  EXPECT_NEAR(p[1], std::sqrt(2.0) / 2, 1e-15);
  const VectorXd q = spatial_location(CharacteristicBoundary<double>{1.0, angles({0.0})});
  EXPECT_DOUBLE_EQ(q[0], -1.0);
  EXPECT_DOUBLE_EQ(q[1], 0.0);
}

TEST(SpatialLocation, LiesOnBoundary) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> a(0, 2 * kPi), lam(-3, 3);
  for (int i = 0; i < 200; ++i) {
    const auto theta = angles({a(rng), a(rng), a(rng)});
    const double lambda = lam(rng);
    const VectorXd phi = spatial_location(CharacteristicBoundary<double>{lambda, theta});
    EXPECT_NEAR(unit_vector(theta).components().dot(phi) + lambda, 0.0, 1e-12);
  }
}

TEST(SpatialLocationSp, Examples) {
  EXPECT_TRUE(spatial_location_sp<double>(vec({1, 0}), 1.0).isApprox(vec({-1, 0})));
  EXPECT_TRUE(spatial_location_sp<double>(vec({2, 0}), 1.0).isApprox(vec({-0.5, 0})));
  EXPECT_THROW(spatial_location_sp<double>(vec({0, 0}), 1.0), DegenerateWeight);
}

TEST(SpatialLocationSp, LiesOnBoundary) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  for (int i = 0; i < 200; ++i) {
    const VectorXd w = vec({normal(rng), normal(rng), normal(rng), normal(rng)});
    const double b = normal(rng);
    EXPECT_NEAR(w.dot(spatial_location_sp<double>(w, b)) + b, 0.0, 1e-12);
  }
}

TEST(AngleBetween, Examples) {
  const VectorXd w = vec({0.3, -1.2, 0.7});
  EXPECT_DOUBLE_EQ(angle_between<double>(w, -(1 + 1e-3) * w), kPi);
  EXPECT_DOUBLE_EQ(angle_between<double>(w, w), 0.0);
  EXPECT_NEAR(angle_between<double>(vec({1, 0}), vec({0, 1})), kPi / 2, 1e-15);
  EXPECT_THROW(angle_between<double>(w, VectorXd::Zero(3)), DegenerateDirection);
  EXPECT_THROW(angle_between<double>(w, vec({1, 0})), ShapeError);
}

TEST(AngleBetween, AgreesWithArccos) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 500; ++i) {
    const VectorXd a = random_direction(5, rng), b = random_direction(5, rng);
    EXPECT_NEAR(angle_between<double>(a, b), angle_between_acos<double>(a, b), 1e-7);
  }
}

TEST(MetricDiagonal, Examples) {
  const auto m = metric_diagonal(angles({kPi / 2, 0.4})).entries;
  EXPECT_NEAR(m[0], 1.0, 1e-15);
  EXPECT_NEAR(m[1], 1.0, 1e-15);
  const auto k = metric_diagonal(angles({kPi / 6, 2.0})).entries;
  EXPECT_NEAR(k[0], 1.0, 1e-15);
  EXPECT_NEAR(k[1], 0.25, 1e-15);
}

TEST(MetricDiagonal, MatchesFiniteDifferenceJacobian) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> polar(0, kPi), az(0, 2 * kPi);
  for (int trial = 0; trial < 50; ++trial) {
    VectorXd theta(4);
    theta << polar(rng), polar(rng), polar(rng), az(rng);
    const Eigen::MatrixXd j = jacobian(theta, 1e-6);
    const Eigen::MatrixXd g = j.transpose() * j;
    const VectorXd m = metric_diagonal(AngularCoordinates<double>(theta)).entries;
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      for (Eigen::Index c = 0; c < g.cols(); ++c) {
        if (r == c) {
          EXPECT_NEAR(g(r, c), m[r], 1e-5);
        } else {
          EXPECT_LT(std::abs(g(r, c)), 1e-5);
        }
      }
    }
  }
}

TEST(AngularChangeGmp, Examples) {
  EXPECT_NEAR(angular_change_gmp(angles({1.1, 0.3, 2.0}), vec({0.05, 0, 0})), 0.05, 1e-15);
  EXPECT_NEAR(angular_change_gmp(angles({kPi / 2, 0.9}), vec({0.03, 0.04})), 0.05, 1e-15);
  EXPECT_NEAR(angular_change_gmp(angles({kPi / 6, 0.9}), vec({0.0, 0.2})), 0.1, 1e-15);
  EXPECT_THROW(angular_change_gmp(angles({1.0, 2.0}), vec({0.1})), ShapeError);
}

TEST(AngularChangeGmp, FirstOrderAgreementWithAngle) {
  const auto theta = angles({kPi / 6, 0.9});
  const VectorXd eps = vec({0.0, 1e-4});
  const VectorXd shifted = theta.angles() + eps;
  const double actual = angle_between<double>(unit_vector(theta).components(),
                                              unit_vector(AngularCoordinates<double>(shifted)).components());
  EXPECT_NEAR(actual, angular_change_gmp(theta, eps), 1e-6);
  EXPECT_NEAR(angular_change_gmp(theta, eps), 0.5e-4, 1e-15);
}

TEST(AngularChangeGmp, BoundedByPerturbationNorm) {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> polar(0, kPi), az(0, 2 * kPi), mag(-7, -3);
  for (int i = 0; i < 1000; ++i) {
    VectorXd theta(3);
    theta << polar(rng), polar(rng), az(rng);
    const VectorXd eps = random_direction(3, rng) * std::pow(10.0, mag(rng));
    const AngularCoordinates<double> t0(theta);
    const AngularCoordinates<double> t1(VectorXd(theta + eps));
    const double angle = angle_between<double>(unit_vector(t0).components(), unit_vector(t1).components());
    const double predicted = angular_change_gmp(t0, eps);
    EXPECT_LE(angle, eps.norm() + 1e-8);
    EXPECT_LE(predicted, eps.norm() * (1 + 1e-12));
    if (predicted > 1e-6) {
      EXPECT_NEAR(angle, predicted, 1e-3 * predicted);
    }
  }
}
