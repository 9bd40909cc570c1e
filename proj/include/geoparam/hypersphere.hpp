#pragma once

// Hyperspherical coordinates for ReLU unit directions.
//
// A direction u in R^n is written with n-1 angles:
//
//   u_1 = cos(t_1)
//   u_k = sin(t_1) ... sin(t_{k-1}) cos(t_k)        1 < k < n
//   u_n = sin(t_1) ... sin(t_{n-1})
//
// Polar angles t_1..t_{n-2} live in [0, pi]; the azimuth t_{n-1} in [0, 2 pi).
// Every function here is a pure function of its arguments.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "geoparam/error.hpp"

namespace geoparam {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// The n-1 angles that parameterize a direction on the unit sphere S^{n-1}.
///
/// Angles are not wrapped: trained parameters may leave the canonical box and
/// still map to a valid direction. Use `in_canonical_range()` where it matters.
template <typename Scalar>
class AngularCoordinates {
 public:
  explicit AngularCoordinates(Vector<Scalar> angles) : angles_(std::move(angles)) {
    if (angles_.size() < 1) {
      throw InvalidDimension("angular coordinates need ambient dimension >= 2");
    }
    if (!angles_.allFinite()) {
      throw NumericError("angular coordinates contain a non-finite angle");
    }
  }

  const Vector<Scalar>& angles() const { return angles_; }
  Eigen::Index dim_ambient() const { return angles_.size() + 1; }
  Eigen::Index size() const { return angles_.size(); }
  Scalar operator[](Eigen::Index i) const { return angles_[i]; }

  bool in_canonical_range() const {
    const Scalar pi = std::numbers::pi_v<Scalar>;
    const Eigen::Index last = angles_.size() - 1;
    for (Eigen::Index i = 0; i < last; ++i) {
      if (angles_[i] < Scalar(0) || angles_[i] > pi) return false;
    }
    return angles_[last] >= Scalar(0) && angles_[last] < 2 * pi;
  }

 private:
  Vector<Scalar> angles_;
};

/// A vector of unit Euclidean norm.
template <typename Scalar>
class UnitDirection {
 public:
  /// Normalizes `v`. Throws DegenerateDirection for a zero vector.
  static UnitDirection normalized(const Vector<Scalar>& v) {
    const Scalar norm = v.norm();
    if (!(norm > Scalar(0)) || !std::isfinite(norm)) {
      throw DegenerateDirection("cannot normalize a zero or non-finite direction");
    }
    return UnitDirection(v / norm);
  }

  const Vector<Scalar>& components() const { return components_; }
  Eigen::Index size() const { return components_.size(); }
  Scalar operator[](Eigen::Index i) const { return components_[i]; }

 private:
  template <typename S>
  friend UnitDirection<S> unit_vector(const AngularCoordinates<S>&);

  explicit UnitDirection(Vector<Scalar> c) : components_(std::move(c)) {}

  Vector<Scalar> components_;
};

/// The hyperplane {x : u(theta)^T x + radius = 0} of a ReLU unit.
template <typename Scalar>
struct CharacteristicBoundary {
  Scalar radius;
  AngularCoordinates<Scalar> angles;
};

/// Diagonal of the pullback metric of the hyperspherical chart.
template <typename Scalar>
struct MetricDiagonal {
  Vector<Scalar> entries;
};

/// Maps angles to the unit direction they describe.
template <typename Scalar>
UnitDirection<Scalar> unit_vector(const AngularCoordinates<Scalar>& theta) {
  const Eigen::Index n = theta.dim_ambient();
  if (n < 2) throw InvalidDimension("unit_vector requires dimension >= 2");
  Vector<Scalar> u(n);
  Scalar sin_prefix(1);
  for (Eigen::Index k = 0; k < n - 1; ++k) {
    u[k] = sin_prefix * std::cos(theta[k]);
    sin_prefix *= std::sin(theta[k]);
  }
  u[n - 1] = sin_prefix;
  return UnitDirection<Scalar>(std::move(u));
}

/// Inverse of `unit_vector`, returning angles in the canonical range.
///
/// The input is renormalized first. Once the remaining tail of components is
/// exactly zero the leftover angles are set to 0.
template <typename Scalar>
AngularCoordinates<Scalar> angles_from_direction(const Vector<Scalar>& direction) {
  const Eigen::Index n = direction.size();
  if (n < 2) throw InvalidDimension("angles_from_direction requires dimension >= 2");
  const Vector<Scalar> u = UnitDirection<Scalar>::normalized(direction).components();
  const Scalar pi = std::numbers::pi_v<Scalar>;

  // tail[k] = ||u[k..n-1]||, accumulated from the back to avoid cancellation.
  Vector<Scalar> tail(n + 1);
  tail[n] = Scalar(0);
  for (Eigen::Index k = n - 1; k >= 0; --k) tail[k] = std::hypot(tail[k + 1], u[k]);

  Vector<Scalar> theta = Vector<Scalar>::Zero(n - 1);
  for (Eigen::Index k = 0; k < n - 2; ++k) {
    if (tail[k + 1] == Scalar(0)) {
      theta[k] = u[k] < Scalar(0) ? pi : Scalar(0);
      return AngularCoordinates<Scalar>(std::move(theta));
    }
    theta[k] = std::atan2(tail[k + 1], u[k]);
  }
  const Scalar y = u[n - 1];
  const Scalar x = u[n - 2];
  if (y == Scalar(0)) {
    theta[n - 2] = x < Scalar(0) ? pi : Scalar(0);
  } else {
    Scalar azimuth = std::atan2(y, x);
    if (azimuth < Scalar(0)) azimuth += 2 * pi;
    if (azimuth >= 2 * pi) azimuth = Scalar(0);
    theta[n - 2] = azimuth;
  }
  return AngularCoordinates<Scalar>(std::move(theta));
}

/// phi = -radius * u(theta): the point of the boundary closest to the origin.
template <typename Scalar>
Vector<Scalar> spatial_location(const CharacteristicBoundary<Scalar>& boundary) {
  return -boundary.radius * unit_vector(boundary.angles).components();
}

/// phi = -b w / (w^T w) for a unit written in standard (w, b) form.
template <typename Scalar>
Vector<Scalar> spatial_location_sp(const Vector<Scalar>& w, Scalar b) {
  const Scalar norm = w.norm();
  if (!(norm >= Scalar(1e-30))) {
    throw DegenerateWeight("spatial location undefined for weight norm " + std::to_string(double(norm)));
  }
  return (-b / w.squaredNorm()) * w;
}

/// Angle in [0, pi] between two nonzero vectors.
///
/// Evaluated as 2 atan2(|a - b|, |a + b|) on the normalized vectors. This is
/// the clamped arccos of the cosine in exact arithmetic but keeps full relative
/// precision for nearly parallel and nearly antipodal pairs.
template <typename Scalar>
Scalar angle_between(const Vector<Scalar>& a, const Vector<Scalar>& b) {
  if (a.size() != b.size()) throw ShapeError("angle_between: size mismatch");
  const Vector<Scalar> ua = UnitDirection<Scalar>::normalized(a).components();
  const Vector<Scalar> ub = UnitDirection<Scalar>::normalized(b).components();
  const Scalar angle = 2 * std::atan2((ua - ub).norm(), (ua + ub).norm());
  return std::clamp(angle, Scalar(0), std::numbers::pi_v<Scalar>);
}

/// Arccos of the clamped cosine; the textbook form of `angle_between`.
template <typename Scalar>
Scalar angle_between_acos(const Vector<Scalar>& a, const Vector<Scalar>& b) {
  if (a.size() != b.size()) throw ShapeError("angle_between_acos: size mismatch");
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  if (!(na > Scalar(0)) || !(nb > Scalar(0))) {
    throw DegenerateDirection("angle_between_acos: zero vector");
  }
  const Scalar c = std::clamp(a.dot(b) / (na * nb), Scalar(-1), Scalar(1));
  return std::acos(c);
}

/// Diagonal metric entries: 1, sin^2 t_1, sin^2 t_1 sin^2 t_2, ...
template <typename Scalar>
MetricDiagonal<Scalar> metric_diagonal(const AngularCoordinates<Scalar>& theta) {
  const Eigen::Index k = theta.size();
  Vector<Scalar> m(k);
  Scalar prefix(1);
  for (Eigen::Index i = 0; i < k; ++i) {
    m[i] = prefix;
    const Scalar s = std::sin(theta[i]);
    prefix *= s * s;
  }
  return MetricDiagonal<Scalar>{std::move(m)};
}

/// First-order change of direction when theta moves by `eps`: ||eps||_M.
template <typename Scalar>
Scalar angular_change_gmp(const AngularCoordinates<Scalar>& theta, const Vector<Scalar>& eps) {
  if (eps.size() != theta.size()) throw ShapeError("angular_change_gmp: eps size must equal angle count");
  if (!eps.allFinite()) throw NumericError("angular_change_gmp: non-finite perturbation");
  const MetricDiagonal<Scalar> m = metric_diagonal(theta);
  return std::sqrt((m.entries.array() * eps.array().square()).sum());
}

template <typename Scalar>
Scalar degrees(Scalar radians) {
  return radians * Scalar(180) / std::numbers::pi_v<Scalar>;
}

}  // namespace geoparam
