#pragma once

// Geodetic frames, WGS-84 curvature radii, normal gravity and the road-frame
// covariance rotation. Everything here is a pure value-level template on the
// scalar type.

#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cin {

template <typename Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix2 = Eigen::Matrix<Scalar, 2, 2>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

/// WGS-84 ellipsoid and Earth rotation.
struct Wgs84 {
  static constexpr double semi_major_axis = 6378137.0;
  static constexpr double eccentricity_sq = 6.69437999014e-3;
  static constexpr double earth_rate = 7.292115e-5;  // rad/s
  // Somigliana normal gravity
  static constexpr double gravity_equator = 9.7803253359;
  static constexpr double gravity_k = 0.00193185265241;
  static constexpr double free_air_gradient = 3.086e-6;  // (m/s^2)/m
};

template <typename Scalar>
struct GeodeticPosition {
  Scalar latitude{0};   // rad
  Scalar longitude{0};  // rad
  Scalar height{0};     // m above ellipsoid

  Vector3<Scalar> as_vector() const { return {latitude, longitude, height}; }
  static GeodeticPosition from_vector(const Vector3<Scalar>& v) { return {v(0), v(1), v(2)}; }

  bool valid() const {
    using std::abs;
    using std::isfinite;
    const Scalar half_pi = std::numbers::pi_v<Scalar> / 2;
    return isfinite(latitude) && isfinite(longitude) && isfinite(height) &&
           abs(latitude) <= half_pi && abs(longitude) <= std::numbers::pi_v<Scalar>;
  }
};

/// North, east, down in meters.
template <typename Scalar>
using NedVector = Vector3<Scalar>;

/// Road direction measured from due north, normalized to [-pi, pi).
template <typename Scalar>
struct RoadFrame {
  Scalar theta{0};

  static RoadFrame from_angle(Scalar angle) {
    const Scalar two_pi = 2 * std::numbers::pi_v<Scalar>;
    Scalar wrapped = std::fmod(angle + std::numbers::pi_v<Scalar>, two_pi);
    if (wrapped < 0) wrapped += two_pi;
    return RoadFrame{wrapped - std::numbers::pi_v<Scalar>};
  }

  /// Longitudinal/lateral road axes expressed in north/east.
  Matrix2<Scalar> rotation() const {
    using std::cos;
    using std::sin;
    Matrix2<Scalar> t;
    t << cos(theta), -sin(theta), sin(theta), cos(theta);
    return t;
  }
};

template <typename Scalar>
struct CurvatureRadii {
  Scalar meridian;        // R_M
  Scalar prime_vertical;  // R_N
};

template <typename Scalar>
CurvatureRadii<Scalar> radii_of_curvature(Scalar latitude) {
  using std::sin;
  using std::sqrt;
  const Scalar a = Wgs84::semi_major_axis;
  const Scalar e2 = Wgs84::eccentricity_sq;
  const Scalar s = sin(latitude);
  const Scalar w = 1 - e2 * s * s;
  const Scalar sqrt_w = sqrt(w);
  return {a * (1 - e2) / (w * sqrt_w), a / sqrt_w};
}

/// Meters per radian of latitude and longitude at `at`: (R_M + h, (R_N + h) cos L).
template <typename Scalar>
Vector2<Scalar> horizontal_scale(const GeodeticPosition<Scalar>& at) {
  using std::cos;
  const auto radii = radii_of_curvature(at.latitude);
  return {radii.meridian + at.height, (radii.prime_vertical + at.height) * cos(at.latitude)};
}

/// Linearized (dL, dlambda, dh) -> NED meters about `at`.
template <typename Scalar>
NedVector<Scalar> geodetic_delta_to_ned(const Vector3<Scalar>& delta,
                                        const GeodeticPosition<Scalar>& at) {
  const Vector2<Scalar> scale = horizontal_scale(at);
  return {scale(0) * delta(0), scale(1) * delta(1), -delta(2)};
}

template <typename Scalar>
Vector3<Scalar> ned_to_geodetic_delta(const NedVector<Scalar>& ned,
                                      const GeodeticPosition<Scalar>& at) {
  const Vector2<Scalar> scale = horizontal_scale(at);
  return {ned(0) / scale(0), ned(1) / scale(1), -ned(2)};
}

/// Local NED coordinates of `p` about the map origin (linear about the origin).
template <typename Scalar>
NedVector<Scalar> ned_from_geodetic(const GeodeticPosition<Scalar>& origin,
                                    const GeodeticPosition<Scalar>& p) {
  return geodetic_delta_to_ned<Scalar>(p.as_vector() - origin.as_vector(), origin);
}

template <typename Scalar>
GeodeticPosition<Scalar> geodetic_from_ned(const GeodeticPosition<Scalar>& origin,
                                           const NedVector<Scalar>& ned) {
  return GeodeticPosition<Scalar>::from_vector(origin.as_vector() +
                                               ned_to_geodetic_delta(ned, origin));
}

template <typename Scalar>
Scalar normal_gravity(Scalar latitude, Scalar height) {
  using std::sin;
  using std::sqrt;
  const Scalar s2 = sin(latitude) * sin(latitude);
  const Scalar g0 = Wgs84::gravity_equator * (1 + Wgs84::gravity_k * s2) /
                    sqrt(1 - Wgs84::eccentricity_sq * s2);
  return g0 - Wgs84::free_air_gradient * height;
}

/// d(normal_gravity)/d(latitude).
template <typename Scalar>
Scalar normal_gravity_lat_derivative(Scalar latitude) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const Scalar s = sin(latitude);
  const Scalar e2 = Wgs84::eccentricity_sq;
  const Scalar k = Wgs84::gravity_k;
  const Scalar w = 1 - e2 * s * s;
  const Scalar dg_ds =
      Wgs84::gravity_equator * (2 * k * s / sqrt(w) + (1 + k * s * s) * e2 * s / (w * sqrt(w)));
  return dg_ds * cos(latitude);
}

/// Earth rotation in NED.
template <typename Scalar>
Vector3<Scalar> earth_rate_ned(Scalar latitude) {
  using std::cos;
  using std::sin;
  return {Wgs84::earth_rate * cos(latitude), Scalar(0), -Wgs84::earth_rate * sin(latitude)};
}

/// Transport rate of the NED frame over the ellipsoid.
template <typename Scalar>
Vector3<Scalar> transport_rate_ned(const GeodeticPosition<Scalar>& at,
                                   const Vector3<Scalar>& velocity_ned) {
  using std::tan;
  const auto radii = radii_of_curvature(at.latitude);
  const Scalar rn = radii.prime_vertical + at.height;
  const Scalar rm = radii.meridian + at.height;
  return {velocity_ned(1) / rn, -velocity_ned(0) / rm, -velocity_ned(1) * tan(at.latitude) / rn};
}

template <typename Scalar>
Matrix3<Scalar> skew(const Vector3<Scalar>& v) {
  Matrix3<Scalar> m;
  m << Scalar(0), -v(2), v(1), v(2), Scalar(0), -v(0), -v(1), v(0), Scalar(0);
  return m;
}

/// Road-frame (longitudinal, lateral) covariance expressed in north/east: T Sigma T^T.
template <typename Scalar>
Matrix2<Scalar> rotate_road_covariance(const RoadFrame<Scalar>& frame,
                                       const Matrix2<Scalar>& sigma) {
  using std::abs;
  if (abs(sigma(0, 1) - sigma(1, 0)) > Scalar(1e-9)) {
    throw std::invalid_argument("rotate_road_covariance: covariance is not symmetric");
  }
  const Matrix2<Scalar> t = frame.rotation();
  const Matrix2<Scalar> out = t * sigma * t.transpose();
  return (out + out.transpose()) / 2;
}

}  // namespace cin
