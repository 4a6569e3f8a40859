#pragma once

// Strapdown NED mechanization, the 15-state phi-angle error model and
// closed-loop error feedback.

#include "cin/ekf.hpp"
#include "cin/geodesy.hpp"

#include <Eigen/Geometry>

namespace cin {

using Vector2d = Eigen::Vector2d;
using Vector3d = Eigen::Vector3d;
using Matrix2d = Eigen::Matrix2d;
using Matrix3d = Eigen::Matrix3d;
using Matrix15d = Eigen::Matrix<double, kErrorStates, kErrorStates>;
using Geodetic = GeodeticPosition<double>;

/// Error-state layout: attitude (roll, pitch, yaw errors), NED velocity,
/// (dL, dlambda, dh), gyro bias, accelerometer bias.
using ErrorState15 = Eigen::Matrix<double, kErrorStates, 1>;

namespace state {
inline constexpr int attitude = 0;
inline constexpr int velocity = 3;
inline constexpr int position = 6;
inline constexpr int latitude = 6;
inline constexpr int longitude = 7;
inline constexpr int height = 8;
inline constexpr int gyro_bias = 9;
inline constexpr int accel_bias = 12;
}  // namespace state

/// Body-frame increments averaged over the interval ending at `timestamp`.
struct ImuSample {
  double timestamp = 0;
  Vector3d gyro = Vector3d::Zero();   // rad/s
  Vector3d accel = Vector3d::Zero();  // m/s^2, specific force
};

struct NavSolution {
  Eigen::Quaterniond attitude = Eigen::Quaterniond::Identity();  // body -> NED
  Vector3d velocity = Vector3d::Zero();                           // NED m/s
  Geodetic position;
  double timestamp = 0;

  Matrix3d body_to_ned() const { return attitude.toRotationMatrix(); }
};

struct ImuBiases {
  Vector3d gyro = Vector3d::Zero();
  Vector3d accel = Vector3d::Zero();
};

/// Continuous-time noise densities.
struct ImuNoise {
  double gyro_psd = 0;        // (rad/s)^2/Hz, angle random walk squared
  double accel_psd = 0;       // (m/s^2)^2/Hz, velocity random walk squared
  double gyro_bias_psd = 0;   // random-walk driving noise on the bias states
  double accel_bias_psd = 0;

  static ImuNoise automotive_mems();
};

/// Loosely coupled GNSS position/velocity fix.
struct GnssFix {
  double timestamp = 0;
  Geodetic position;
  Vector3d velocity = Vector3d::Zero();
};

struct GnssNoise {
  double horizontal_sigma = 3.0;  // m
  double vertical_sigma = 3.0;    // m
  double velocity_sigma = 0.1;    // m/s
};

Matrix3d rotation_from_vector(const Vector3d& rotation);
Eigen::Quaterniond quaternion_from_vector(const Vector3d& rotation);
Eigen::Quaterniond attitude_from_euler(double roll, double pitch, double yaw);

ImuSample correct_imu(const ImuSample& raw, const ImuBiases& biases);

/// One strapdown step over `dt` seconds using the (bias-corrected) sample.
NavSolution mechanize(const NavSolution& nav, const ImuSample& imu, double dt);

/// Continuous error dynamics A of the phi-angle NED model.
Matrix15d error_dynamics(const NavSolution& nav, const ImuSample& imu);

/// F = I + A dt.
Matrix15d build_transition(const NavSolution& nav, const ImuSample& imu, double dt);

Matrix15d process_noise(const ImuNoise& noise, double dt);

struct FeedbackResult {
  NavSolution nav;
  ImuBiases biases;
};

/// Subtract estimated navigation errors and fold residual biases into the
/// retained bias estimates. The caller zeroes the filter state afterwards.
FeedbackResult apply_feedback(const NavSolution& nav, const ErrorState15& err,
                              const ImuBiases& biases = {});

/// Corrupt a reference solution by the navigation part of `err`
/// (the inverse of the feedback convention, INS = truth + error).
NavSolution inject_error(const NavSolution& truth, const ErrorState15& err);

/// Navigation part of (estimate - truth) in error-state coordinates; bias
/// components are zero.
ErrorState15 navigation_error(const NavSolution& estimate, const NavSolution& truth);

/// Self-positioning observation: 3 velocity rows then 3 NED-meter position rows.
Observation15 gnss_observation(const NavSolution& nav, const GnssFix& fix, const GnssNoise& noise);

/// Horizontal position block of P mapped to NED meters at `at`.
Matrix2d horizontal_position_covariance(const Matrix15d& P, const Geodetic& at);

}  // namespace cin
