#include "cin/ins.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cin {

namespace {

bool finite(const Vector3d& v) { return v.allFinite(); }

constexpr double kDegToRad = std::numbers::pi / 180.0;

}  // namespace

ImuNoise ImuNoise::automotive_mems() {
  // ARW 0.3 deg/sqrt(h), VRW 0.05 m/s/sqrt(h); biases are random constants.
  const double arw = 0.3 * kDegToRad / 60.0;
  const double vrw = 0.05 / 60.0;
  return ImuNoise{arw * arw, vrw * vrw, 0.0, 0.0};
}

Matrix3d rotation_from_vector(const Vector3d& rotation) {
  const double angle = rotation.norm();
  if (angle < 1e-12) return Matrix3d::Identity() + skew<double>(rotation);
  return Eigen::AngleAxisd(angle, rotation / angle).toRotationMatrix();
}

Eigen::Quaterniond quaternion_from_vector(const Vector3d& rotation) {
  const double angle = rotation.norm();
  if (angle < 1e-12) {
    Eigen::Quaterniond q(1.0, rotation.x() / 2, rotation.y() / 2, rotation.z() / 2);
    return q.normalized();
  }
  return Eigen::Quaterniond(Eigen::AngleAxisd(angle, rotation / angle));
}

Eigen::Quaterniond attitude_from_euler(double roll, double pitch, double yaw) {
  return Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Vector3d::UnitZ()) *
                            Eigen::AngleAxisd(pitch, Vector3d::UnitY()) *
                            Eigen::AngleAxisd(roll, Vector3d::UnitX()));
}

ImuSample correct_imu(const ImuSample& raw, const ImuBiases& biases) {
  return ImuSample{raw.timestamp, raw.gyro - biases.gyro, raw.accel - biases.accel};
}

NavSolution mechanize(const NavSolution& nav, const ImuSample& imu, double dt) {
  if (!(dt > 0.0) || dt > 0.1) throw std::invalid_argument("mechanize: dt must lie in (0, 0.1] s");
  if (!finite(imu.gyro) || !finite(imu.accel)) {
    throw std::invalid_argument("mechanize: non-finite IMU sample");
  }
  const Geodetic& pos = nav.position;
  const auto radii = radii_of_curvature(pos.latitude);
  const double rm = radii.meridian + pos.height;
  const double rn = radii.prime_vertical + pos.height;

  const Vector3d w_ie = earth_rate_ned(pos.latitude);
  const Vector3d w_en = transport_rate_ned(pos, nav.velocity);
  const Vector3d w_in = w_ie + w_en;
  const Matrix3d C = nav.body_to_ned();

  NavSolution out;
  out.attitude = (quaternion_from_vector(-w_in * dt) * nav.attitude *
                  quaternion_from_vector(imu.gyro * dt))
                     .normalized();

  const Vector3d gravity(0.0, 0.0, normal_gravity(pos.latitude, pos.height));
  const Vector3d accel_ned = C * imu.accel + gravity - (2.0 * w_ie + w_en).cross(nav.velocity);
  out.velocity = nav.velocity + accel_ned * dt;

  const Vector3d mean_velocity = 0.5 * (nav.velocity + out.velocity);
  out.position.latitude = pos.latitude + mean_velocity(0) * dt / rm;
  out.position.longitude = pos.longitude + mean_velocity(1) * dt / (rn * std::cos(pos.latitude));
  out.position.height = pos.height - mean_velocity(2) * dt;
  out.timestamp = nav.timestamp + dt;
  return out;
}

Matrix15d error_dynamics(const NavSolution& nav, const ImuSample& imu) {
  using namespace state;
  const Geodetic& pos = nav.position;
  const double lat = pos.latitude;
  const double h = pos.height;
  const auto radii = radii_of_curvature(lat);
  const double rm = radii.meridian + h;
  const double rn = radii.prime_vertical + h;
  const double sl = std::sin(lat);
  const double cl = std::cos(lat);
  const double tl = std::tan(lat);
  const double vn = nav.velocity(0);
  const double ve = nav.velocity(1);
  const double omega = Wgs84::earth_rate;

  const Vector3d w_ie = earth_rate_ned(lat);
  const Vector3d w_en = transport_rate_ned(pos, nav.velocity);
  const Matrix3d C = nav.body_to_ned();
  const Vector3d f_ned = C * imu.accel;

  // Partials of the earth and transport rates.
  const Vector3d dwie_dlat(-omega * sl, 0.0, -omega * cl);
  Matrix3d dwen_dv = Matrix3d::Zero();
  dwen_dv(0, 1) = 1.0 / rn;
  dwen_dv(1, 0) = -1.0 / rm;
  dwen_dv(2, 1) = -tl / rn;
  const Vector3d dwen_dlat(0.0, 0.0, -ve / (rn * cl * cl));
  const Vector3d dwen_dh(-ve / (rn * rn), vn / (rm * rm), ve * tl / (rn * rn));

  Matrix15d A = Matrix15d::Zero();

  // Attitude
  A.block<3, 3>(attitude, attitude) = -skew<double>(w_ie + w_en);
  A.block<3, 3>(attitude, velocity) = dwen_dv;
  A.block<3, 1>(attitude, latitude) = dwie_dlat + dwen_dlat;
  A.block<3, 1>(attitude, height) = dwen_dh;
  A.block<3, 3>(attitude, gyro_bias) = -C;

  // Velocity
  const Matrix3d v_skew = skew<double>(nav.velocity);
  A.block<3, 3>(velocity, attitude) = skew<double>(f_ned);
  A.block<3, 3>(velocity, velocity) = -skew<double>(2.0 * w_ie + w_en) + v_skew * dwen_dv;
  A.block<3, 1>(velocity, latitude) = v_skew * (2.0 * dwie_dlat + dwen_dlat);
  A.block<3, 1>(velocity, height) = v_skew * dwen_dh;
  A(velocity + 2, latitude) += normal_gravity_lat_derivative(lat);
  A(velocity + 2, height) += -Wgs84::free_air_gradient;
  A.block<3, 3>(velocity, accel_bias) = C;

  // Position
  A(latitude, velocity) = 1.0 / rm;
  A(latitude, height) = -vn / (rm * rm);
  A(longitude, velocity + 1) = 1.0 / (rn * cl);
  A(longitude, latitude) = ve * tl / (rn * cl);
  A(longitude, height) = -ve / (rn * rn * cl);
  A(height, velocity + 2) = -1.0;

  return A;
}

Matrix15d build_transition(const NavSolution& nav, const ImuSample& imu, double dt) {
  if (!(dt > 0.0) || dt > 0.1) {
    throw std::invalid_argument("build_transition: dt must lie in (0, 0.1] s");
  }
  return Matrix15d::Identity() + error_dynamics(nav, imu) * dt;
}

Matrix15d process_noise(const ImuNoise& noise, double dt) {
  using namespace state;
  Matrix15d Q = Matrix15d::Zero();
  Q.block<3, 3>(attitude, attitude).diagonal().setConstant(noise.gyro_psd * dt);
  Q.block<3, 3>(velocity, velocity).diagonal().setConstant(noise.accel_psd * dt);
  Q.block<3, 3>(gyro_bias, gyro_bias).diagonal().setConstant(noise.gyro_bias_psd * dt);
  Q.block<3, 3>(accel_bias, accel_bias).diagonal().setConstant(noise.accel_bias_psd * dt);
  return Q;
}

FeedbackResult apply_feedback(const NavSolution& nav, const ErrorState15& err,
                              const ImuBiases& biases) {
  using namespace state;
  FeedbackResult out{nav, biases};
  out.nav.attitude =
      (quaternion_from_vector(err.segment<3>(attitude)) * nav.attitude).normalized();
  out.nav.velocity -= err.segment<3>(velocity);
  out.nav.position.latitude -= err(latitude);
  out.nav.position.longitude -= err(longitude);
  out.nav.position.height -= err(height);
  out.biases.gyro += err.segment<3>(gyro_bias);
  out.biases.accel += err.segment<3>(accel_bias);
  return out;
}

NavSolution inject_error(const NavSolution& truth, const ErrorState15& err) {
  using namespace state;
  NavSolution out = truth;
  out.attitude = (quaternion_from_vector(-err.segment<3>(attitude)) * truth.attitude).normalized();
  out.velocity += err.segment<3>(velocity);
  out.position.latitude += err(latitude);
  out.position.longitude += err(longitude);
  out.position.height += err(height);
  return out;
}

ErrorState15 navigation_error(const NavSolution& estimate, const NavSolution& truth) {
  using namespace state;
  ErrorState15 err = ErrorState15::Zero();
  // C_est C_true^T = exp(-[phi x])
  const Eigen::AngleAxisd aa(estimate.attitude * truth.attitude.conjugate());
  err.segment<3>(attitude) = -aa.angle() * aa.axis();
  err.segment<3>(velocity) = estimate.velocity - truth.velocity;
  err(latitude) = estimate.position.latitude - truth.position.latitude;
  err(longitude) = estimate.position.longitude - truth.position.longitude;
  err(height) = estimate.position.height - truth.position.height;
  return err;
}

Observation15 gnss_observation(const NavSolution& nav, const GnssFix& fix, const GnssNoise& noise) {
  using namespace state;
  const Vector2d scale = horizontal_scale(nav.position);
  Observation15 obs;
  obs.kind = ObservationKind::sp;
  obs.z.resize(6);
  obs.z.head<3>() = nav.velocity - fix.velocity;
  obs.z(3) = scale(0) * (nav.position.latitude - fix.position.latitude);
  obs.z(4) = scale(1) * (nav.position.longitude - fix.position.longitude);
  obs.z(5) = -(nav.position.height - fix.position.height);

  obs.H = Observation15::Jacobian::Zero(6, kErrorStates);
  obs.H.block<3, 3>(0, velocity).setIdentity();
  obs.H(3, latitude) = scale(0);
  obs.H(4, longitude) = scale(1);
  obs.H(5, height) = -1.0;

  const double sv = noise.velocity_sigma * noise.velocity_sigma;
  const double sh = noise.horizontal_sigma * noise.horizontal_sigma;
  obs.R = Observation15::Noise::Zero(6, 6);
  obs.R.diagonal() << sv, sv, sv, sh, sh, noise.vertical_sigma * noise.vertical_sigma;
  return obs;
}

Matrix2d horizontal_position_covariance(const Matrix15d& P, const Geodetic& at) {
  const Vector2d scale = horizontal_scale(at);
  const Matrix2d block = P.block<2, 2>(state::latitude, state::latitude);
  return scale.asDiagonal() * block * scale.asDiagonal();
}

}  // namespace cin
