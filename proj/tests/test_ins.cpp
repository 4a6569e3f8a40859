#include "cin/ins.hpp"

#include "fd_support.hpp"
#include "test_support.hpp"

#include <doctest.h>

using namespace cin;
using cin::test::kDeg;
using cin::test::Rng;

namespace {

NavSolution at_rest(double yaw = 0.3) {
  NavSolution nav;
  nav.attitude = attitude_from_euler(0.01, -0.02, yaw);
  nav.position = {35.0 * kDeg, 139.0 * kDeg, 40.0};
  return nav;
}

/// IMU output of a vehicle fixed to the Earth.
ImuSample stationary_imu(const NavSolution& nav) {
  const Matrix3d Ct = nav.body_to_ned().transpose();
  ImuSample imu;
  imu.gyro = Ct * earth_rate_ned(nav.position.latitude);
  imu.accel = -Ct * Vector3d(0, 0, normal_gravity(nav.position.latitude, nav.position.height));
  return imu;
}

}  // namespace

TEST_CASE("stationary equilibrium") {
  const NavSolution nav = at_rest();
  const NavSolution out = mechanize(nav, stationary_imu(nav), 0.01);
  const Vector3d dn = ned_from_geodetic(nav.position, out.position);
  CHECK(dn.norm() < 1e-6);
  CHECK(out.velocity.norm() < 1e-6);
  CHECK(nav.attitude.angularDistance(out.attitude) < 1e-8);
  CHECK(out.timestamp == doctest::Approx(0.01));
}

TEST_CASE("uniform northward acceleration from rest") {
  NavSolution nav = at_rest(0.0);
  const NavSolution start = nav;
  const Matrix3d Ct = nav.body_to_ned().transpose();
  ImuSample imu;
  imu.accel = Ct * (Vector3d(1.0, 0.0, 0.0) -
                    Vector3d(0, 0, normal_gravity(nav.position.latitude, nav.position.height)));
  for (int i = 0; i < 100; ++i) nav = mechanize(nav, imu, 0.01);
  const Vector3d d = ned_from_geodetic(start.position, nav.position);
  CHECK(nav.velocity(0) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(d(0) == doctest::Approx(0.5).epsilon(2e-3));
  CHECK(std::abs(d(1)) < 1e-3);
}

TEST_CASE("mechanize preconditions") {
  const NavSolution nav = at_rest();
  const ImuSample imu = stationary_imu(nav);
  CHECK_THROWS_AS(mechanize(nav, imu, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(mechanize(nav, imu, 0.2), std::invalid_argument);
  ImuSample bad = imu;
  bad.accel(1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(mechanize(nav, bad, 0.01), std::invalid_argument);
  CHECK_THROWS_AS(build_transition(nav, imu, 0.0), std::invalid_argument);
}

TEST_CASE("transition structure") {
  Rng rng(5);
  const NavSolution nav = rng.nav();
  const ImuSample imu = rng.imu(0.0);

  const Matrix15d tiny = build_transition(nav, imu, 1e-14);
  CHECK((tiny - Matrix15d::Identity()).cwiseAbs().maxCoeff() <= 1e-12);

  const double dt = 0.01;
  const Matrix15d F = build_transition(nav, imu, dt);
  CHECK(F.block<6, 6>(9, 9) == Eigen::Matrix<double, 6, 6>::Identity());
  CHECK(F.block<6, 9>(9, 0).isZero(0.0));

  const Matrix3d expected = skew<double>(nav.body_to_ned() * imu.accel) * dt;
  CHECK((F.block<3, 3>(state::velocity, state::attitude) - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("attitude-to-velocity coupling matches finite differences of mechanize") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const NavSolution nav = rng.nav();
    const ImuSample imu = rng.imu(0.0);
    const double dt = 0.01;
    const Matrix15d F = build_transition(nav, imu, dt);
    for (int j = 0; j < 3; ++j) {
      ErrorState15 delta = ErrorState15::Zero();
      delta(state::attitude + j) = 1e-6;
      const ErrorState15 fd = cin::test::central_difference(nav, imu, delta, dt) / 1e-6;
      const Vector3d block = F.block<3, 1>(state::velocity, state::attitude + j);
      CHECK((fd.segment<3>(state::velocity) - block).norm() <= 1e-3 * block.norm() + 1e-9);
    }
  }
}

TEST_CASE("transition matches finite differences along random directions") {
  Rng rng(8);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const NavSolution nav = rng.nav();
    const ImuSample imu = rng.imu(0.0);
    ErrorState15 delta = rng.matrix<15, 1>();
    delta *= 1e-6 / delta.norm();
    worst = std::max(worst, cin::test::transition_fd_error(nav, imu, delta, 0.01));
  }
  MESSAGE("worst relative error " << worst);
  CHECK(worst <= 1e-3);
}

TEST_CASE("attitude stays normalized") {
  Rng rng(10);
  NavSolution nav = rng.nav();
  nav.position.height = 10.0;
  for (int i = 0; i < 10000; ++i) {
    const NavSolution next = mechanize(nav, rng.imu(0.0), 0.01);
    REQUIRE(std::abs(next.attitude.norm() - 1.0) <= 1e-9);
    nav = next;
    nav.velocity.setZero();
  }
  CHECK(std::abs(nav.attitude.norm() - 1.0) <= 1e-6);
}

TEST_CASE("mechanize is deterministic") {
  Rng rng(11);
  const NavSolution nav = rng.nav();
  const ImuSample imu = rng.imu(0.0);
  const NavSolution a = mechanize(nav, imu, 0.01);
  const NavSolution b = mechanize(nav, imu, 0.01);
  CHECK(a.attitude.coeffs() == b.attitude.coeffs());
  CHECK(a.velocity == b.velocity);
  CHECK(a.position.as_vector() == b.position.as_vector());
}

TEST_CASE("feedback conventions") {
  const NavSolution nav = at_rest();
  const FeedbackResult same = apply_feedback(nav, ErrorState15::Zero());
  CHECK(same.nav.attitude.angularDistance(nav.attitude) < 1e-15);
  CHECK(same.nav.velocity == nav.velocity);
  CHECK(same.nav.position.as_vector() == nav.position.as_vector());

  ErrorState15 err = ErrorState15::Zero();
  err(state::velocity) = 0.5;
  err(state::gyro_bias + 2) = 1e-4;
  const FeedbackResult fixed = apply_feedback(nav, err);
  CHECK(fixed.nav.velocity(0) == doctest::Approx(nav.velocity(0) - 0.5));
  CHECK(fixed.biases.gyro(2) == doctest::Approx(1e-4));

  // inject then feed back recovers the reference
  Rng rng(12);
  ErrorState15 e = 1e-4 * rng.matrix<15, 1>();
  e.segment<6>(9).setZero();
  const FeedbackResult round = apply_feedback(inject_error(nav, e), e);
  CHECK(round.nav.attitude.angularDistance(nav.attitude) < 1e-12);
  CHECK((round.nav.velocity - nav.velocity).norm() < 1e-12);
  CHECK((navigation_error(inject_error(nav, e), nav) - e).norm() < 1e-10);
}

TEST_CASE("closed-loop re-estimate shrinks") {
  const NavSolution truth = at_rest();
  ErrorState15 injected = ErrorState15::Zero();
  injected(state::velocity) = 0.3;
  injected(state::latitude) = 4.0 / 6.36e6;
  injected(state::longitude) = -3.0 / 5.2e6;
  NavSolution ins = inject_error(truth, injected);

  GnssFix fix;
  fix.position = truth.position;
  const GnssNoise noise{1.0, 1.0, 0.05};

  FilterState15 fs;
  fs.P.setZero();
  fs.P.diagonal().segment<3>(0).setConstant(1e-4);
  fs.P.diagonal().segment<3>(3).setConstant(0.25);
  fs.P(6, 6) = std::pow(5.0 / 6.36e6, 2);
  fs.P(7, 7) = std::pow(5.0 / 5.2e6, 2);
  fs.P(8, 8) = 25.0;
  fs.P.diagonal().segment<6>(9).setConstant(1e-8);

  fs = update(fs, gnss_observation(ins, fix, noise));
  const Vector2d first = horizontal_scale(ins.position).cwiseProduct(fs.x.segment<2>(6));
  ins = apply_feedback(ins, fs.x).nav;
  fs.x.setZero();

  fs = update(fs, gnss_observation(ins, fix, noise));
  const Vector2d second = horizontal_scale(ins.position).cwiseProduct(fs.x.segment<2>(6));
  CHECK(first.norm() > 1.0);
  CHECK(second.norm() < first.norm());
}

TEST_CASE("GNSS observation in NED meters") {
  const NavSolution nav = at_rest();
  GnssFix fix;
  fix.position = geodetic_from_ned(nav.position, Vector3d(-2.0, 1.0, 0.5));
  fix.velocity = Vector3d(0.1, 0, 0);
  const Observation15 obs = gnss_observation(nav, fix, GnssNoise{});
  CHECK(obs.consistent());
  CHECK(obs.z(0) == doctest::Approx(-0.1));
  CHECK(obs.z(3) == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(obs.z(4) == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(obs.z(5) == doctest::Approx(-0.5).epsilon(1e-6));
  CHECK(obs.R(3, 3) == 9.0);
}
