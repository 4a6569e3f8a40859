#include "cin/ekf.hpp"

#include "test_support.hpp"

#include <Eigen/Eigenvalues>
#include <doctest.h>

#include <vector>

using namespace cin;
using cin::test::min_eigenvalue;
using cin::test::random_filter_state;
using cin::test::random_observation;
using cin::test::Rng;

using Matrix15 = Eigen::Matrix<double, 15, 15>;

TEST_CASE("predict with identity transition") {
  Rng rng(1);
  const FilterState15 fs = random_filter_state(rng);
  const FilterState15 same = predict<double, 15>(fs, Matrix15::Identity(), Matrix15::Zero());
  CHECK(same.x == fs.x);
  CHECK((same.P - fs.P).cwiseAbs().maxCoeff() < 1e-15);

  const double q = 0.25;
  const FilterState15 grown = predict<double, 15>(fs, Matrix15::Identity(), q * Matrix15::Identity());
  CHECK((grown.P - fs.P - q * Matrix15::Identity()).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(grown.P.trace() == doctest::Approx(fs.P.trace() + 15 * q));
}

TEST_CASE("predicted covariance is bounded below by Q") {
  for (int seed = 0; seed < 20; ++seed) {
    Rng rng(100 + seed);
    const FilterState15 fs = random_filter_state(rng);
    const Matrix15 F = rng.matrix<15, 15>();
    const Matrix15 Q = rng.spd(15, 0.01, 1.0);
    const FilterState15 out = predict<double, 15>(fs, F, Q);
    CHECK(min_eigenvalue(out.P) >= min_eigenvalue(Q) - 1e-9);
  }
}

TEST_CASE("scalar Kalman gain embedded in the 15-state") {
  FilterState15 fs;
  fs.P = Matrix15::Identity();
  Observation15 obs;
  obs.z = Eigen::VectorXd::Constant(1, 2.0);
  obs.H = Observation15::Jacobian::Zero(1, 15);
  obs.H(0, 4) = 1.0;
  obs.R = Eigen::MatrixXd::Constant(1, 1, 1.0);

  const FilterState15 out = update(fs, obs);
  // k = p / (p + r) = 0.5; x = k z; p+ = (1 - k) p
  CHECK(out.x(4) == doctest::Approx(1.0));
  CHECK(out.P(4, 4) == doctest::Approx(0.5));
  CHECK(out.P(3, 3) == doctest::Approx(1.0));
}

TEST_CASE("huge measurement noise leaves the state alone") {
  Rng rng(3);
  const FilterState15 fs = random_filter_state(rng);
  Observation15 obs = random_observation(rng, 3);
  obs.R *= 1e12;
  const FilterState15 out = update(fs, obs);
  const double innovation = (obs.z - obs.H * fs.x).norm();
  CHECK((out.x - fs.x).norm() <= 1e-6 * innovation);
}

TEST_CASE("zero innovation moves no state but shrinks covariance") {
  Rng rng(4);
  const FilterState15 fs = random_filter_state(rng);
  Observation15 obs = random_observation(rng, 2);
  obs.z = obs.H * fs.x;
  const FilterState15 out = update(fs, obs);
  CHECK((out.x - fs.x).norm() < 1e-12);
  CHECK(out.P.trace() < fs.P.trace());
}

TEST_CASE("singular innovation covariance is rejected with diagnostics") {
  FilterState15 fs;
  fs.P = Matrix15::Zero();
  Observation15 obs;
  obs.z = Eigen::VectorXd::Constant(1, 3.0);
  obs.H = Observation15::Jacobian::Zero(1, 15);
  obs.H(0, 0) = 1.0;
  obs.R = Eigen::MatrixXd::Zero(1, 1);
  try {
    (void)update(fs, obs);
    FAIL("expected UpdateRejected");
  } catch (const UpdateRejected& e) {
    CHECK(e.innovation().size() == 1);
    CHECK(e.innovation()(0) == 3.0);
  }
}

TEST_CASE("Joseph form matches the canonical covariance on well-conditioned problems") {
  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    const FilterState15 fs = random_filter_state(rng, 0.5, 5.0);
    const Observation15 obs = random_observation(rng, 1 + i % 6, 0.5, 2.0);
    const FilterState15 out = update(fs, obs);

    const Eigen::MatrixXd S = obs.H * fs.P * obs.H.transpose() + obs.R;
    const Eigen::MatrixXd K = fs.P * obs.H.transpose() * S.inverse();
    const Matrix15 canonical = (Matrix15::Identity() - K * obs.H) * fs.P;
    CHECK((out.P - canonical).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("Joseph form stays PSD where the canonical form goes indefinite") {
  Rng rng(9);
  int canonical_indefinite = 0;
  for (int i = 0; i < 200; ++i) {
    FilterState15 fs;
    fs.P = rng.spd(15, 1.0, 1e8);
    Observation15 obs = random_observation(rng, 6);
    obs.R = 1e-6 * Eigen::MatrixXd::Identity(6, 6);
    const FilterState15 out = update(fs, obs);

    const Eigen::MatrixXd S = obs.H * fs.P * obs.H.transpose() + obs.R;
    const Eigen::MatrixXd K = fs.P * obs.H.transpose() * S.inverse();
    Matrix15 canonical = (Matrix15::Identity() - K * obs.H) * fs.P;
    canonical = (canonical + canonical.transpose()) / 2;
    if (min_eigenvalue(canonical) < 0.0) ++canonical_indefinite;
    CHECK(min_eigenvalue(out.P) >= 0.0);
  }
  MESSAGE("canonical form indefinite in " << canonical_indefinite << " of 200 instances");
  CHECK(canonical_indefinite > 0);
}

TEST_CASE("stacking") {
  Rng rng(12);
  const Observation15 one = random_observation(rng, 2);
  const std::vector<Observation15> single{one};
  const Observation15 s = stack<double, 15>(single);
  CHECK(s.z == one.z);
  CHECK(s.H == one.H);
  CHECK(s.R == one.R);
  CHECK(s.kind == ObservationKind::stacked);

  const std::vector<Observation15> rows{random_observation(rng, 1), random_observation(rng, 1)};
  const Observation15 two = stack<double, 15>(rows);
  CHECK(two.rows() == 2);
  CHECK(two.R(0, 1) == 0.0);
  CHECK(two.R(1, 0) == 0.0);
  CHECK(two.R(0, 0) == rows[0].R(0, 0));
  CHECK(two.R(1, 1) == rows[1].R(0, 0));

  CHECK_THROWS(stack<double, 15>(std::span<const Observation15>{}));
}

TEST_CASE("batch stacked update equals sequential updates") {
  Rng rng(13);
  for (int i = 0; i < 100; ++i) {
    const FilterState15 fs = random_filter_state(rng);
    const std::vector<Observation15> parts{random_observation(rng, 2), random_observation(rng, 1),
                                           random_observation(rng, 3)};
    const FilterState15 batch = update(fs, stack<double, 15>(parts));
    FilterState15 seq = fs;
    for (const auto& p : parts) seq = update(seq, p);
    CHECK((batch.x - seq.x).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((batch.P - seq.P).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("update is invariant to row permutation") {
  Rng rng(14);
  const FilterState15 fs = random_filter_state(rng);
  const std::vector<Observation15> parts{random_observation(rng, 1), random_observation(rng, 2),
                                         random_observation(rng, 1)};
  const std::vector<Observation15> permuted{parts[2], parts[0], parts[1]};
  const FilterState15 a = update(fs, stack<double, 15>(parts));
  const FilterState15 b = update(fs, stack<double, 15>(permuted));
  CHECK((a.x - b.x).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((a.P - b.P).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("predict and update replay bit-exactly") {
  auto run = [] {
    Rng rng(21);
    FilterState15 fs = random_filter_state(rng);
    for (int i = 0; i < 50; ++i) {
      const Matrix15 F = Matrix15::Identity() + 0.01 * rng.matrix<15, 15>();
      fs = predict<double, 15>(fs, F, rng.spd(15, 0.001, 0.01));
      fs = update(fs, random_observation(rng, 1 + i % 3));
    }
    return fs;
  };
  const FilterState15 a = run();
  const FilterState15 b = run();
  CHECK(a.x == b.x);
  CHECK(a.P == b.P);
}

TEST_CASE("chi-square gate") {
  const Eigen::MatrixXd S1 = Eigen::MatrixXd::Identity(1, 1);
  CHECK(gate<double>(Eigen::VectorXd::Zero(1), S1, 0.001));
  // 10^2 = 100 > chi2_1(0.999) = 10.83
  CHECK_FALSE(gate<double>(Eigen::VectorXd::Constant(1, 10.0), S1, 0.001));
  CHECK(gate<double>(Eigen::VectorXd::Constant(1, 3.2), S1, 0.001));
  CHECK_FALSE(gate<double>(Eigen::VectorXd::Constant(1, 3.3), S1, 0.001));
  // alpha = 1 -> threshold 0
  CHECK(gate<double>(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2), 1.0));
  CHECK_FALSE(gate<double>(Eigen::VectorXd::Constant(2, 1e-6), Eigen::MatrixXd::Identity(2, 2), 1.0));
}

TEST_CASE("randomized predict/update cycles keep P symmetric PSD") {
  Rng rng(31);
  FilterState15 fs;
  fs.P = rng.spd(15, 0.01, 10.0);
  for (int i = 0; i < 2000; ++i) {
    const Matrix15 F = Matrix15::Identity() + 0.05 * rng.matrix<15, 15>();
    fs = predict<double, 15>(fs, F, rng.spd(15, 1e-6, 1e-3));
    fs = update(fs, random_observation(rng, 1 + i % 4, 1e-4, 1.0));
    REQUIRE((fs.P - fs.P.transpose()).cwiseAbs().maxCoeff() <= 1e-9);
    REQUIRE(min_eigenvalue(fs.P) >= -1e-9);
  }
}
