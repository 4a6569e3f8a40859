#include "cin/stats.hpp"

#include <doctest.h>

using namespace cin;

// Reference quantiles computed offline with scipy.stats.chi2.
TEST_CASE("chi-square quantiles match reference tables") {
  CHECK(chi_square_quantile(0.999, 1) == doctest::Approx(10.827566170662733).epsilon(1e-10));
  CHECK(chi_square_quantile(0.95, 2) == doctest::Approx(5.991464547107979).epsilon(1e-10));
  CHECK(chi_square_quantile(0.99, 3) == doctest::Approx(11.344866730144373).epsilon(1e-10));
  CHECK(chi_square_quantile(0.999, 8) == doctest::Approx(26.12448155837614).epsilon(1e-10));
  CHECK(chi_square_quantile(0.025, 2) == doctest::Approx(0.05063561596857975).epsilon(1e-9));
  CHECK(chi_square_quantile(0.975, 2) == doctest::Approx(7.377758908227871).epsilon(1e-10));
}

TEST_CASE("chi-square cdf") {
  CHECK(chi_square_cdf(3.0, 5) == doctest::Approx(0.3000141641213724).epsilon(1e-12));
  CHECK(chi_square_cdf(0.0, 3) == 0.0);
  for (double p : {0.01, 0.3, 0.5, 0.9, 0.999}) {
    CHECK(chi_square_cdf(chi_square_quantile(p, 7), 7) == doctest::Approx(p).epsilon(1e-12));
  }
}

TEST_CASE("limits") {
  CHECK(chi_square_quantile(0.0, 4) == 0.0);
  CHECK(std::isinf(chi_square_quantile(1.0, 4)));
  CHECK_THROWS(chi_square_quantile(0.5, 0));
}

TEST_CASE("mean NEES bounds for 200 runs of 2 dof") {
  const auto b = mean_chi_square_bounds(2, 200, 0.95);
  CHECK(b.lower == doctest::Approx(1.7324088268145732).epsilon(1e-10));
  CHECK(b.upper == doctest::Approx(2.2865274098303248).epsilon(1e-10));
}
