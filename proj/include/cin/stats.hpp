#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

namespace cin {

/// Regularized lower incomplete gamma function P(a, x).
template <typename Scalar>
Scalar regularized_gamma_p(Scalar a, Scalar x) {
  using std::abs;
  using std::exp;
  using std::log;
  if (a <= 0) throw std::invalid_argument("regularized_gamma_p: a must be positive");
  if (x <= 0) return Scalar(0);
  const Scalar log_prefix = -x + a * log(x) - std::lgamma(a);
  constexpr Scalar eps = std::numeric_limits<Scalar>::epsilon();
  if (x < a + 1) {
    Scalar term = 1 / a;
    Scalar sum = term;
    for (int n = 1; n < 10000; ++n) {
      term *= x / (a + n);
      sum += term;
      if (abs(term) < abs(sum) * eps) break;
    }
    return sum * exp(log_prefix);
  }
  // Continued fraction for Q(a, x), modified Lentz.
  constexpr Scalar tiny = std::numeric_limits<Scalar>::min() / eps;
  Scalar b = x + 1 - a;
  Scalar c = 1 / tiny;
  Scalar d = 1 / b;
  Scalar h = d;
  for (int i = 1; i < 10000; ++i) {
    const Scalar an = -i * (i - a);
    b += 2;
    d = an * d + b;
    if (abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (abs(c) < tiny) c = tiny;
    d = 1 / d;
    const Scalar delta = d * c;
    h *= delta;
    if (abs(delta - 1) < eps) break;
  }
  return 1 - exp(log_prefix) * h;
}

template <typename Scalar>
Scalar chi_square_cdf(Scalar x, int dof) {
  return regularized_gamma_p(Scalar(dof) / 2, x / 2);
}

/// Inverse CDF of the chi-square distribution. Returns 0 for p <= 0.
template <typename Scalar>
Scalar chi_square_quantile(Scalar p, int dof) {
  if (dof < 1) throw std::invalid_argument("chi_square_quantile: dof must be >= 1");
  if (p <= 0) return Scalar(0);
  if (p >= 1) return std::numeric_limits<Scalar>::infinity();
  Scalar lo = 0;
  Scalar hi = Scalar(dof) + 10;
  while (chi_square_cdf(hi, dof) < p) hi *= 2;
  for (int i = 0; i < 300 && hi - lo > std::numeric_limits<Scalar>::epsilon() * hi; ++i) {
    const Scalar mid = (lo + hi) / 2;
    if (chi_square_cdf(mid, dof) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return (lo + hi) / 2;
}

/// Two-sided interval for the mean of `runs` independent chi-square(dof) samples.
template <typename Scalar>
struct MeanChiSquareBounds {
  Scalar lower;
  Scalar upper;
};

template <typename Scalar>
MeanChiSquareBounds<Scalar> mean_chi_square_bounds(int dof, int runs, Scalar confidence) {
  const int total = dof * runs;
  const Scalar tail = (1 - confidence) / 2;
  return {chi_square_quantile(tail, total) / runs, chi_square_quantile(1 - tail, total) / runs};
}

}  // namespace cin
