#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ttsg/distributions.hpp"
#include "ttsg/hermite.hpp"

using namespace ttsg;

namespace
{
  // series oracle for erf, good to ~1e-16 for |z| <= 3
  long double erf_series(long double z)
  {
    const long double two_over_sqrt_pi = 1.128379167095512573896L;
    long double term = z, sum = z;
    for (int n = 1; n < 120; ++n)
    {
      term *= -z * z / n;
      sum += term / (2 * n + 1);
    }
    return two_over_sqrt_pi * sum;
  }
}

TEST_CASE("std::erf matches the series oracle on a reference table")
{
  for (int k = 0; k < 20; ++k)
  {
    const double z = 0.15 * (k + 1);  // 0.15 .. 3.0
    CHECK(std::abs(std::erf(z) - double(erf_series(z))) <= 1e-12);
    CHECK(std::abs(std::erf(-z) + double(erf_series(z))) <= 1e-12);
  }
}

TEST_CASE("log-normal transform values and Hermite coefficients")
{
  const double sigma = 0.5;
  const auto phi = lognormal_phi(sigma);
  CHECK(phi(0.0) == doctest::Approx(std::exp(1.0) + 10.0).epsilon(1e-15));

  // phi_0 = e^{1 + sigma^2/8} + 10, phi_i = e^{1 + sigma^2/8} (sigma/2)^i / i!
  const auto tc = transform_coeffs(phi, 12);
  const double amp = std::exp(1.0 + sigma * sigma / 8.0);
  CHECK(tc.phi[0] == doctest::Approx(amp + 10.0).epsilon(1e-12));
  for (int i = 1; i <= 10; ++i)
    CHECK(tc.phi[i] ==
          doctest::Approx(amp * std::pow(0.5 * sigma, i) / factorial(i)).epsilon(1e-9));
}

TEST_CASE("Beta(5,2) CDF values and monotonicity")
{
  CHECK(beta52_cdf(0.0) == 0.0);
  CHECK(beta52_cdf(1.0) == 1.0);
  CHECK(beta52_cdf(0.5) == doctest::Approx(0.109375).epsilon(1e-15));
  for (int k = 0; k < 50; ++k)
    CHECK(beta52_cdf(0.02 * (k + 1)) >= beta52_cdf(0.02 * k));
}

TEST_CASE("Beta(5,2) inverse CDF round trips to 1e-12")
{
  for (int k = 1; k < 200; ++k)
  {
    const double y = k / 200.0;
    const double t = beta52_inv_cdf(y);
    CHECK(std::abs(beta52_cdf(t) - y) <= 1e-12);
  }
  for (double t : {0.05, 0.3, 0.5, 0.7355, 0.95, 0.999})
    CHECK(std::abs(beta52_inv_cdf(beta52_cdf(t)) - t) <= 1e-11);
  // extreme tails stay inside [0,1] and remain accurate
  CHECK(std::abs(beta52_cdf(beta52_inv_cdf(1e-14)) - 1e-14) <= 1e-20);
  CHECK(beta52_inv_cdf(0.0) == 0.0);
  CHECK(beta52_inv_cdf(1.0) == 1.0);
  CHECK_THROWS_AS(beta52_inv_cdf(1.5), std::invalid_argument);
}

TEST_CASE("beta transform maps into (1,2) with the Beta(5,2) moments")
{
  const auto phi = beta_phi();
  for (double z : {-8.0, -2.0, 0.0, 1.0, 3.0, 8.0})
  {
    CHECK(phi(z) >= 1.0);
    CHECK(phi(z) <= 2.0);
  }
  // E[Beta(5,2)] = 5/7 and Var = 10/(49*8); the transform shifts the mean by 1
  const auto tc = transform_coeffs(phi, 24);
  CHECK(tc.phi[0] == doctest::Approx(1.0 + 5.0 / 7.0).epsilon(1e-8));
  double var = 0;
  for (int i = 1; i <= 24; ++i)
    var += factorial(i) * tc.phi[i] * tc.phi[i];
  CHECK(var == doctest::Approx(10.0 / (49.0 * 8.0)).epsilon(1e-7));
}
