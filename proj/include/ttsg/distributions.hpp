//! @file distributions.hpp
//! Pointwise transforms phi that turn a standard Gaussian field into the target
//! marginal: a shifted log-normal and a shifted Beta(5,2) obtained by inverse
//! CDF sampling through the Gaussian CDF.

#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

namespace ttsg
{
  //! phi(z) = exp(1 + sigma*z/2) + 10; the shift keeps the field well coercive
  inline std::function<double(double)> lognormal_phi(double sigma)
  {
    return [sigma](double z) { return std::exp(1.0 + 0.5 * sigma * z) + 10.0; };
  }

  //! CDF of Beta(5,2): B(t) = 6 t^5 - 5 t^6 on [0,1]
  inline double beta52_cdf(double t)
  {
    if (t <= 0.0)
      return 0.0;
    if (t >= 1.0)
      return 1.0;
    const double t5 = t * t * t * t * t;
    return 6.0 * t5 - 5.0 * t5 * t;
  }

  //! Inverse CDF of Beta(5,2) by safeguarded Newton iteration (bisection
  //! fallback), to absolute tolerance 1e-13.  Start values use the endpoint
  //! asymptotics B(t) ~ 6 t^5 near 0 and 1 - B(t) ~ 15 (1-t)^2 near 1.
  inline double beta52_inv_cdf(double y)
  {
    if (y < 0.0 || y > 1.0)
      throw std::invalid_argument("beta52_inv_cdf: argument outside [0,1]");
    if (y == 0.0)
      return 0.0;
    if (y == 1.0)
      return 1.0;

    double t = (y < 0.5) ? std::pow(y, 0.2) : 1.0 - std::sqrt((1.0 - y) / 15.0);
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 60; ++it)
    {
      const double f = beta52_cdf(t) - y;
      if (f > 0.0)
        hi = t;
      else
        lo = t;
      const double df = 30.0 * t * t * t * t * (1.0 - t);
      double next = (df > 0.0) ? t - f / df : 0.5 * (lo + hi);
      if (!(next > lo && next < hi))
        next = 0.5 * (lo + hi);  // Newton left the bracket: bisect
      const bool done = std::abs(next - t) <= 1e-13;
      t = next;
      if (done)
        break;
    }
    return t;
  }

  //! phi(z) = B^{-1}(Phi(z)) + 1 with Phi the standard normal CDF; the field
  //! takes values in (1, 2)
  inline std::function<double(double)> beta_phi()
  {
    return [](double z)
    {
      const double u = 0.5 * (1.0 + std::erf(z / std::sqrt(2.0)));
      return beta52_inv_cdf(u) + 1.0;
    };
  }

}  // namespace ttsg
