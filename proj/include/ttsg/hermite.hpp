//! @file hermite.hpp
//! Probabilists' Hermite polynomials h_i (h_0 = 1, h_1 = z, h_{i+1} = z h_i - i h_{i-1}),
//! orthogonal under the standard Gaussian density with <h_i, h_j> = i! delta_ij.
//! Provides the Gauss-Hermite rule for that weight, the triple product
//! <h_a h_b h_c>, and the 1-D coefficient transform phi_i of a pointwise map.

#pragma once

#include "ttsg/dense.hpp"

#include <array>
#include <cmath>
#include <functional>

namespace ttsg
{
  //! largest polynomial order supported by the factorial table
  inline constexpr int kMaxHermiteOrder = 40;

  //! i! from a precomputed table; throws std::invalid_argument beyond order 40
  inline double factorial(int i)
  {
    static const auto table = []
    {
      std::array<double, kMaxHermiteOrder + 1> t{};
      t[0] = 1.0;
      for (int k = 1; k <= kMaxHermiteOrder; ++k)
        t[k] = t[k - 1] * double(k);
      return t;
    }();
    if (i < 0 || i > kMaxHermiteOrder)
      throw std::invalid_argument("factorial: order out of the supported range [0, 40]");
    return table[std::size_t(i)];
  }

  //! h_i(z) by the three-term recurrence
  inline double hermite_eval(int i, double z)
  {
    if (i < 0)
      throw std::invalid_argument("hermite_eval: negative order");
    double hm = 1.0, h = z;
    if (i == 0)
      return hm;
    for (int k = 1; k < i; ++k)
    {
      const double next = z * h - double(k) * hm;
      hm = h;
      h = next;
    }
    return h;
  }

  //! values h_0(z) .. h_p(z)
  inline Vec<double> hermite_all(int p, double z)
  {
    Vec<double> h(p + 1);
    h[0] = 1.0;
    if (p >= 1)
      h[1] = z;
    for (int k = 1; k < p; ++k)
      h[k + 1] = z * h[k] - double(k) * h[k - 1];
    return h;
  }

  struct QuadratureRule
  {
    Vec<double> nodes;
    Vec<double> weights;  //!< sum to 1 (Gaussian measure is normalized)
  };

  //! n-point Gauss-Hermite rule for the standard normal weight.  Nodes start
  //! from the Golub-Welsch eigenvalues and are polished by Newton iteration on
  //! the normalized recurrence; weights use w_k = 1/(n h~_{n-1}(z_k)^2) with
  //! h~_i = h_i/sqrt(i!).  Unlike squared eigenvector components, this keeps
  //! the tiny tail weights relatively accurate, which matters because they get
  //! multiplied by huge polynomial values at the outer nodes.
  inline QuadratureRule gauss_hermite_rule(int n)
  {
    if (n < 1)
      throw std::invalid_argument("gauss_hermite_rule: need at least one node");
    Mat<double> J = Mat<double>::Zero(n, n);
    for (int k = 1; k < n; ++k)
    {
      J(k - 1, k) = std::sqrt(double(k));
      J(k, k - 1) = J(k - 1, k);
    }
    Eigen::SelfAdjointEigenSolver<Mat<double>> es(J, Eigen::EigenvaluesOnly);

    QuadratureRule rule;
    rule.nodes = es.eigenvalues();
    // enforce the exact +/- symmetry of the node set
    for (int k = 0; k < n / 2; ++k)
    {
      const double z = 0.5 * (rule.nodes[n - 1 - k] - rule.nodes[k]);
      rule.nodes[k] = -z;
      rule.nodes[n - 1 - k] = z;
    }
    if (n % 2 == 1)
      rule.nodes[n / 2] = 0.0;

    // normalized values (h~_{n-1}(z), h~_n(z)); bounded for z inside the node range
    const auto top_pair = [n](double z)
    {
      double hm = 1.0, h = z;
      for (int i = 1; i < n; ++i)
      {
        const double next = (z * h - std::sqrt(double(i)) * hm) / std::sqrt(double(i + 1));
        hm = h;
        h = next;
      }
      return std::pair<double, double>(hm, h);
    };

    rule.weights.resize(n);
    for (int k = 0; k < n; ++k)
    {
      double z = rule.nodes[k];
      for (int pass = 0; pass < 3; ++pass)
      {
        const auto [hnm1, hn] = top_pair(z);
        const double step = hn / (std::sqrt(double(n)) * hnm1);
        z -= step;
        if (std::abs(step) <= 1e-15 * (1.0 + std::abs(z)))
          break;
      }
      rule.nodes[k] = z;
      const double hnm1 = top_pair(z).first;
      rule.weights[k] = 1.0 / (double(n) * hnm1 * hnm1);
    }
    // re-symmetrize after polishing and pin the total mass
    for (int k = 0; k < n / 2; ++k)
    {
      const double z = 0.5 * (rule.nodes[n - 1 - k] - rule.nodes[k]);
      rule.nodes[k] = -z;
      rule.nodes[n - 1 - k] = z;
      const double w = 0.5 * (rule.weights[k] + rule.weights[n - 1 - k]);
      rule.weights[k] = w;
      rule.weights[n - 1 - k] = w;
    }
    rule.weights /= rule.weights.sum();
    return rule;
  }

  //! Gaussian expectation <h_a h_b h_c>.  Nonzero only when a+b+c = 2s is even
  //! and the triangle inequality holds; then the value is
  //! a! b! c! / ((s-a)! (s-b)! (s-c)!).
  inline double triple_delta(int a, int b, int c)
  {
    if (a < 0 || b < 0 || c < 0)
      throw std::invalid_argument("triple_delta: negative order");
    const int sum = a + b + c;
    if (sum % 2 != 0)
      return 0.0;
    const int s = sum / 2;
    if (s - a < 0 || s - b < 0 || s - c < 0)
      return 0.0;
    return factorial(a) * factorial(b) * factorial(c) /
           (factorial(s - a) * factorial(s - b) * factorial(s - c));
  }

  //! Hermite coefficients of a pointwise transform phi, phi(z) = sum_i phi_i h_i(z)
  struct TransformCoefficients
  {
    Vec<double> phi;  //!< phi[i] for i = 0..Q

    int maxOrder() const { return int(phi.size()) - 1; }

    //! phi_i, treating orders beyond the stored table as (truncated to) zero
    double coeff(int i) const
    {
      return (i < int(phi.size())) ? phi[i] : 0.0;
    }
  };

  //! Project phi onto h_0..h_Q by Gauss-Hermite quadrature:
  //!   phi_i = (1/i!) sum_k w_k phi(z_k) h_i(z_k).
  //! The recurrence runs in the normalized basis h_i/sqrt(i!) so high orders do
  //! not overflow, and coefficients whose normalized magnitude sits at the
  //! quadrature's cancellation floor are snapped to zero; otherwise the huge
  //! multinomial factors of the field expansion would amplify pure roundoff.
  inline TransformCoefficients transform_coeffs(const std::function<double(double)>& phi,
                                                int Q, int n_quad = 64)
  {
    if (Q < 0 || Q > kMaxHermiteOrder)
      throw std::invalid_argument("transform_coeffs: order out of the supported range [0, 40]");
    if (2 * n_quad - 1 < 2 * Q)
      throw std::invalid_argument("transform_coeffs: quadrature too short for the requested order");

    const QuadratureRule rule = gauss_hermite_rule(n_quad);
    Vec<double> fz(n_quad);
    for (int k = 0; k < n_quad; ++k)
    {
      fz[k] = phi(rule.nodes[k]);
      if (!std::isfinite(fz[k]))
        throw std::invalid_argument("transform_coeffs: phi is not finite at a quadrature node");
    }

    // psi_i = sum_k w_k phi(z_k) h_i(z_k)/sqrt(i!), accumulated per node
    Vec<double> psi = Vec<double>::Zero(Q + 1);
    for (int k = 0; k < n_quad; ++k)
    {
      const double z = rule.nodes[k];
      const double wf = rule.weights[k] * fz[k];
      double hm = 1.0, h = z;
      psi[0] += wf;
      if (Q >= 1)
        psi[1] += wf * h;
      for (int i = 1; i < Q; ++i)
      {
        const double next = (z * h - std::sqrt(double(i)) * hm) / std::sqrt(double(i + 1));
        hm = h;
        h = next;
        psi[i + 1] += wf * h;
      }
    }

    const double floor = 1e-13 * std::max(1.0, fz.cwiseAbs().maxCoeff());
    TransformCoefficients tc;
    tc.phi.resize(Q + 1);
    for (int i = 0; i <= Q; ++i)
      tc.phi[i] = (std::abs(psi[i]) <= floor) ? 0.0 : psi[i] / std::sqrt(factorial(i));
    return tc;
  }

}  // namespace ttsg
