//! @file mc.hpp
//! Monte Carlo reference for the transformed-field diffusion problem: each
//! sample draws the Gaussian germ, transforms it to a coefficient field on
//! the same truncated KLE basis the surrogate uses, and solves the
//! deterministic problem directly.  Samples are addressable by index, so
//! every statistic is reproducible for a fixed seed regardless of how the
//! loop is split.

#pragma once

#include "ttsg/fem.hpp"
#include "ttsg/random_field.hpp"
#include "ttsg/tt.hpp"

#include <cstdint>
#include <functional>

namespace ttsg
{
  struct McOptions
  {
    long long n_samples = 10000;
    std::uint64_t seed = 1;
  };

  //! Independent standard normal draws for sample z; the generator is seeded
  //! from (seed, z), so germs do not depend on evaluation order.
  Vec<double> gaussian_germ(Index M, std::uint64_t seed, long long z);

  //! coefficient field phi(sum_m g_m theta_m) at all mesh nodes
  Vec<double> field_sample(const PCEProblem& problem,
                           const std::function<double(double)>& phi,
                           const Vec<double>& theta);

  //! sample statistics of the solution field over all nodes
  struct McReference
  {
    Vec<double> mean;      //!< sample mean, boundary nodes stay zero
    Vec<double> variance;  //!< unbiased sample variance
    double p_star = 0.0;   //!< frequency of u(probe) > threshold
    long long n_samples = 0;
  };

  //! Run n_samples deterministic solves and accumulate mean, variance and
  //! the exceedance frequency at one node (id in the all-nodes numbering).
  //! f holds right-hand side node values over all nodes.
  McReference mc_reference(const Mesh& mesh, const PCEProblem& problem,
                           const std::function<double(double)>& phi, const Vec<double>& f,
                           Index probe_node, double threshold, const McOptions& opts);

  //! sample-averaged relative discrete L2 errors of the tensor surrogates
  struct SurrogateErrors
  {
    double e_kappa = 0.0;  //!< coefficient field error over all nodes
    double e_u = 0.0;      //!< solution error over interior nodes
    long long n_samples = 0;
  };

  //! Compare kappa_tt (spatial mode over all nodes) and u_tt (spatial mode
  //! over interior nodes) against exact per-sample fields: the reference
  //! coefficient applies phi pointwise to the truncated KLE germ, and the
  //! reference solution solves the deterministic problem with it.
  SurrogateErrors surrogate_errors(const Mesh& mesh, const PCEProblem& problem,
                                   const std::function<double(double)>& phi,
                                   const Vec<double>& f, const TTTensor<double>& kappa_tt,
                                   const TTTensor<double>& u_tt, const McOptions& opts);

}  // namespace ttsg
