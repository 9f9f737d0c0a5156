//! @file postproc.hpp
//! Statistics of a Hermite polynomial-chaos field stored in TT format with
//! the spatial grid as the first mode.  Orthogonality of the basis turns the
//! mean into a single slice contraction and the variance into a weighted
//! Gram contraction; tail probabilities at one node are integrated on a
//! Gauss-Hermite grid through a cross approximation of the weight-scaled
//! indicator.

#pragma once

#include "ttsg/tt.hpp"

namespace ttsg
{
  //! expectation over the stochastic modes: the all-zero coefficient slice
  Vec<double> tt_mean_field(const TTTensor<double>& u);

  //! pointwise variance sum_{a != 0} a! u_a(x)^2
  Vec<double> tt_variance_field(const TTTensor<double>& u);

  //! evaluate the chaos expansion at one Gaussian sample y (one entry per
  //! stochastic mode); returns the field over the first mode
  Vec<double> tt_eval_hermite(const TTTensor<double>& u, const Vec<double>& y);

  struct ExceedanceOptions
  {
    int n_quad = 6;          //!< Gauss-Hermite points per stochastic mode
    double cross_tol = 1e-5; //!< tolerance of the indicator cross
    Index rank_max = 30;     //!< rank budget (and starting guess rank)
    int n_it_max = 8;
    unsigned seed = 99;      //!< warmup seed of the indicator cross
    //! Independent cross runs whose probabilities are combined by median.
    //! One run occasionally lands a poor warmup and mis-sums a thin tail;
    //! the median of a few restarts suppresses such outliers.
    int restarts = 1;
  };

  struct ExceedanceResult
  {
    double probability = 0.0;
    Index max_rank = 0;        //!< largest rank of the indicator train
    long long evaluations = 0; //!< surrogate evaluations spent by the cross
    int iterations = 0;
  };

  //! P(u(node, theta) > threshold) for standard normal theta, integrated on
  //! the tensor Gauss-Hermite grid; the result is clamped to [0, 1]
  ExceedanceResult exceedance_probability(const TTTensor<double>& u, Index node,
                                          double threshold,
                                          const ExceedanceOptions& opts = {});
}  // namespace ttsg
