//! @file galerkin.hpp
//! Stochastic Galerkin operator of the elliptic problem in tensor-train form.
//! The spatial part is a block of weighted stiffness matrices (mean field
//! plus one per projection vector); each stochastic mode contracts the
//! coefficient chain with the Hermite triple products, which leaves the
//! chain ranks unchanged.

#pragma once

#include "ttsg/random_field.hpp"
#include "ttsg/tt_matrix.hpp"

#include <vector>

namespace ttsg
{
  //! Per-mode operator cores K(a, alpha, beta, b) = sum_nu D(alpha,beta,nu)
  //! chain(a, nu, b) for alpha, beta = 0..p, where D is the Gaussian triple
  //! product.  The chain must carry mode sizes 2p+1 so the contraction is
  //! exact for all solution orders up to p.
  std::vector<TTMatrixCore<double>> stochastic_cores(const TTTensor<double>& chain, int p);

  //! weighted stiffness matrices for the mean field and every projection
  //! vector, eliminated to interior nodes: [K_bar, K_1, .., K_L]
  std::vector<Mat<double>> spatial_stiffness_blocks(const Mesh& mesh, const PCEProblem& problem);

  //! Chain the spatial blocks (as the left border index) with the stochastic
  //! cores into one operator.  The first stochastic core's left rank must
  //! equal the number of spatial blocks.
  TTMatrix<double> assemble_operator_tt(const std::vector<Mat<double>>& spatial,
                                        const std::vector<TTMatrixCore<double>>& chain);

  //! full operator assembly: cross-approximated coefficient chain (mean
  //! channel included) contracted per mode and glued to the spatial blocks
  TTMatrix<double> assemble_operator_tt(const Mesh& mesh, const PCEProblem& problem,
                                        const KappaExpansion& kappa, int p);

  //! rank-1 right-hand side f0 at stochastic order zero: f = f0 x e0 x .. x e0
  TTTensor<double> assemble_rhs_tt(const Vec<double>& f0, Index M, int p);

}  // namespace ttsg
