//! @file solver.hpp
//! Alternating one-block solver for symmetric positive definite linear
//! systems in TT format.  Each sweep right-orthogonalises the iterate,
//! then walks left to right solving the local Galerkin system one core at
//! a time; the local residual supplies extra basis directions so ranks can
//! grow until the global residual target is met.  Sweep-to-sweep progress
//! is tracked through the iterate change and the energy, both of which are
//! cheap; the exact global residual needs a full contraction with a doubled
//! operator layer, so it is certified only when the iterate has settled,
//! when the ranks reach a target extrapolated from earlier certificates,
//! or on the final sweep.

#pragma once

#include "ttsg/tt_matrix.hpp"

#include <iosfwd>
#include <vector>

namespace ttsg
{
  struct SolveOptions
  {
    double tol_rel = 1e-4;       //!< target residual relative to ||f||
    Index rank_max = 150;        //!< hard cap on solution ranks
    int max_sweeps = 50;
    Index enrich_rank = 6;       //!< residual directions added per bond and sweep
    Index dense_cutoff = 600;    //!< largest local system factorised directly
    double local_tol_factor = 0.05;  //!< local CG tolerance relative to tol_rel
    int local_max_iter = 600;
    std::ostream* trace = nullptr;
  };

  struct SolveReport
  {
    int sweeps = 0;
    bool converged = false;
    double residual_rel = 0.0;
    std::vector<double> residual_history;  //!< certified residuals, one per evaluation
    std::vector<double> energy_history;    //!< 0.5 <x,Ax> - <f,x> after each sweep
    long local_iterations = 0;             //!< total CG iterations across local solves
  };

  //! Solve A x = f starting from x0.  A must be square with symmetric
  //! action; f and x0 must match its dimensions and carry unit border ranks.
  TTTensor<double> als_solve(const TTMatrix<double>& A, const TTTensor<double>& f,
                             const TTTensor<double>& x0, const SolveOptions& opts = {},
                             SolveReport* report = nullptr);
}  // namespace ttsg
