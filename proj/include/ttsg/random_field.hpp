//! @file random_field.hpp
//! Karhunen-Loeve discretization of a transformed Gaussian random field and
//! the block evaluator of its polynomial chaos coefficients.  The field is
//! kappa(x) = phi(gamma(x)) with gamma standard Gaussian; the chaos
//! coefficients are projected onto the leading KLE basis of the truncated
//! field phi(gamma_M), so the whole coefficient tensor fits one TT
//! representation with the KLE index on the left border.

#pragma once

#include "ttsg/block_cross.hpp"
#include "ttsg/fem.hpp"
#include "ttsg/hermite.hpp"
#include "ttsg/tt.hpp"

#include <functional>
#include <ostream>

namespace ttsg
{
  //! isotropic Gaussian covariance kernel exp(-||x-y||^2 / (2 l_c^2))
  struct CovarianceModel
  {
    double l_c = 1.0;
  };

  //! kernel matrix on a set of points (rows of nodes are coordinates)
  Mat<double> covariance_matrix(const CovarianceModel& model, const Mat<double>& nodes);

  //! Given a covariance value c_kappa of the transformed field (relative to
  //! its variance), find the covariance c_gamma of the underlying Gaussian
  //! field: solve sum_{i>=1} i! phi_i^2 c^i = c_kappa * F(1) on [-1, 1] by
  //! safeguarded Newton iteration.  Throws std::domain_error when the target
  //! is outside the attainable range.
  double gamma_cov_from_kappa_cov(double c_kappa, const TransformCoefficients& phi);

  //! entrywise transform of a kappa covariance matrix to the gamma one,
  //! with memoization over repeated covariance values
  Mat<double> gamma_cov_matrix(const Mat<double>& cov_kappa, const TransformCoefficients& phi);

  //! Forward counterpart: entrywise map of a gamma covariance matrix to the
  //! kappa one through C -> sum_{i>=1} i! phi_i^2 C^i.  Feeding the rank-M
  //! germ covariance g g^T yields the exact covariance of the truncated
  //! expansion, which is what the projection basis has to span.
  Mat<double> kappa_cov_from_germ_cov(const Mat<double>& cov_gamma,
                                      const TransformCoefficients& phi);

  //! top-M eigenpairs of the covariance operator discretized with lumped
  //! node weights
  struct KleBasisSet
  {
    Mat<double> scaled;       //!< N x M, eigenvectors times sqrt(eigenvalue)
    Mat<double> orthonormal;  //!< N x M, orthonormal under the weighted inner product
    Vec<double> values;       //!< eigenvalues, nonincreasing, clipped at zero
  };

  //! Solve the weighted eigenproblem C W g = lambda g through the symmetric
  //! form W^{1/2} C W^{1/2}; negative eigenvalues are clipped to zero before
  //! the square-root scaling.
  KleBasisSet discrete_kle(const Mat<double>& cov, const Vec<double>& weights, Index M);

  //! everything the chaos coefficient evaluator needs, immutable once built
  struct PCEProblem
  {
    Index M = 0;               //!< stochastic dimension
    int order = 0;             //!< per-mode polynomial order bound; mode sizes are order+1
    TransformCoefficients phi; //!< transform coefficients up to order min(M*order, 40)
    Mat<double> g;             //!< N x M Gaussian KLE vectors, sqrt(eigenvalue)-scaled
    Mat<double> v;             //!< N x L projection basis, weighted-orthonormal
    Vec<double> kappa_bar;     //!< N mean-field node values
    Vec<double> weights;       //!< N lumped spatial quadrature weights
    Vec<double> lambda_g;      //!< Gaussian KLE eigenvalues (diagnostics)
    Vec<double> mu_v;          //!< truncated-field KLE eigenvalues (diagnostics)

    Index L() const { return v.cols(); }
    Index numNodes() const { return weights.size(); }
    std::vector<Index> modeSizes() const
    {
      return std::vector<Index>(std::size_t(M), Index(order) + 1);
    }
  };

  //! Assemble the KLE bases and transform coefficients on a mesh.  The
  //! projection vectors are KLE modes of the truncated field phi(gamma_M)
  //! rather than of the idealized kernel, and their count L is the smallest
  //! one whose spectral tail keeps the best-approximation error of the
  //! fluctuation at or below kle_tol relative to the full field.  Any fixed
  //! L independent of the transform would floor the surrogate error at the
  //! discarded-tail level no matter how accurate the later stages are.
  PCEProblem build_pce_problem(const Mesh& mesh, const CovarianceModel& model,
                               const std::function<double(double)>& transform,
                               Index M, int order, double kle_tol = 1e-4);

  //! Chaos coefficients of the field fluctuation as a block tensor family:
  //! for a multi-index alpha of total order s, output l is
  //!   (s! / prod_m alpha_m!) * phi_s * sum_x W(x) prod_m g_m(x)^{alpha_m} v_l(x).
  //! The all-zero index returns zeros: the mean field travels on a separate
  //! channel of the assembled TT, not through these coefficients.  Batches
  //! are evaluated with matrix products over the shared spatial quadrature.
  class PceBlockEvaluator : public BlockEvaluator
  {
  public:
    explicit PceBlockEvaluator(const PCEProblem& problem);

    const std::vector<Index>& modeSizes() const override { return modes_; }
    Index blockCount() const override { return prob_.L(); }

  protected:
    Vec<double> evaluateIndex(const std::vector<Index>& alpha) const override;
    Mat<double> evaluateBlock(const std::vector<std::vector<Index>>& prefixes, Index m,
                              const std::vector<std::vector<Index>>& suffixes) const override;

  private:
    //! multinomial * phi factor for total order s and factorial product fprod
    double orderFactor(long long s, double fprod) const;

    PCEProblem prob_;
    std::vector<Index> modes_;
    Mat<double> vw_;  //!< v with rows premultiplied by the node weights
  };

  //! cross-approximated chaos coefficients plus the assembled field tensor
  struct KappaExpansion
  {
    TTTensor<double> coeff;  //!< M modes of size order+1, left border L
    TTTensor<double> field;  //!< spatial mode N first, then the M modes; borders 1
    CrossReport report;      //!< cross diagnostics
  };

  //! Run the block cross on the coefficient evaluator and attach the spatial
  //! block [kappa_bar, v_1..v_L]; the mean-field channel carries the unit
  //! vector at order zero through every stochastic mode.
  KappaExpansion build_kappa_tt(const PCEProblem& problem, double tol_rel,
                                Index rank_max = 200, std::ostream* trace = nullptr,
                                int n_it_max = 10);

}  // namespace ttsg
