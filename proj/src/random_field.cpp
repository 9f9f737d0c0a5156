#include "ttsg/random_field.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace ttsg
{
  Mat<double> covariance_matrix(const CovarianceModel& model, const Mat<double>& nodes)
  {
    if (!(model.l_c > 0))
      throw std::invalid_argument("covariance_matrix: correlation length must be positive");
    const Index N = nodes.rows();
    Mat<double> C(N, N);
    const double inv = 1.0 / (2.0 * model.l_c * model.l_c);
    for (Index i = 0; i < N; ++i)
    {
      C(i, i) = 1.0;
      for (Index j = i + 1; j < N; ++j)
      {
        const double d2 = (nodes.row(i) - nodes.row(j)).squaredNorm();
        const double c = std::exp(-d2 * inv);
        C(i, j) = c;
        C(j, i) = c;
      }
    }
    return C;
  }

  namespace
  {
    //! F(c) = sum_{i>=1} i! phi_i^2 c^i and its derivative, by Horner
    struct CovSeries
    {
      Vec<double> a;  //!< a[i] = i! phi_i^2, i = 0..Q with a[0] = 0

      explicit CovSeries(const TransformCoefficients& phi)
      {
        const int Q = phi.maxOrder();
        a = Vec<double>::Zero(Q + 1);
        for (int i = 1; i <= Q; ++i)
          a[i] = factorial(i) * phi.coeff(i) * phi.coeff(i);
      }

      double value(double c) const
      {
        double s = 0.0;
        for (Index i = a.size() - 1; i >= 1; --i)
          s = (s + a[i]) * c;
        return s;
      }

      double slope(double c) const
      {
        double s = 0.0;
        for (Index i = a.size() - 1; i >= 2; --i)
          s = s * c + double(i) * a[i];
        s = s * c + (a.size() > 1 ? a[1] : 0.0);
        return s;
      }
    };
  }  // namespace

  double gamma_cov_from_kappa_cov(double c_kappa, const TransformCoefficients& phi)
  {
    const CovSeries F(phi);
    const double F1 = F.value(1.0);
    if (F1 == 0.0)
      return 0.0;  // constant transform: the Gaussian field never enters

    const double target = c_kappa * F1;
    const double Fm1 = F.value(-1.0);
    if (target > F1 || target < std::min(Fm1, 0.0))
    {
      std::ostringstream msg;
      msg << "gamma_cov_from_kappa_cov: target covariance " << c_kappa
          << " outside the attainable range [" << std::min(Fm1, 0.0) / F1 << ", 1]";
      throw std::domain_error(msg.str());
    }

    double lo = -1.0, hi = 1.0;
    double c = std::clamp(c_kappa, lo, hi);  // good start: F is near-linear for mild transforms
    const double tol = 1e-12 * std::abs(F1);
    for (int it = 0; it < 200; ++it)
    {
      const double r = F.value(c) - target;
      if (std::abs(r) <= tol)
        break;
      if (r > 0.0)
        hi = c;
      else
        lo = c;
      const double d = F.slope(c);
      double next = (d > 0.0) ? c - r / d : 0.5 * (lo + hi);
      if (!(next > lo && next < hi))
        next = 0.5 * (lo + hi);
      if (std::abs(next - c) <= 1e-15 * (1.0 + std::abs(c)))
      {
        c = next;
        break;
      }
      c = next;
    }
    return c;
  }

  Mat<double> gamma_cov_matrix(const Mat<double>& cov_kappa, const TransformCoefficients& phi)
  {
    if (cov_kappa.rows() != cov_kappa.cols())
      throw std::invalid_argument("gamma_cov_matrix: covariance matrix must be square");
    const Index N = cov_kappa.rows();
    Mat<double> C(N, N);
    // structured meshes repeat distances heavily, so identical covariance
    // values recur; cache the scalar solves
    std::unordered_map<double, double> memo;
    for (Index i = 0; i < N; ++i)
    {
      C(i, i) = gamma_cov_from_kappa_cov(cov_kappa(i, i), phi);
      for (Index j = i + 1; j < N; ++j)
      {
        const double ck = cov_kappa(i, j);
        auto it = memo.find(ck);
        double cg;
        if (it != memo.end())
          cg = it->second;
        else
        {
          cg = gamma_cov_from_kappa_cov(ck, phi);
          memo.emplace(ck, cg);
        }
        C(i, j) = cg;
        C(j, i) = cg;
      }
    }
    return C;
  }

  Mat<double> kappa_cov_from_germ_cov(const Mat<double>& cov_gamma,
                                      const TransformCoefficients& phi)
  {
    if (cov_gamma.rows() != cov_gamma.cols())
      throw std::invalid_argument("kappa_cov_from_germ_cov: covariance matrix must be square");
    const CovSeries F(phi);
    const Index N = cov_gamma.rows();
    Mat<double> C(N, N);
    for (Index j = 0; j < N; ++j)
      for (Index i = 0; i <= j; ++i)
      {
        const double c = F.value(0.5 * (cov_gamma(i, j) + cov_gamma(j, i)));
        C(i, j) = c;
        C(j, i) = c;
      }
    return C;
  }

  KleBasisSet discrete_kle(const Mat<double>& cov, const Vec<double>& weights, Index M)
  {
    const Index N = cov.rows();
    if (cov.cols() != N)
      throw std::invalid_argument("discrete_kle: covariance matrix must be square");
    if (weights.size() != N)
      throw std::invalid_argument("discrete_kle: weight count does not match the matrix");
    if (M < 1 || M > N)
      throw std::invalid_argument("discrete_kle: requested mode count outside [1, N]");
    if ((weights.array() <= 0.0).any())
      throw std::invalid_argument("discrete_kle: weights must be positive");

    const Vec<double> s = weights.array().sqrt();
    Mat<double> B = s.asDiagonal() * cov * s.asDiagonal();
    B = 0.5 * (B + B.transpose()).eval();
    const SymEig<double> eig = sym_eig(B);

    KleBasisSet out;
    out.values = eig.values.head(M).cwiseMax(0.0);
    out.orthonormal = eig.vectors.leftCols(M).array().colwise() / s.array();
    out.scaled = out.orthonormal * out.values.cwiseSqrt().asDiagonal();
    return out;
  }

  PCEProblem build_pce_problem(const Mesh& mesh, const CovarianceModel& model,
                               const std::function<double(double)>& transform,
                               Index M, int order, double kle_tol)
  {
    if (order < 0)
      throw std::invalid_argument("build_pce_problem: order must be nonnegative");
    if (!(kle_tol > 0.0))
      throw std::invalid_argument("build_pce_problem: projection tolerance must be positive");
    PCEProblem prob;
    prob.M = M;
    prob.order = order;

    const int Q = int(std::min<long long>(static_cast<long long>(M) * order, kMaxHermiteOrder));
    prob.phi = transform_coeffs(transform, Q, 64);

    const Mat<double> cov_k = covariance_matrix(model, mesh.nodes);
    const Mat<double> cov_g = gamma_cov_matrix(cov_k, prob.phi);

    const KleBasisSet kle_g = discrete_kle(cov_g, mesh.weights, M);
    prob.g = kle_g.scaled;
    prob.lambda_g = kle_g.values;
    prob.kappa_bar = Vec<double>::Constant(mesh.numNodes(), prob.phi.coeff(0));
    prob.weights = mesh.weights;

    // The projection basis must span what the truncated expansion actually
    // occupies, so diagonalize the covariance of phi(gamma_M) obtained from
    // the rank-M germ covariance by the forward series.  The depth L stops
    // once the discarded spectral tail is below kle_tol^2 relative to the
    // full field (mean included, matching the Monte Carlo error metric).
    const Mat<double> cov_kM = kappa_cov_from_germ_cov(prob.g * prob.g.transpose(), prob.phi);
    const Vec<double> s = mesh.weights.array().sqrt();
    Mat<double> B = s.asDiagonal() * cov_kM * s.asDiagonal();
    B = 0.5 * (B + B.transpose()).eval();
    const SymEig<double> eig = sym_eig(B);
    const Vec<double> mu = eig.values.cwiseMax(0.0);
    const double scale2 =
        (prob.kappa_bar.array().square() * mesh.weights.array()).sum() + mu.sum();
    const double target = kle_tol * kle_tol * scale2;
    const Index N = mesh.numNodes();
    Index L = 1;
    double tail = mu.tail(mu.size() - 1).sum();
    while (L < N && tail > target)
    {
      tail -= mu[L];
      ++L;
    }
    prob.v = eig.vectors.leftCols(L).array().colwise() / s.array();
    prob.mu_v = mu.head(L);
    return prob;
  }

  PceBlockEvaluator::PceBlockEvaluator(const PCEProblem& problem)
      : prob_(problem), modes_(problem.modeSizes())
  {
    if (prob_.M < 1)
      throw std::invalid_argument("PceBlockEvaluator: empty stochastic dimension");
    if (prob_.g.cols() != prob_.M || prob_.g.rows() != prob_.numNodes() ||
        prob_.v.rows() != prob_.numNodes())
      throw std::invalid_argument("PceBlockEvaluator: basis shapes do not match");
    vw_ = prob_.v.array().colwise() * prob_.weights.array();
  }

  double PceBlockEvaluator::orderFactor(long long s, double fprod) const
  {
    if (s == 0 || s > prob_.phi.maxOrder())
      return 0.0;
    return factorial(int(s)) / fprod * prob_.phi.coeff(int(s));
  }

  Vec<double> PceBlockEvaluator::evaluateIndex(const std::vector<Index>& alpha) const
  {
    long long s = 0;
    double fprod = 1.0;
    for (Index a : alpha)
    {
      s += a;
      fprod *= factorial(int(a));
    }
    const double factor = orderFactor(s, fprod);
    if (factor == 0.0)
      return Vec<double>::Zero(prob_.L());

    Vec<double> w = Vec<double>::Ones(prob_.numNodes());
    for (std::size_t m = 0; m < alpha.size(); ++m)
      for (Index e = 0; e < alpha[m]; ++e)
        w.array() *= prob_.g.col(Index(m)).array();
    return factor * (vw_.transpose() * w);
  }

  Mat<double> PceBlockEvaluator::evaluateBlock(const std::vector<std::vector<Index>>& prefixes,
                                               Index m,
                                               const std::vector<std::vector<Index>>& suffixes) const
  {
    const Index nI = Index(prefixes.size());
    const Index nJ = Index(suffixes.size());
    const Index n = modes_[std::size_t(m)];
    const Index L = prob_.L();
    const Index N = prob_.numNodes();

    // node-wise products over the fixed prefix and suffix modes
    auto partial = [&](const std::vector<std::vector<Index>>& set, Index mode0, Mat<double>& P,
                       std::vector<long long>& ord, std::vector<double>& fac)
    {
      const Index count = Index(set.size());
      P = Mat<double>::Ones(N, count);
      ord.assign(std::size_t(count), 0);
      fac.assign(std::size_t(count), 1.0);
      for (Index i = 0; i < count; ++i)
      {
        const auto& idx = set[std::size_t(i)];
        for (std::size_t k = 0; k < idx.size(); ++k)
        {
          const Index a = idx[k];
          ord[std::size_t(i)] += a;
          fac[std::size_t(i)] *= factorial(int(a));
          for (Index e = 0; e < a; ++e)
            P.col(i).array() *= prob_.g.col(mode0 + Index(k)).array();
        }
      }
    };

    Mat<double> P, S;
    std::vector<long long> ordP, ordS;
    std::vector<double> facP, facS;
    partial(prefixes, 0, P, ordP, facP);
    partial(suffixes, m + 1, S, ordS, facS);

    // columns (i + nI*a): weights * prefix product * g_m^a
    Mat<double> PA(N, nI * n);
    Vec<double> ga = prob_.weights;
    for (Index a = 0; a < n; ++a)
    {
      for (Index i = 0; i < nI; ++i)
        PA.col(i + nI * a) = P.col(i).cwiseProduct(ga);
      if (a + 1 < n)
        ga.array() *= prob_.g.col(m).array();
    }

    Mat<double> out(nI * n * L, nJ);
    Mat<double> slab;
    for (Index j = 0; j < nJ; ++j)
    {
      slab.noalias() = PA.transpose() * (prob_.v.array().colwise() * S.col(j).array()).matrix();
      for (Index a = 0; a < n; ++a)
        for (Index i = 0; i < nI; ++i)
        {
          const long long s = ordP[std::size_t(i)] + a + ordS[std::size_t(j)];
          const double factor =
              orderFactor(s, facP[std::size_t(i)] * factorial(int(a)) * facS[std::size_t(j)]);
          slab.row(i + nI * a) *= factor;
        }
      out.col(j) = Eigen::Map<const Vec<double>>(slab.data(), nI * n * L);
    }
    return out;
  }

  KappaExpansion build_kappa_tt(const PCEProblem& problem, double tol_rel, Index rank_max,
                                std::ostream* trace, int n_it_max)
  {
    const PceBlockEvaluator f(problem);
    const std::vector<Index> modes = problem.modeSizes();
    const TTTensor<double> guess = tt_random<double>(modes, 2, 17);

    KappaExpansion out;
    out.coeff =
        block_cross_approximate(f, tol_rel, guess, n_it_max, rank_max, &out.report, trace);
    // the cross overshoots ranks while it searches; one rounding pass at the
    // same tolerance restores the epsilon-rank of the result, which the
    // Galerkin operator and the solver then inherit
    tt_round(out.coeff, tol_rel, rank_max);

    // mean-field channel: unit vector at order zero in every mode
    TTTensor<double> mean_chain;
    mean_chain.cores.reserve(modes.size());
    for (Index nm : modes)
    {
      TTCore<double> c(1, nm, 1);
      c.data.setZero();
      c.data(0, 0) = 1.0;
      mean_chain.cores.push_back(std::move(c));
    }

    const TTTensor<double> stacked = tt_stack<double>({mean_chain, out.coeff});

    TTCore<double> spatial(1, problem.numNodes(), problem.L() + 1);
    spatial.data.col(0) = problem.kappa_bar;
    spatial.data.rightCols(problem.L()) = problem.v;

    out.field.cores.clear();
    out.field.cores.reserve(modes.size() + 1);
    out.field.cores.push_back(std::move(spatial));
    for (const auto& c : stacked.cores)
      out.field.cores.push_back(c);
    out.field.validate();
    return out;
  }

}  // namespace ttsg
