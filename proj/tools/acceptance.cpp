//! @file acceptance.cpp
//! End-to-end acceptance suite.  Every check rebuilds its own inputs and
//! verifies the library against an independent oracle: closed forms against
//! quadrature, tensor-train arithmetic against dense expansions, the Galerkin
//! operator against brute-force assembly, and the full chain against Monte
//! Carlo.  Each criterion prints one [PASS]/[FAIL] line with the measured
//! numbers; the exit status is the number of failures.
//!
//! Usage: acceptance [n ...]   with n in 1..10; no arguments runs everything.

#include "ttsg/block_cross.hpp"
#include "ttsg/distributions.hpp"
#include "ttsg/fem.hpp"
#include "ttsg/galerkin.hpp"
#include "ttsg/hermite.hpp"
#include "ttsg/mc.hpp"
#include "ttsg/postproc.hpp"
#include "ttsg/random_field.hpp"
#include "ttsg/solver.hpp"
#include "ttsg/tt.hpp"
#include "ttsg/tt_matrix.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <string>
#include <vector>

namespace
{
  using namespace ttsg;

  struct Outcome
  {
    bool ok = false;
    std::string detail;
  };

  std::string text(const char* fmt, ...)
  {
    char buf[512];
    va_list args;
    va_start(args, fmt);
    std::vsnprintf(buf, sizeof(buf), fmt, args);
    va_end(args);
    return std::string(buf);
  }

  //! dense expansion of a TT tensor; the flat index runs the first mode fastest
  Vec<double> dense_tensor(const TTTensor<double>& x)
  {
    Mat<double> F = Mat<double>::Ones(1, 1);
    for (const auto& c : x.cores)
    {
      Mat<double> G(F.rows() * c.n, c.rr);
      for (Index i = 0; i < c.n; ++i)
        G.middleRows(i * F.rows(), F.rows()) = F * c.slice(i);
      F.swap(G);
    }
    return F.col(0);
  }

  //! dense expansion of a TT operator with the same mode-major flattening
  Mat<double> dense_matrix(const TTMatrix<double>& A)
  {
    Mat<double> F = Mat<double>::Ones(1, 1);
    Index nr = 1, nc = 1;
    for (const auto& c : A.cores)
    {
      Mat<double> G = Mat<double>::Zero(nr * c.nrow * nc * c.ncol, c.rr);
      for (Index j = 0; j < c.ncol; ++j)
        for (Index i = 0; i < c.nrow; ++i)
        {
          const auto s = c.slice(i, j);
          for (Index J = 0; J < nc; ++J)
            for (Index I = 0; I < nr; ++I)
              G.row((I + nr * i) + nr * c.nrow * (J + nc * j)) += F.row(I + nr * J) * s;
        }
      F.swap(G);
      nr *= c.nrow;
      nc *= c.ncol;
    }
    Mat<double> out(nr, nc);
    for (Index cdx = 0; cdx < nc; ++cdx)
      out.col(cdx) = F.col(0).segment(nr * cdx, nr);
    return out;
  }

  std::vector<Index> unflatten(Index t, const std::vector<Index>& dims)
  {
    std::vector<Index> idx(dims.size());
    for (std::size_t m = 0; m < dims.size(); ++m)
    {
      idx[m] = t % dims[m];
      t /= dims[m];
    }
    return idx;
  }

  //! random TT operator with square mode sizes and uniform entries
  TTMatrix<double> random_operator(const std::vector<Index>& dims, Index rank, unsigned seed)
  {
    std::mt19937_64 eng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    TTMatrix<double> A;
    for (std::size_t m = 0; m < dims.size(); ++m)
    {
      const Index rl = (m == 0) ? 1 : rank;
      const Index rr = (m + 1 == dims.size()) ? 1 : rank;
      TTMatrixCore<double> c(rl, dims[m], dims[m], rr);
      for (Index r = 0; r < c.data.rows(); ++r)
        for (Index s = 0; s < c.data.cols(); ++s)
          c.data(r, s) = U(eng);
      A.cores.push_back(std::move(c));
    }
    A.validate();
    return A;
  }

  //! separable product tensor prod_m (1 + 0.37 (m+1) + 0.11 a_m^2), rank 1
  struct ProductEvaluator : BlockEvaluator
  {
    std::vector<Index> modes;
    const std::vector<Index>& modeSizes() const override { return modes; }
    Index blockCount() const override { return 1; }
    Vec<double> evaluateIndex(const std::vector<Index>& alpha) const override
    {
      double v = 1.0;
      for (std::size_t m = 0; m < alpha.size(); ++m)
        v *= 1.0 + 0.37 * double(m + 1) + 0.11 * double(alpha[m] * alpha[m]);
      Vec<double> out(1);
      out[0] = v;
      return out;
    }
  };

  //! 1/(1 + shift + sum alpha_m), smooth with fast-decaying ranks
  struct ShiftedHilbert : BlockEvaluator
  {
    std::vector<Index> modes;
    Index shift = 0;
    const std::vector<Index>& modeSizes() const override { return modes; }
    Index blockCount() const override { return 1; }
    Vec<double> evaluateIndex(const std::vector<Index>& alpha) const override
    {
      double s = 1.0 + double(shift);
      for (Index a : alpha)
        s += double(a);
      Vec<double> out(1);
      out[0] = 1.0 / s;
      return out;
    }
  };

  //! the same family evaluated as one block of three tensors
  struct HilbertFamily : BlockEvaluator
  {
    std::vector<Index> modes;
    const std::vector<Index>& modeSizes() const override { return modes; }
    Index blockCount() const override { return 3; }
    Vec<double> evaluateIndex(const std::vector<Index>& alpha) const override
    {
      double s = 1.0;
      for (Index a : alpha)
        s += double(a);
      Vec<double> out(3);
      for (Index l = 0; l < 3; ++l)
        out[l] = 1.0 / (s + double(l));
      return out;
    }
  };

  //! relative Frobenius error against full enumeration, all block slices
  double enumeration_error(const BlockEvaluator& f, const TTTensor<double>& x)
  {
    const auto dims = f.modeSizes();
    const Index L = f.blockCount();
    std::vector<Index> idx(dims.size(), 0);
    double num = 0, den = 0;
    for (;;)
    {
      const Vec<double> ref = f.evalIndex(idx);
      const Mat<double> got = tt_entry(x, idx);
      for (Index l = 0; l < L; ++l)
      {
        num += (got(l, 0) - ref[l]) * (got(l, 0) - ref[l]);
        den += ref[l] * ref[l];
      }
      std::size_t m = 0;
      while (m < dims.size() && ++idx[m] == dims[m])
        idx[m++] = 0;
      if (m == dims.size())
        break;
    }
    return std::sqrt(num / den);
  }

  //! the full solution chain shared by the statistics criteria
  struct Pipeline
  {
    Mesh mesh;
    PCEProblem prob;
    KappaExpansion kappa;
    TTTensor<double> u;
    SolveReport srep;
    Vec<double> mean;
    Index imax = 0;
  };

  Pipeline run_pipeline(const std::function<double(double)>& phi, Index M, int p, double eps)
  {
    Pipeline P;
    P.mesh = build_lshape_mesh(1);
    // the auxiliary basis only needs to resolve the coefficient to a fraction of
    // the overall error target; 2*eps keeps its truncation floor well below the
    // verified statistics tolerances at roughly half the basis size
    P.prob = build_pce_problem(P.mesh, CovarianceModel{1.0}, phi, M, 2 * p, 2.0 * eps);
    P.kappa = build_kappa_tt(P.prob, eps, 200);
    const TTMatrix<double> A = assemble_operator_tt(P.mesh, P.prob, P.kappa, p);
    const Vec<double> f0 = assemble_load(P.mesh, Vec<double>::Ones(P.mesh.numNodes()));
    const TTTensor<double> f_tt = assemble_rhs_tt(f0, M, p);
    const Mat<double> K0 = assemble_weighted_stiffness(P.mesh, P.prob.kappa_bar);
    const TTTensor<double> x0 = assemble_rhs_tt(solve_spd<double>(K0, f0), M, p);
    SolveOptions sopt;
    sopt.tol_rel = eps;
    P.u = als_solve(A, f_tt, x0, sopt, &P.srep);
    P.mean = tt_mean_field(P.u);
    P.mean.maxCoeff(&P.imax);
    return P;
  }

  // criterion 1: closed-form Hermite triple products against 20-point
  // Gauss-Hermite quadrature (normalized basis keeps every value O(1)), and
  // orthogonality <h_i, h_j> = i! delta_ij in the natural basis
  Outcome criterion1()
  {
    const QuadratureRule q = gauss_hermite_rule(20);
    const int n = int(q.nodes.size());
    Mat<double> H(n, 11);
    for (int k = 0; k < n; ++k)
      H.row(k) = hermite_all(10, q.nodes[k]).transpose();

    double worst_triple = 0;
    for (int a = 0; a <= 10; ++a)
      for (int b = 0; b <= 10; ++b)
        for (int c = 0; c <= 10; ++c)
        {
          const double scale = std::sqrt(factorial(a) * factorial(b) * factorial(c));
          double s = 0;
          for (int k = 0; k < n; ++k)
            s += q.weights[k] * H(k, a) * H(k, b) * H(k, c);
          worst_triple = std::max(worst_triple, std::abs(s / scale - triple_delta(a, b, c) / scale));
        }

    double worst_orth = 0;
    for (int i = 0; i <= 8; ++i)
      for (int j = 0; j <= 8; ++j)
      {
        double s = 0;
        for (int k = 0; k < n; ++k)
          s += q.weights[k] * H(k, i) * H(k, j);
        const double ref = (i == j) ? factorial(i) : 0.0;
        worst_orth = std::max(worst_orth, std::abs(s - ref));
      }

    Outcome out;
    out.ok = worst_triple <= 1e-10 && worst_orth <= 1e-10;
    out.detail = text("Hermite triple products vs 20-pt quadrature: err %.2e, "
                      "orthogonality err %.2e (tol 1e-10)",
                      worst_triple, worst_orth);
    return out;
  }

  // criterion 2: TT arithmetic against dense four-dimensional arrays
  Outcome criterion2()
  {
    const std::vector<Index> dims{5, 5, 5, 5};
    const TTTensor<double> x = tt_random<double>(dims, 3, 210);
    const TTTensor<double> y = tt_random<double>(dims, 4, 211);
    const Vec<double> X = dense_tensor(x);
    const Vec<double> Y = dense_tensor(y);
    const Index N = X.size();

    double e_entry = 0;
    for (Index t = 0; t < N; ++t)
      e_entry = std::max(e_entry, std::abs(tt_entry1(x, unflatten(t, dims)) - X[t]));
    e_entry /= X.cwiseAbs().maxCoeff();

    const TTTensor<double> z = tt_add(x, y, 2.0, -0.5);
    const Vec<double> Zref = 2.0 * X - 0.5 * Y;
    const double e_add =
        (dense_tensor(z) - Zref).cwiseAbs().maxCoeff() / Zref.cwiseAbs().maxCoeff();

    const double dref = X.dot(Y);
    const double e_dot = std::abs(tt_dot(x, y)(0, 0) - dref) / std::abs(dref);

    const TTMatrix<double> A = random_operator(dims, 3, 212);
    const Vec<double> AXref = dense_matrix(A) * X;
    const double e_apply =
        (dense_tensor(ttm_apply(A, x)) - AXref).cwiseAbs().maxCoeff() /
        AXref.cwiseAbs().maxCoeff();

    // rounding contract on the exact sum, and on a sum with a negligible
    // second term that must collapse back to the ranks of x
    const double znorm = std::sqrt(Zref.squaredNorm());
    TTTensor<double> zr = z;
    tt_round(zr, 1e-8, 100);
    const double e_round = std::sqrt((dense_tensor(zr) - Zref).squaredNorm()) / znorm;

    const TTTensor<double> w = tt_add(x, y, 1.0, 1e-9);
    TTTensor<double> wr = w;
    tt_round(wr, 1e-8, 100);
    const Vec<double> Wref = X + 1e-9 * Y;
    const double e_round2 =
        std::sqrt((dense_tensor(wr) - Wref).squaredNorm()) / std::sqrt(Wref.squaredNorm());
    const bool shrunk = wr.maxRank() == x.maxRank();

    Outcome out;
    out.ok = e_entry <= 1e-11 && e_add <= 1e-11 && e_dot <= 1e-11 && e_apply <= 1e-11 &&
             e_round <= 1e-8 && e_round2 <= 1e-8 && shrunk;
    out.detail = text("TT ops vs dense arrays: entry %.1e add %.1e dot %.1e apply %.1e "
                      "(tol 1e-11), round %.1e/%.1e (tol 1e-8, rank %lld -> %lld)",
                      e_entry, e_add, e_dot, e_apply, e_round, e_round2,
                      (long long)w.maxRank(), (long long)wr.maxRank());
    return out;
  }

  // criterion 3: cross approximation on a separable tensor, a smooth tensor,
  // and a block family against three independent single-tensor runs
  Outcome criterion3()
  {
    ProductEvaluator fa;
    fa.modes = {8, 8, 8, 8};
    CrossReport ra;
    const TTTensor<double> xa =
        block_cross_approximate(fa, 1e-8, tt_random<double>(fa.modes, 2, 11), 10, 200, &ra);
    const double ea = enumeration_error(fa, xa);
    const bool ok_a = ra.converged && ra.iterations <= 2 && ea <= 1e-12;

    ShiftedHilbert fb;
    fb.modes = {10, 10, 10, 10};
    CrossReport rb;
    const TTTensor<double> xb =
        block_cross_approximate(fb, 1e-8, tt_random<double>(fb.modes, 10, 23), 10, 200, &rb);
    const double eb = enumeration_error(fb, xb);
    double eb_samp = 0;
    std::mt19937_64 eng(5);
    for (int s = 0; s < 1000; ++s)
    {
      std::vector<Index> idx(4);
      for (auto& a : idx)
        a = Index(eng() % 10);
      const double ref = fb.evalIndex(idx)[0];
      eb_samp = std::max(eb_samp, std::abs(tt_entry1(xb, idx) - ref) / std::abs(ref));
    }
    const bool ok_b = rb.converged && eb <= 1e-7 && eb_samp <= 1e-7;

    HilbertFamily fc;
    fc.modes = {10, 10, 10, 10};
    CrossReport rc;
    const TTTensor<double> xc =
        block_cross_approximate(fc, 1e-8, tt_random<double>(fc.modes, 2, 31), 10, 200, &rc);
    long long single_evals = 0;
    double ec = 0;
    for (Index l = 0; l < 3; ++l)
    {
      ShiftedHilbert fs;
      fs.modes = fc.modes;
      fs.shift = l;
      CrossReport rs;
      const TTTensor<double> xs = dmrg_cross_baseline(
          fs, 1e-8, tt_random<double>(fc.modes, 2, 31), 10, 200, &rs);
      single_evals += rs.index_evals;
      std::mt19937_64 e2(100 + std::uint64_t(l));
      for (int s = 0; s < 500; ++s)
      {
        std::vector<Index> idx(4);
        for (auto& a : idx)
          a = Index(e2() % 10);
        const double vd = tt_entry1(xs, idx);
        ec = std::max(ec, std::abs(tt_entry(xc, idx)(l, 0) - vd) / std::abs(vd));
      }
    }
    const double ratio = double(rc.index_evals) / double(single_evals);
    const bool ok_c = rc.converged && ec <= 1e-6 && ratio <= 0.40;

    Outcome out;
    out.ok = ok_a && ok_b && ok_c;
    out.detail = text("cross: separable err %.1e in %d sweeps, smooth err %.1e/%.1e, "
                      "block vs singles err %.1e with %.0f%% of their calls",
                      ea, ra.iterations, eb, eb_samp, ec, 100.0 * ratio);
    return out;
  }

  // criterion 4: Galerkin operator entries against brute-force assembly over
  // the complete triple-product sum, plus exact rank preservation
  Outcome criterion4()
  {
    const Mesh mesh = build_lshape_mesh_k(5);
    const Index M = 3;
    const int p = 2;
    const PCEProblem prob =
        build_pce_problem(mesh, CovarianceModel{1.0}, lognormal_phi(0.5), M, 2 * p);
    const KappaExpansion kappa = build_kappa_tt(prob, 1e-6, 60);
    const TTMatrix<double> A = assemble_operator_tt(mesh, prob, kappa, p);
    const std::vector<Mat<double>> spatial = spatial_stiffness_blocks(mesh, prob);

    const Index Ni = mesh.numInterior();
    const Index L = prob.L();
    const Index nb = p + 1;                      // stochastic basis per mode
    const std::vector<Index> bdims(M, nb);
    const Index n_st = Index(std::llround(std::pow(double(nb), double(M))));
    const std::vector<Index> ndims(M, 2 * p + 1);
    const Index n_nu = Index(std::llround(std::pow(double(2 * p + 1), double(M))));

    // chaos coefficients over the full third index set
    Mat<double> coeff_tab(L, n_nu);
    for (Index t = 0; t < n_nu; ++t)
      coeff_tab.col(t) = tt_entry(kappa.coeff, unflatten(t, ndims)).col(0);

    double worst = 0, scale = 0;
    std::vector<Index> ridx(std::size_t(M) + 1), cidx(std::size_t(M) + 1);
    Vec<double> wl(L + 1);
    for (Index ar = 0; ar < n_st; ++ar)
    {
      const std::vector<Index> alpha = unflatten(ar, bdims);
      for (Index bc = 0; bc < n_st; ++bc)
      {
        const std::vector<Index> beta = unflatten(bc, bdims);
        // weights of the spatial blocks for this (alpha, beta) pair
        wl.setZero();
        double mean_w = 1.0;
        for (Index m = 0; m < M; ++m)
          mean_w *= (alpha[m] == beta[m]) ? factorial(int(alpha[m])) : 0.0;
        wl[0] = mean_w;
        for (Index t = 0; t < n_nu; ++t)
        {
          const std::vector<Index> nu = unflatten(t, ndims);
          double d = 1.0;
          for (Index m = 0; m < M && d != 0.0; ++m)
            d *= triple_delta(int(alpha[m]), int(beta[m]), int(nu[m]));
          if (d != 0.0)
            for (Index l = 0; l < L; ++l)
              wl[l + 1] += d * coeff_tab(l, t);
        }

        for (std::size_t m = 0; m < std::size_t(M); ++m)
        {
          ridx[m + 1] = alpha[m];
          cidx[m + 1] = beta[m];
        }
        for (Index i = 0; i < Ni; ++i)
          for (Index j = 0; j < Ni; ++j)
          {
            double dense = 0;
            for (Index l = 0; l <= L; ++l)
              dense += spatial[std::size_t(l)](i, j) * wl[l];
            ridx[0] = i;
            cidx[0] = j;
            const double got = ttm_entry(A, ridx, cidx)(0, 0);
            worst = std::max(worst, std::abs(got - dense));
            scale = std::max(scale, std::abs(dense));
          }
      }
    }

    const bool ranks_equal = A.ranks() == kappa.field.ranks();
    Outcome out;
    out.ok = worst <= 1e-10 * scale && ranks_equal;
    out.detail = text("operator vs brute-force assembly (%lld x %lld dense grid): "
                      "entry err %.2e of scale %.2e (tol 1e-10 rel), ranks %s",
                      (long long)(Ni * n_st), (long long)(Ni * n_st), worst, scale,
                      ranks_equal ? "preserved exactly" : "NOT preserved");
    return out;
  }

  // criterion 5: lognormal surrogate errors against per-sample solves
  Outcome criterion5()
  {
    const auto phi = lognormal_phi(0.5);
    const Pipeline P = run_pipeline(phi, 10, 3, 1e-4);
    McOptions mopt;
    mopt.n_samples = 1000;
    mopt.seed = 5;
    const SurrogateErrors se =
        surrogate_errors(P.mesh, P.prob, phi, Vec<double>::Ones(P.mesh.numNodes()),
                         P.kappa.field, P.u, mopt);
    Outcome out;
    out.ok = P.srep.converged && se.e_kappa <= 1e-3 && se.e_u <= 2e-3;
    out.detail = text("lognormal surrogate: E_kappa %.2e (tol 1e-3), E_u %.2e (tol 2e-3), "
                      "%lld samples",
                      se.e_kappa, se.e_u, se.n_samples);
    return out;
  }

  // criterion 6: coefficient ranks stay flat in the order and grow at most
  // linearly in the truncation dimension
  Outcome criterion6()
  {
    const Mesh mesh = build_lshape_mesh(1);
    const auto phi = lognormal_phi(0.5);
    const auto rank_for = [&](Index M, int p) {
      const PCEProblem prob = build_pce_problem(mesh, CovarianceModel{1.0}, phi, M, 2 * p);
      return build_kappa_tt(prob, 1e-4, 200).field.maxRank();
    };
    const Index rp1 = rank_for(20, 1);
    const Index rp2 = rank_for(20, 2);
    const Index rp3 = rank_for(20, 3);
    const Index r10 = rank_for(10, 3);
    const Index r15 = rank_for(15, 3);
    const Index pmax = std::max(rp1, std::max(rp2, rp3));
    const Index pmin = std::min(rp1, std::min(rp2, rp3));
    const bool flat_p = pmax - pmin <= 4;
    // linear reference through (10, r10) and (15, r15), small additive slack
    const bool linear_m = rp3 <= r10 + 2 * (r15 - r10) + 2;

    Outcome out;
    out.ok = flat_p && linear_m;
    out.detail = text("coefficient ranks: p=1,2,3 at M=20 -> %lld,%lld,%lld (spread <= 4); "
                      "M=10,15,20 at p=3 -> %lld,%lld,%lld (at most linear)",
                      (long long)rp1, (long long)rp2, (long long)rp3, (long long)r10,
                      (long long)r15, (long long)rp3);
    return out;
  }

  // criterion 7: exceedance probabilities against Monte Carlo in the bulk,
  // monotonicity across thresholds, and a rare-event order-of-magnitude check
  Outcome criterion7()
  {
    ExceedanceOptions eopt;
    eopt.n_quad = 32;
    eopt.cross_tol = 1e-5;
    eopt.rank_max = 150;
    eopt.n_it_max = 12;
    eopt.restarts = 5;
    eopt.seed = 99;
    McOptions mopt;
    mopt.n_samples = 100000;
    mopt.seed = 1;

    const auto phi8 = lognormal_phi(0.8);
    const Pipeline P8 = run_pipeline(phi8, 10, 3, 1e-4);
    const Vec<double> ones8 = Vec<double>::Ones(P8.mesh.numNodes());
    const double peak8 = P8.mean[P8.imax];
    double p_tt[3];
    const double taus[3] = {1.10, 1.20, 1.30};
    for (int k = 0; k < 3; ++k)
      p_tt[k] = exceedance_probability(P8.u, P8.imax, taus[k] * peak8, eopt).probability;
    const McReference mc8 = mc_reference(P8.mesh, P8.prob, phi8, ones8,
                                         P8.mesh.interior[std::size_t(P8.imax)],
                                         1.10 * peak8, mopt);
    const double bulk_rel = std::abs(p_tt[0] - mc8.p_star) / mc8.p_star;
    const bool ok_bulk = P8.srep.converged && bulk_rel <= 0.15;
    const bool ok_mono = p_tt[0] >= p_tt[1] && p_tt[1] >= p_tt[2];

    const auto phi5 = lognormal_phi(0.5);
    const Pipeline P5 = run_pipeline(phi5, 10, 3, 1e-4);
    const double peak5 = P5.mean[P5.imax];
    const double p_rare = exceedance_probability(P5.u, P5.imax, 1.13 * peak5, eopt).probability;
    const McReference mc5 = mc_reference(P5.mesh, P5.prob, phi5,
                                         Vec<double>::Ones(P5.mesh.numNodes()),
                                         P5.mesh.interior[std::size_t(P5.imax)],
                                         1.13 * peak5, mopt);
    const double rare_ratio = p_rare / mc5.p_star;
    const bool ok_rare = P5.srep.converged && rare_ratio >= 1.0 / 3.0 && rare_ratio <= 3.0;

    Outcome out;
    out.ok = ok_bulk && ok_mono && ok_rare;
    out.detail = text("exceedance: bulk P %.3e vs MC %.3e (rel %.3f, tol 0.15), chain "
                      "%.1e >= %.1e >= %.1e %s, rare P %.2e vs MC %.2e (ratio %.2f in [1/3,3])",
                      p_tt[0], mc8.p_star, bulk_rel, p_tt[0], p_tt[1], p_tt[2],
                      ok_mono ? "monotone" : "NOT monotone", p_rare, mc5.p_star, rare_ratio);
    return out;
  }

  // criterion 8: beta-distributed field surrogate errors and the CDF round trip
  Outcome criterion8()
  {
    double rt = 0;
    for (int k = 0; k <= 100000; ++k)
    {
      const double y = double(k) / 100000.0;
      rt = std::max(rt, std::abs(beta52_cdf(beta52_inv_cdf(y)) - y));
    }

    const auto phi = beta_phi();
    const Pipeline P = run_pipeline(phi, 10, 3, 1e-4);
    McOptions mopt;
    mopt.n_samples = 1000;
    mopt.seed = 5;
    const SurrogateErrors se =
        surrogate_errors(P.mesh, P.prob, phi, Vec<double>::Ones(P.mesh.numNodes()),
                         P.kappa.field, P.u, mopt);
    Outcome out;
    out.ok = rt <= 1e-12 && P.srep.converged && se.e_kappa <= 1e-3 && se.e_u <= 2e-3;
    out.detail = text("beta surrogate: E_kappa %.2e (tol 1e-3), E_u %.2e (tol 2e-3), "
                      "CDF round trip %.1e (tol 1e-12)",
                      se.e_kappa, se.e_u, rt);
    return out;
  }

  // criterion 9: solver contract: independently recomputed residual below the
  // tolerance, monotone energy, and agreement with a dense oracle at M = 2
  Outcome criterion9()
  {
    const Mesh mesh = build_lshape_mesh_k(4);
    const auto phi = lognormal_phi(0.5);
    const PCEProblem prob = build_pce_problem(mesh, CovarianceModel{1.0}, phi, 4, 4);
    const KappaExpansion kappa = build_kappa_tt(prob, 1e-8, 100);
    const TTMatrix<double> A = assemble_operator_tt(mesh, prob, kappa, 2);
    const Vec<double> f0 = assemble_load(mesh, Vec<double>::Ones(mesh.numNodes()));
    const TTTensor<double> f_tt = assemble_rhs_tt(f0, 4, 2);
    const Mat<double> K0 = assemble_weighted_stiffness(mesh, prob.kappa_bar);
    const TTTensor<double> x0 = assemble_rhs_tt(solve_spd<double>(K0, f0), 4, 2);
    const double fn = tt_norm_orth(f_tt);

    bool ok_res = true, ok_energy = true;
    double res_shown = 0;
    for (const double eps : {1e-4, 1e-6})
    {
      SolveOptions sopt;
      sopt.tol_rel = eps;
      SolveReport rep;
      const TTTensor<double> u = als_solve(A, f_tt, x0, sopt, &rep);
      const double res = ttm_residual_norm(A, u, f_tt) / fn;
      res_shown = res;
      ok_res = ok_res && rep.converged && res <= eps;
      for (std::size_t k = 1; k < rep.energy_history.size(); ++k)
        ok_energy = ok_energy && rep.energy_history[k] <=
                                     rep.energy_history[k - 1] +
                                         1e-12 * (1.0 + std::abs(rep.energy_history[k - 1]));
    }

    const PCEProblem prob2 = build_pce_problem(mesh, CovarianceModel{1.0}, phi, 2, 4);
    const KappaExpansion kappa2 = build_kappa_tt(prob2, 1e-10, 100);
    const TTMatrix<double> A2 = assemble_operator_tt(mesh, prob2, kappa2, 2);
    const TTTensor<double> f2 = assemble_rhs_tt(f0, 2, 2);
    const TTTensor<double> x02 = assemble_rhs_tt(solve_spd<double>(K0, f0), 2, 2);
    const double eps2 = 1e-8;
    SolveOptions sopt2;
    sopt2.tol_rel = eps2;
    SolveReport rep2;
    const TTTensor<double> u2 = als_solve(A2, f2, x02, sopt2, &rep2);
    const Vec<double> ud = solve_spd<double>(dense_matrix(A2), dense_tensor(f2));
    const double derr = (dense_tensor(u2) - ud).norm() / ud.norm();
    const bool ok_dense = rep2.converged && derr <= 10 * eps2;

    Outcome out;
    out.ok = ok_res && ok_energy && ok_dense;
    out.detail = text("solver: recomputed residual %.1e (below tol for both runs: %s), "
                      "energy %s, dense-oracle error %.1e (tol %.0e)",
                      res_shown, ok_res ? "yes" : "NO", ok_energy ? "monotone" : "NOT monotone",
                      derr, 10 * eps2);
    return out;
  }

  // criterion 10: chaos mean and variance fields against plain Monte Carlo
  Outcome criterion10()
  {
    const auto phi = lognormal_phi(0.5);
    const Pipeline P = run_pipeline(phi, 10, 3, 1e-4);
    const Vec<double> var = tt_variance_field(P.u);
    McOptions mopt;
    mopt.n_samples = 10000;
    mopt.seed = 1;
    const McReference ref = mc_reference(P.mesh, P.prob, phi,
                                         Vec<double>::Ones(P.mesh.numNodes()),
                                         P.mesh.interior[std::size_t(P.imax)],
                                         1.1 * P.mean[P.imax], mopt);
    const Index Ni = P.mesh.numInterior();
    Vec<double> m_mc(Ni), v_mc(Ni);
    for (Index i = 0; i < Ni; ++i)
    {
      m_mc[i] = ref.mean[P.mesh.interior[std::size_t(i)]];
      v_mc[i] = ref.variance[P.mesh.interior[std::size_t(i)]];
    }
    const double e_mean = (P.mean - m_mc).norm() / m_mc.norm();
    const double e_var = (var - v_mc).norm() / v_mc.norm();

    Outcome out;
    out.ok = P.srep.converged && e_mean <= 2e-3 && e_var <= 5e-2;
    out.detail = text("moments vs %lld-sample MC: mean err %.2e (tol 2e-3), "
                      "variance err %.2e (tol 5e-2)",
                      ref.n_samples, e_mean, e_var);
    return out;
  }

  Outcome dispatch(int id)
  {
    switch (id)
    {
      case 1: return criterion1();
      case 2: return criterion2();
      case 3: return criterion3();
      case 4: return criterion4();
      case 5: return criterion5();
      case 6: return criterion6();
      case 7: return criterion7();
      case 8: return criterion8();
      case 9: return criterion9();
      case 10: return criterion10();
    }
    return Outcome{false, "unknown criterion"};
  }
}

int main(int argc, char** argv)
{
  std::vector<int> which;
  for (int a = 1; a < argc; ++a)
  {
    const int id = std::atoi(argv[a]);
    if (id < 1 || id > 10)
    {
      std::fprintf(stderr, "usage: %s [criterion ...]  with criteria in 1..10\n", argv[0]);
      return 2;
    }
    which.push_back(id);
  }
  if (which.empty())
    for (int id = 1; id <= 10; ++id)
      which.push_back(id);

  int failures = 0;
  for (const int id : which)
  {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome res;
    try
    {
      res = dispatch(id);
    }
    catch (const std::exception& e)
    {
      res.ok = false;
      res.detail = text("unexpected exception: %s", e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] criterion %2d: %s  [%.1f s]\n", res.ok ? "PASS" : "FAIL", id,
                res.detail.c_str(), secs);
    std::fflush(stdout);
    failures += res.ok ? 0 : 1;
  }
  return failures;
}
