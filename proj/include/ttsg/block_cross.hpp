//! @file block_cross.hpp
//! Cross interpolation of L tensors sharing one TT representation.  The
//! tensors are only accessible through a black-box evaluator; the algorithm
//! samples them on adaptively chosen intersections of index sets, keeps the
//! interface submatrices quasi-maximal-volume (hence well conditioned), and
//! adapts the TT ranks through per-mode SVD splits.  The L tensors end up as
//! the left border index of the first core.  A classic single-tensor
//! DMRG-cross driver is included as a comparison baseline.

#pragma once

#include "ttsg/tt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <vector>

namespace ttsg
{
  //! Black-box supplier of L tensors u_l(alpha_1..alpha_M) on structured
  //! index batches.  Implementations must be pure: identical indices yield
  //! identical values.  The base class tallies index evaluations (each index
  //! yields L values and counts once) and rejects non-finite values.
  class BlockEvaluator
  {
  public:
    virtual ~BlockEvaluator() = default;

    //! mode sizes n_1..n_M
    virtual const std::vector<Index>& modeSizes() const = 0;
    //! number of tensors L sharing the representation
    virtual Index blockCount() const = 0;

    //! all L values at one multi-index
    Vec<double> evalIndex(const std::vector<Index>& alpha) const
    {
      calls_ += 1;
      Vec<double> v = evaluateIndex(alpha);
      if (!v.allFinite())
        throwNonFinite(alpha);
      return v;
    }

    //! Values on the batch {prefixes} x {0..n_m-1} x {suffixes}, where the
    //! prefixes cover modes 0..m-1 and the suffixes modes m+1..M-1.  Returns
    //! a (|prefixes|*n_m*L) x |suffixes| matrix with row i + |prefixes|*(a + n_m*l).
    Mat<double> evalBlock(const std::vector<std::vector<Index>>& prefixes, Index m,
                          const std::vector<std::vector<Index>>& suffixes) const
    {
      const Index nI = Index(prefixes.size());
      const Index nJ = Index(suffixes.size());
      const Index n = modeSizes()[std::size_t(m)];
      calls_ += nI * n * nJ;
      Mat<double> v = evaluateBlock(prefixes, m, suffixes);
      if (v.rows() != nI * n * blockCount() || v.cols() != nJ)
        throw std::runtime_error("BlockEvaluator: batch result has the wrong shape");
      if (!v.allFinite())
      {
        for (Index j = 0; j < v.cols(); ++j)
          for (Index r = 0; r < v.rows(); ++r)
            if (!std::isfinite(v(r, j)))
            {
              std::vector<Index> alpha = prefixes[std::size_t(r % nI)];
              alpha.push_back((r / nI) % n);
              const auto& suf = suffixes[std::size_t(j)];
              alpha.insert(alpha.end(), suf.begin(), suf.end());
              throwNonFinite(alpha);
            }
      }
      return v;
    }

    //! total index evaluations so far (an index counts once, not L times)
    long long indexEvaluations() const { return calls_; }
    void resetIndexEvaluations() const { calls_ = 0; }

  protected:
    virtual Vec<double> evaluateIndex(const std::vector<Index>& alpha) const = 0;

    //! default batch path: loop over all entries through evaluateIndex
    virtual Mat<double> evaluateBlock(const std::vector<std::vector<Index>>& prefixes,
                                      Index m,
                                      const std::vector<std::vector<Index>>& suffixes) const
    {
      const Index nI = Index(prefixes.size());
      const Index nJ = Index(suffixes.size());
      const Index n = modeSizes()[std::size_t(m)];
      const Index L = blockCount();
      Mat<double> out(nI * n * L, nJ);
      std::vector<Index> alpha;
      for (Index j = 0; j < nJ; ++j)
        for (Index a = 0; a < n; ++a)
          for (Index i = 0; i < nI; ++i)
          {
            alpha = prefixes[std::size_t(i)];
            alpha.push_back(a);
            const auto& suf = suffixes[std::size_t(j)];
            alpha.insert(alpha.end(), suf.begin(), suf.end());
            const Vec<double> v = evaluateIndex(alpha);
            for (Index l = 0; l < L; ++l)
              out(i + nI * (a + n * l), j) = v[l];
          }
      return out;
    }

    [[noreturn]] void throwNonFinite(const std::vector<Index>& alpha) const
    {
      std::ostringstream msg;
      msg << "BlockEvaluator: non-finite value at index (";
      for (std::size_t k = 0; k < alpha.size(); ++k)
        msg << (k ? "," : "") << alpha[k];
      msg << ")";
      throw std::runtime_error(msg.str());
    }

  private:
    mutable long long calls_ = 0;
  };

  //! Sweep state of the cross iteration: the current TT snapshot, the nested
  //! index sets, and the interface submatrices selected by maxvol.
  struct CrossState
  {
    TTTensor<double> u;  //!< latest consistent snapshot (the guess before iteration 1 completes)

    //! Ipref[m]: prefixes of modes 0..m-1 used when sampling mode m; Ipref[0]
    //! holds the single empty prefix.  Cardinality = sampling rank left of m.
    std::vector<std::vector<std::vector<Index>>> Ipref;
    //! Jsuf[m]: suffixes of modes m..M-1; Jsuf[M] holds the single empty
    //! suffix.  Cardinality = sampling rank left of mode m.
    std::vector<std::vector<std::vector<Index>>> Jsuf;
    std::vector<Mat<double>> UL;  //!< UL[m]: interface on Ipref[m], square |Ipref[m]|
    std::vector<Mat<double>> UR;  //!< UR[m]: interface on Jsuf[m], square |Jsuf[m]|
    int iteration = 0;            //!< completed alternating iterations
  };

  //! run statistics of a cross driver
  struct CrossReport
  {
    int iterations = 0;        //!< completed alternating iterations
    long long index_evals = 0; //!< driver-side tally of requested index evaluations
    double last_delta = std::numeric_limits<double>::infinity();  //!< final snapshot change
    double max_discard = 0;    //!< largest relative SVD discard of the final iteration
    Index max_rank_seen = 0;   //!< largest split rank across all sweeps
    bool converged = false;
  };

  namespace detail
  {
    //! Row selection for an interface: maxvol on a tall full-column-rank
    //! matrix; if it reports rank deficiency, fall back once to random
    //! distinct rows, and give up if those are singular too.
    inline std::vector<Index> pivot_rows(const Mat<double>& V, std::mt19937_64& rng,
                                         Index mode)
    {
      try
      {
        return maxvol<double>(V);
      }
      catch (const std::runtime_error&)
      {
        std::vector<Index> all(std::size_t(V.rows()));
        for (Index i = 0; i < V.rows(); ++i)
          all[std::size_t(i)] = i;
        std::shuffle(all.begin(), all.end(), rng);
        std::vector<Index> rows(all.begin(), all.begin() + V.cols());
        Mat<double> sub(V.cols(), V.cols());
        for (Index k = 0; k < V.cols(); ++k)
          sub.row(k) = V.row(rows[std::size_t(k)]);
        if (!Eigen::FullPivLU<Mat<double>>(sub).isInvertible())
        {
          std::ostringstream msg;
          msg << "cross interpolation: interface at mode " << mode
              << " is singular even after re-randomizing the index set";
          throw std::runtime_error(msg.str());
        }
        return rows;
      }
    }

    //! rows = selected row numbers of the left fold of a (rl, n, k) tensor;
    //! append the decoded (prefix, alpha_m) pairs as new prefixes
    inline std::vector<std::vector<Index>> extend_prefixes(
        const std::vector<std::vector<Index>>& prefixes, Index rl,
        const std::vector<Index>& rows)
    {
      std::vector<std::vector<Index>> out;
      out.reserve(rows.size());
      for (Index r : rows)
      {
        std::vector<Index> p = prefixes[std::size_t(r % rl)];
        p.push_back(r / rl);
        out.push_back(std::move(p));
      }
      return out;
    }

    //! rows = selected row numbers of the transposed right fold of a
    //! (k, n, rr) tensor; prepend the decoded (alpha_m, suffix) pairs
    inline std::vector<std::vector<Index>> extend_suffixes(
        const std::vector<std::vector<Index>>& suffixes, Index n,
        const std::vector<Index>& rows)
    {
      std::vector<std::vector<Index>> out;
      out.reserve(rows.size());
      for (Index r : rows)
      {
        std::vector<Index> s;
        const auto& tail = suffixes[std::size_t(r / n)];
        s.reserve(tail.size() + 1);
        s.push_back(r % n);
        s.insert(s.end(), tail.begin(), tail.end());
        out.push_back(std::move(s));
      }
      return out;
    }

    //! Common block of the sweep at mode m: evaluate the tensors on
    //! Ipref[m] x {alpha_m} x Jsuf[m+1] and strip both interfaces,
    //!   y(beta, alpha, l, gamma) = UL^-1 u_l(Ipref, alpha, Jsuf) UR^-1.
    //! Returned with row index beta + rl*(alpha + n*l) and column gamma.
    inline Mat<double> sampled_block(const CrossState& st, const BlockEvaluator& f,
                                     Index m)
    {
      const Index n = f.modeSizes()[std::size_t(m)];
      const Index L = f.blockCount();
      const Index rl = Index(st.Ipref[std::size_t(m)].size());
      const Index rr = Index(st.Jsuf[std::size_t(m) + 1].size());

      Mat<double> F = f.evalBlock(st.Ipref[std::size_t(m)], m, st.Jsuf[std::size_t(m) + 1]);

      const Eigen::PartialPivLU<Mat<double>> luL(st.UL[std::size_t(m)]);
      for (Index b = 0; b < n * L; ++b)
      {
        const Mat<double> sol = luL.solve(F.middleRows(b * rl, rl));
        F.middleRows(b * rl, rl) = sol;
      }
      const Eigen::PartialPivLU<Mat<double>> luR(st.UR[std::size_t(m) + 1].transpose());
      Mat<double> Y = luR.solve(F.transpose()).transpose();
      return Y;
    }
  }  // namespace detail

  //! First pass over a fresh guess: left-orthonormalize every core by QR
  //! (absorbing the triangular factor rightward) and build the left index
  //! sets and interfaces by maxvol.  Uses no tensor evaluations.  Index-set
  //! arrays are (re)initialized here, so a fresh state needs no setup.
  inline void warmup_sweep(CrossState& state)
  {
    state.u.validate();
    const Index M = state.u.order();
    std::mt19937_64 rng(0x9e3779b97f4a7c15ull);

    state.Ipref.assign(std::size_t(M) + 1, {});
    state.Ipref[0] = {std::vector<Index>{}};
    state.UL.assign(std::size_t(M) + 1, Mat<double>::Ones(1, 1));
    if (state.Jsuf.size() != std::size_t(M) + 1)
    {
      state.Jsuf.assign(std::size_t(M) + 1, {});
      state.Jsuf[std::size_t(M)] = {std::vector<Index>{}};
      state.UR.assign(std::size_t(M) + 1, Mat<double>::Ones(1, 1));
    }

    for (Index m = 0; m + 1 < M; ++m)
    {
      TTCore<double>& core = state.u.cores[std::size_t(m)];
      TTCore<double>& next = state.u.cores[std::size_t(m) + 1];

      const ThinQR<double> qr = orthonormalize<double>(core.leftFold());
      const Index k = qr.Q.cols();
      core.data = qr.Q;
      core.rr = k;
      next.setFromRightFold(k, next.n, next.rr, qr.R * next.rightFold());

      // pre-restricted interface V = UL[m] applied to the left rank index
      TTCore<double> V;
      V.setFromRightFold(core.rl, core.n, k,
                         state.UL[std::size_t(m)] * core.rightFold());
      const std::vector<Index> rows = detail::pivot_rows(V.leftFold(), rng, m);
      state.Ipref[std::size_t(m) + 1] =
          detail::extend_prefixes(state.Ipref[std::size_t(m)], core.rl, rows);
      Mat<double> sub(k, k);
      for (Index i = 0; i < k; ++i)
        sub.row(i) = V.leftFold().row(rows[std::size_t(i)]);
      state.UL[std::size_t(m) + 1] = sub;
    }
  }

  namespace detail
  {
    struct SweepStats
    {
      double max_discard = 0;
      Index max_rank = 0;
    };

    //! forward pass of one assimilation iteration: rebuild cores 0..M-2 from
    //! sampled data, truncate left-to-right, refresh Ipref/UL
    inline SweepStats forward_sweep(CrossState& st, const BlockEvaluator& f,
                                    double tol_rel, Index rank_max, std::mt19937_64& rng)
    {
      SweepStats stats;
      const Index M = st.u.order();
      const Index L = f.blockCount();
      for (Index m = 0; m + 1 < M; ++m)
      {
        const Index n = f.modeSizes()[std::size_t(m)];
        const Index rl = Index(st.Ipref[std::size_t(m)].size());
        const Index rr = Index(st.Jsuf[std::size_t(m) + 1].size());
        const Mat<double> Y = sampled_block(st, f, m);

        // forward reshape (rl*n) x (L*rr): the l slabs side by side
        Mat<double> Yf(rl * n, L * rr);
        for (Index l = 0; l < L; ++l)
          Yf.middleCols(l * rr, rr) = Y.middleRows(l * rl * n, rl * n);

        const TruncatedSvd<double> svd = truncated_svd<double>(Yf, tol_rel, rank_max);
        stats.max_discard = std::max(stats.max_discard, double(svd.discarded_rel));
        stats.max_rank = std::max(stats.max_rank, svd.rank);

        TTCore<double>& core = st.u.cores[std::size_t(m)];
        core.rl = rl;
        core.n = n;
        core.rr = svd.rank;
        core.data = svd.U;

        TTCore<double> V;
        V.setFromRightFold(rl, n, svd.rank,
                           st.UL[std::size_t(m)] * core.rightFold());
        const std::vector<Index> rows = pivot_rows(V.leftFold(), rng, m);
        st.Ipref[std::size_t(m) + 1] = extend_prefixes(st.Ipref[std::size_t(m)], rl, rows);
        Mat<double> sub(svd.rank, svd.rank);
        for (Index i = 0; i < svd.rank; ++i)
          sub.row(i) = V.leftFold().row(rows[std::size_t(i)]);
        st.UL[std::size_t(m) + 1] = sub;
      }
      return stats;
    }

    //! backward pass: rebuild cores M-1..1 from sampled data, truncate
    //! right-to-left, refresh Jsuf/UR
    inline SweepStats backward_sweep(CrossState& st, const BlockEvaluator& f,
                                     double tol_rel, Index rank_max, std::mt19937_64& rng)
    {
      SweepStats stats;
      const Index M = st.u.order();
      const Index L = f.blockCount();
      for (Index m = M - 1; m >= 1; --m)
      {
        const Index n = f.modeSizes()[std::size_t(m)];
        const Index rl = Index(st.Ipref[std::size_t(m)].size());
        const Index rr = Index(st.Jsuf[std::size_t(m) + 1].size());
        const Mat<double> Y = sampled_block(st, f, m);

        // backward reshape (L*rl) x (n*rr)
        Mat<double> Yb(L * rl, n * rr);
        for (Index l = 0; l < L; ++l)
          for (Index g = 0; g < rr; ++g)
            for (Index a = 0; a < n; ++a)
              Yb.col(a + n * g).segment(l * rl, rl) = Y.col(g).segment(rl * a + rl * n * l, rl);

        const TruncatedSvd<double> svd = truncated_svd<double>(Yb, tol_rel, rank_max);
        stats.max_discard = std::max(stats.max_discard, double(svd.discarded_rel));
        stats.max_rank = std::max(stats.max_rank, svd.rank);

        TTCore<double>& core = st.u.cores[std::size_t(m)];
        core.setFromRightFold(svd.rank, n, rr, svd.V.transpose());

        // pre-restricted interface V = core with UR[m+1] applied on the right
        TTCore<double> V = core;
        V.data = core.leftFold() * st.UR[std::size_t(m) + 1];
        const std::vector<Index> rows =
            pivot_rows(Mat<double>(V.rightFold().transpose()), rng, m);
        st.Jsuf[std::size_t(m)] = extend_suffixes(st.Jsuf[std::size_t(m) + 1], n, rows);
        Mat<double> sub(svd.rank, svd.rank);
        for (Index j = 0; j < svd.rank; ++j)
          sub.col(j) = V.rightFold().col(rows[std::size_t(j)]);
        st.UR[std::size_t(m)] = sub;
      }
      return stats;
    }

    //! final step of an iteration: evaluate the first core on {alpha_1} x
    //! Jsuf[1] and strip the right interface; the L tensors become the left
    //! border index
    inline void first_block(CrossState& st, const BlockEvaluator& f)
    {
      const Index n = f.modeSizes()[0];
      const Index L = f.blockCount();
      const Index r1 = Index(st.Jsuf[1].size());

      Mat<double> F = f.evalBlock(st.Ipref[0], 0, st.Jsuf[1]);  // (n*L) x r1
      const Eigen::PartialPivLU<Mat<double>> luR(st.UR[1].transpose());
      const Mat<double> Y = luR.solve(F.transpose()).transpose();

      TTCore<double>& core = st.u.cores[0];
      core.rl = L;
      core.n = n;
      core.rr = r1;
      core.data.resize(L * n, r1);
      for (Index a = 0; a < n; ++a)
        for (Index l = 0; l < L; ++l)
          core.data.row(l + L * a) = Y.row(a + n * l);
    }
  }  // namespace detail

  //! Build one TT representation of the L tensors exposed by f, with relative
  //! accuracy tol_rel and ranks capped at rank_max.  The returned TT has left
  //! border rank L (one slice per tensor) and right border rank 1.  The guess
  //! supplies mode sizes and the warmup subspaces; a seeded rank-2 random TT
  //! is the intended default.  Convergence is declared when the snapshot
  //! changes by less than tol_rel in relative Frobenius norm.
  inline TTTensor<double> block_cross_approximate(const BlockEvaluator& f, double tol_rel,
                                                  const TTTensor<double>& guess,
                                                  int n_it_max = 10, Index rank_max = 200,
                                                  CrossReport* report = nullptr,
                                                  std::ostream* trace = nullptr)
  {
    if (!(tol_rel > 0))
      throw std::invalid_argument("block_cross_approximate: tol_rel must be positive");
    if (n_it_max < 1 || rank_max < 1)
      throw std::invalid_argument("block_cross_approximate: n_it_max and rank_max must be >= 1");
    guess.validate();
    if (guess.dims() != f.modeSizes())
      throw std::invalid_argument("block_cross_approximate: guess mode sizes do not match the evaluator");

    const Index M = guess.order();
    CrossState st;
    st.u = guess;
    st.Ipref.assign(std::size_t(M) + 1, {});
    st.Jsuf.assign(std::size_t(M) + 1, {});
    st.Ipref[0] = {std::vector<Index>{}};
    st.Jsuf[std::size_t(M)] = {std::vector<Index>{}};
    st.UL.assign(std::size_t(M) + 1, Mat<double>::Ones(1, 1));
    st.UR.assign(std::size_t(M) + 1, Mat<double>::Ones(1, 1));

    std::mt19937_64 rng(0x2545f4914f6cdd1dull);
    CrossReport rep;
    const long long calls0 = f.indexEvaluations();
    TTTensor<double> prev;

    for (int it = 1; it <= n_it_max; ++it)
    {
      detail::SweepStats fwd;
      if (it == 1)
        warmup_sweep(st);
      else
        fwd = detail::forward_sweep(st, f, tol_rel, rank_max, rng);

      // the first backward pass only orthogonalizes: with both index sets still
      // warmup-derived, an eps-truncation here can underestimate ranks, and a
      // single-output run has no mechanism to grow them back later
      const detail::SweepStats bwd =
          detail::backward_sweep(st, f, it == 1 ? 0.0 : tol_rel, rank_max, rng);
      detail::first_block(st, f);
      st.u.validate();
      st.iteration = it;

      rep.iterations = it;
      rep.max_rank_seen = std::max({rep.max_rank_seen, fwd.max_rank, bwd.max_rank, st.u.maxRank()});
      rep.max_discard = std::max(fwd.max_discard, bwd.max_discard);
      rep.index_evals = f.indexEvaluations() - calls0;

      if (it >= 2)
      {
        const TTTensor<double> diff = tt_add<double>(st.u, prev, 1.0, -1.0);
        const double den = std::max(tt_norm(st.u), std::numeric_limits<double>::min());
        rep.last_delta = tt_norm_orth(diff) / den;
      }
      if (trace)
        *trace << "cross it " << it << " rank " << st.u.maxRank() << " index_evals "
               << rep.index_evals << " max_discard " << std::max(fwd.max_discard, bwd.max_discard)
               << " delta " << (it >= 2 ? rep.last_delta : std::nan("")) << "\n";
      if (it >= 2 && rep.last_delta < tol_rel)
      {
        rep.converged = true;
        break;
      }
      prev = st.u;
    }

    if (report)
      *report = rep;
    return st.u;
  }

  //! Classic DMRG-cross for a single tensor (L = 1): two neighboring cores
  //! are rebuilt at once from sampled superblocks and split by truncated SVD.
  //! Kept as the per-tensor baseline the block variant is measured against.
  inline TTTensor<double> dmrg_cross_baseline(const BlockEvaluator& f, double tol_rel,
                                              const TTTensor<double>& guess,
                                              int n_it_max = 10, Index rank_max = 200,
                                              CrossReport* report = nullptr)
  {
    if (!(tol_rel > 0))
      throw std::invalid_argument("dmrg_cross_baseline: tol_rel must be positive");
    if (f.blockCount() != 1)
      throw std::invalid_argument("dmrg_cross_baseline: evaluator must expose a single tensor");
    guess.validate();
    if (guess.dims() != f.modeSizes())
      throw std::invalid_argument("dmrg_cross_baseline: guess mode sizes do not match the evaluator");
    if (guess.order() < 2)
      throw std::invalid_argument("dmrg_cross_baseline: need at least two modes");

    const Index M = guess.order();
    CrossState st;
    st.u = guess;
    st.Ipref.assign(std::size_t(M) + 1, {});
    st.Jsuf.assign(std::size_t(M) + 1, {});
    st.Ipref[0] = {std::vector<Index>{}};
    st.Jsuf[std::size_t(M)] = {std::vector<Index>{}};
    st.UL.assign(std::size_t(M) + 1, Mat<double>::Ones(1, 1));
    st.UR.assign(std::size_t(M) + 1, Mat<double>::Ones(1, 1));

    std::mt19937_64 rng(0x6c078965b9a9e3d5ull);
    CrossReport rep;
    const long long calls0 = f.indexEvaluations();
    TTTensor<double> prev;

    // superblock at modes (m, m+1), stripped of both interfaces; returned as
    // the (rl*n_m) x (n_{m+1}*rr) unfolding
    const auto superblock = [&st, &f](Index m) -> Mat<double>
    {
      const Index n0 = f.modeSizes()[std::size_t(m)];
      const Index n1 = f.modeSizes()[std::size_t(m) + 1];
      const Index rl = Index(st.Ipref[std::size_t(m)].size());
      const Index rr = Index(st.Jsuf[std::size_t(m) + 2].size());

      // composite suffixes (b, tail): order j + rr*b so the b index is outermost
      std::vector<std::vector<Index>> suffixes;
      suffixes.reserve(std::size_t(n1 * rr));
      for (Index b = 0; b < n1; ++b)
        for (Index j = 0; j < rr; ++j)
        {
          std::vector<Index> s;
          const auto& tail = st.Jsuf[std::size_t(m) + 2][std::size_t(j)];
          s.reserve(tail.size() + 1);
          s.push_back(b);
          s.insert(s.end(), tail.begin(), tail.end());
          suffixes.push_back(std::move(s));
        }

      Mat<double> F = f.evalBlock(st.Ipref[std::size_t(m)], m, suffixes);  // (rl*n0) x (rr*n1)
      const Eigen::PartialPivLU<Mat<double>> luL(st.UL[std::size_t(m)]);
      for (Index a = 0; a < n0; ++a)
      {
        const Mat<double> sol = luL.solve(F.middleRows(a * rl, rl));
        F.middleRows(a * rl, rl) = sol;
      }
      const Eigen::PartialPivLU<Mat<double>> luR(st.UR[std::size_t(m) + 2].transpose());

      Mat<double> S(rl * n0, n1 * rr);
      for (Index b = 0; b < n1; ++b)
        S.middleCols(b * rr, rr).noalias() =
            luR.solve(F.middleCols(b * rr, rr).transpose()).transpose();
      // S currently has column index j + rr*b; refold to b + n1*g
      Mat<double> out(rl * n0, n1 * rr);
      for (Index g = 0; g < rr; ++g)
        for (Index b = 0; b < n1; ++b)
          out.col(b + n1 * g) = S.col(g + rr * b);
      return out;
    };

    for (int it = 1; it <= n_it_max; ++it)
    {
      detail::SweepStats stats;
      if (it == 1)
        warmup_sweep(st);
      else
      {
        // forward: keep the left factors, refresh Ipref/UL
        for (Index m = 0; m + 1 < M; ++m)
        {
          const Index n0 = f.modeSizes()[std::size_t(m)];
          const Index n1 = f.modeSizes()[std::size_t(m) + 1];
          const Index rl = Index(st.Ipref[std::size_t(m)].size());
          const Index rr = Index(st.Jsuf[std::size_t(m) + 2].size());
          const TruncatedSvd<double> svd = truncated_svd<double>(superblock(m), tol_rel, rank_max);
          stats.max_discard = std::max(stats.max_discard, double(svd.discarded_rel));
          stats.max_rank = std::max(stats.max_rank, svd.rank);

          TTCore<double>& core = st.u.cores[std::size_t(m)];
          core.rl = rl;
          core.n = n0;
          core.rr = svd.rank;
          core.data = svd.U;
          TTCore<double>& next = st.u.cores[std::size_t(m) + 1];
          next.setFromRightFold(svd.rank, n1, rr,
                                (svd.S.asDiagonal() * svd.V.transpose()).eval());

          TTCore<double> V;
          V.setFromRightFold(rl, n0, svd.rank, st.UL[std::size_t(m)] * core.rightFold());
          const std::vector<Index> rows = detail::pivot_rows(V.leftFold(), rng, m);
          st.Ipref[std::size_t(m) + 1] = detail::extend_prefixes(st.Ipref[std::size_t(m)], rl, rows);
          Mat<double> sub(svd.rank, svd.rank);
          for (Index i = 0; i < svd.rank; ++i)
            sub.row(i) = V.leftFold().row(rows[std::size_t(i)]);
          st.UL[std::size_t(m) + 1] = sub;
        }
      }

      // backward: keep the right factors, refresh Jsuf/UR
      for (Index m = M - 2; m >= 0; --m)
      {
        const Index n0 = f.modeSizes()[std::size_t(m)];
        const Index n1 = f.modeSizes()[std::size_t(m) + 1];
        const Index rl = Index(st.Ipref[std::size_t(m)].size());
        const Index rr = Index(st.Jsuf[std::size_t(m) + 2].size());
        const TruncatedSvd<double> svd = truncated_svd<double>(superblock(m), tol_rel, rank_max);
        stats.max_discard = std::max(stats.max_discard, double(svd.discarded_rel));
        stats.max_rank = std::max(stats.max_rank, svd.rank);

        TTCore<double>& next = st.u.cores[std::size_t(m) + 1];
        next.setFromRightFold(svd.rank, n1, rr, svd.V.transpose());
        TTCore<double>& core = st.u.cores[std::size_t(m)];
        core.rl = rl;
        core.n = n0;
        core.rr = svd.rank;
        core.data = svd.U * svd.S.asDiagonal();

        TTCore<double> V = next;
        V.data = next.leftFold() * st.UR[std::size_t(m) + 2];
        const std::vector<Index> rows =
            detail::pivot_rows(Mat<double>(V.rightFold().transpose()), rng, m + 1);
        st.Jsuf[std::size_t(m) + 1] = detail::extend_suffixes(st.Jsuf[std::size_t(m) + 2], n1, rows);
        Mat<double> sub(svd.rank, svd.rank);
        for (Index j = 0; j < svd.rank; ++j)
          sub.col(j) = V.rightFold().col(rows[std::size_t(j)]);
        st.UR[std::size_t(m) + 1] = sub;
      }
      st.u.validate();
      st.iteration = it;

      rep.iterations = it;
      rep.max_rank_seen = std::max({rep.max_rank_seen, stats.max_rank, st.u.maxRank()});
      rep.max_discard = stats.max_discard;
      rep.index_evals = f.indexEvaluations() - calls0;

      if (it >= 2)
      {
        const TTTensor<double> diff = tt_add<double>(st.u, prev, 1.0, -1.0);
        const double den = std::max(tt_norm(st.u), std::numeric_limits<double>::min());
        rep.last_delta = tt_norm_orth(diff) / den;
        if (rep.last_delta < tol_rel)
        {
          rep.converged = true;
          break;
        }
      }
      prev = st.u;
    }

    if (report)
      *report = rep;
    return st.u;
  }

}  // namespace ttsg
