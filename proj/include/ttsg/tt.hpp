//! @file tt.hpp
//! Tensor-train representation with explicit border ranks.
//!
//! A tensor x(s0, i1, ..., iM, sM) is stored as a chain of 3-way cores
//! C_m(a, i, b) with a < r_{m-1}, i < n_m, b < r_m.  The border ranks r_0 and
//! r_M are ordinary tensor indices (default 1); they carry e.g. a block of
//! right-hand sides or the spatial slot of a coefficient field.
//!
//! Each core is stored contiguously with the left rank fastest, then the mode
//! index, then the right rank.  Under this layout both standard foldings are
//! reshapes of the same buffer:
//!   left fold   (r_{m-1} * n_m) x r_m   -- the storage matrix itself
//!   right fold  r_{m-1} x (n_m * r_m)  -- an Eigen::Map, no copy
//! and the mode slice C_m(:, i, :) is a contiguous row block of the left fold.

#pragma once

#include "ttsg/dense.hpp"

#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace ttsg
{
  template<typename T>
  struct TTCore
  {
    Index rl = 1, n = 0, rr = 1;
    Mat<T> data;  //!< left fold, (rl*n) x rr

    TTCore() = default;
    TTCore(Index rl_, Index n_, Index rr_)
        : rl(rl_), n(n_), rr(rr_), data(Mat<T>::Zero(rl_ * n_, rr_)) {}

    Mat<T>& leftFold() { return data; }
    const Mat<T>& leftFold() const { return data; }

    Eigen::Map<const Mat<T>> rightFold() const
    {
      return Eigen::Map<const Mat<T>>(data.data(), rl, n * rr);
    }

    //! mode slice C(:, i, :) as an rl x rr block
    auto slice(Index i) { return data.middleRows(i * rl, rl); }
    auto slice(Index i) const { return data.middleRows(i * rl, rl); }

    //! replace the content by a right fold matrix of shape rl x (n*rr)
    void setFromRightFold(Index rl_, Index n_, Index rr_, const Mat<T>& rf)
    {
      rl = rl_; n = n_; rr = rr_;
      data = Eigen::Map<const Mat<T>>(rf.data(), rl_ * n_, rr_);
    }
  };

  template<typename T>
  class TTTensor
  {
  public:
    std::vector<TTCore<T>> cores;

    TTTensor() = default;

    //! zero tensor with given mode sizes, uniform interior rank and border ranks
    TTTensor(const std::vector<Index>& dims, Index rank = 1, Index r0 = 1, Index rM = 1)
    {
      const Index M = static_cast<Index>(dims.size());
      if (M == 0)
        throw std::invalid_argument("TTTensor: at least one mode required");
      cores.reserve(M);
      for (Index m = 0; m < M; ++m)
      {
        const Index rl = (m == 0) ? r0 : std::min(rank, maxInteriorRank(dims, m, r0, rM));
        const Index rr = (m == M - 1) ? rM : std::min(rank, maxInteriorRank(dims, m + 1, r0, rM));
        cores.emplace_back(rl, dims[m], rr);
      }
    }

    Index order() const { return static_cast<Index>(cores.size()); }

    std::vector<Index> dims() const
    {
      std::vector<Index> d(cores.size());
      for (std::size_t m = 0; m < cores.size(); ++m)
        d[m] = cores[m].n;
      return d;
    }

    //! ranks r_0 .. r_M including the borders
    std::vector<Index> ranks() const
    {
      std::vector<Index> r(cores.size() + 1);
      for (std::size_t m = 0; m < cores.size(); ++m)
        r[m] = cores[m].rl;
      r[cores.size()] = cores.back().rr;
      return r;
    }

    Index maxRank() const
    {
      Index r = 1;
      for (std::size_t m = 0; m + 1 < cores.size(); ++m)
        r = std::max(r, cores[m].rr);
      return r;
    }

    //! throws std::invalid_argument if adjacent core ranks disagree
    void validate() const
    {
      for (std::size_t m = 0; m + 1 < cores.size(); ++m)
        if (cores[m].rr != cores[m + 1].rl)
          throw std::invalid_argument("TTTensor: rank mismatch between cores " +
                                      std::to_string(m) + " and " + std::to_string(m + 1));
      for (const auto& c : cores)
        if (c.data.rows() != c.rl * c.n || c.data.cols() != c.rr)
          throw std::invalid_argument("TTTensor: core storage shape mismatch");
    }

  private:
    static Index maxInteriorRank(const std::vector<Index>& dims, Index bond, Index r0, Index rM)
    {
      // rank at bond m is bounded by the number of rows/columns of the unfolding
      Index left = r0, right = rM;
      for (Index k = 0; k < bond; ++k)
        left = std::min<Index>(left * dims[k], Index(1) << 30);
      for (Index k = bond; k < static_cast<Index>(dims.size()); ++k)
        right = std::min<Index>(right * dims[k], Index(1) << 30);
      return std::min(left, right);
    }
  };

  //! x(s0, idx, sM) for all border values: returns an r_0 x r_M matrix
  template<typename T>
  Mat<T> tt_entry(const TTTensor<T>& x, const std::vector<Index>& idx)
  {
    if (idx.size() != x.cores.size())
      throw std::invalid_argument("tt_entry: index length mismatch");
    Mat<T> acc = x.cores[0].slice(idx[0]);
    for (std::size_t m = 1; m < x.cores.size(); ++m)
      acc = acc * x.cores[m].slice(idx[m]);
    return acc;
  }

  //! scalar entry for tensors with unit borders
  template<typename T>
  T tt_entry1(const TTTensor<T>& x, const std::vector<Index>& idx)
  {
    return tt_entry(x, idx)(0, 0);
  }

  //! Gram contraction sum_idx x_{s0}(idx) y_{s0'}(idx): r_0(x) x r_0(y) matrix.
  //! The right borders are summed against each other and must match.
  template<typename T>
  Mat<T> tt_dot(const TTTensor<T>& x, const TTTensor<T>& y)
  {
    if (x.dims() != y.dims())
      throw std::invalid_argument("tt_dot: mode size mismatch");
    if (x.cores.back().rr != y.cores.back().rr)
      throw std::invalid_argument("tt_dot: right border mismatch");
    Mat<T> W = Mat<T>::Identity(x.cores.back().rr, y.cores.back().rr);
    for (Index m = static_cast<Index>(x.cores.size()) - 1; m >= 0; --m)
    {
      const auto& cx = x.cores[m];
      const auto& cy = y.cores[m];
      Mat<T> Wnew = Mat<T>::Zero(cx.rl, cy.rl);
      for (Index i = 0; i < cx.n; ++i)
        Wnew.noalias() += cx.slice(i) * W * cy.slice(i).transpose();
      W.swap(Wnew);
    }
    return W;
  }

  //! Frobenius norm over all indices including borders
  template<typename T>
  T tt_norm(const TTTensor<T>& x)
  {
    const T g = tt_dot(x, x).trace();
    return std::sqrt(std::max(g, T(0)));
  }

  //! cancellation-safe Frobenius norm: right-orthogonalize, then take the
  //! norm of the first core.  The Gram form in tt_norm loses up to half the
  //! digits when the tensor is a difference of nearly equal terms; this
  //! variant stays accurate relative to the core magnitudes.
  template<typename T>
  T tt_norm_orth(TTTensor<T> x)
  {
    for (Index m = x.order() - 1; m >= 1; --m)
    {
      auto& c = x.cores[m];
      Mat<T> rf = c.rightFold();
      auto qr = orthonormalize<T>(rf.transpose());
      const Index k = qr.Q.cols();
      Mat<T> qt = qr.Q.transpose();
      c.setFromRightFold(k, c.n, c.rr, qt);
      auto& p = x.cores[m - 1];
      p.data = p.data * qr.R.transpose();
      p.rr = k;
    }
    return x.cores.front().data.norm();
  }

  //! multiply the tensor by a scalar (applied to the first core)
  template<typename T>
  void tt_scale(TTTensor<T>& x, T a)
  {
    x.cores.front().data *= a;
  }

  //! z = a*x + b*y without rounding; border ranks must match, interior ranks add
  template<typename T>
  TTTensor<T> tt_add(const TTTensor<T>& x, const TTTensor<T>& y, T a = T(1), T b = T(1))
  {
    if (x.dims() != y.dims())
      throw std::invalid_argument("tt_add: mode size mismatch");
    if (x.cores.front().rl != y.cores.front().rl || x.cores.back().rr != y.cores.back().rr)
      throw std::invalid_argument("tt_add: border rank mismatch");

    const Index M = x.order();
    TTTensor<T> z;
    z.cores.reserve(M);
    if (M == 1)
    {
      const auto& cx = x.cores[0];
      const auto& cy = y.cores[0];
      TTCore<T> c(cx.rl, cx.n, cx.rr);
      c.data = a * cx.data + b * cy.data;
      z.cores.push_back(std::move(c));
      return z;
    }
    for (Index m = 0; m < M; ++m)
    {
      const auto& cx = x.cores[m];
      const auto& cy = y.cores[m];
      if (m == 0)
      {
        TTCore<T> c(cx.rl, cx.n, cx.rr + cy.rr);
        for (Index i = 0; i < c.n; ++i)
        {
          c.slice(i).leftCols(cx.rr) = a * cx.slice(i);
          c.slice(i).rightCols(cy.rr) = b * cy.slice(i);
        }
        z.cores.push_back(std::move(c));
      }
      else if (m == M - 1)
      {
        TTCore<T> c(cx.rl + cy.rl, cx.n, cx.rr);
        for (Index i = 0; i < c.n; ++i)
        {
          c.slice(i).topRows(cx.rl) = cx.slice(i);
          c.slice(i).bottomRows(cy.rl) = cy.slice(i);
        }
        z.cores.push_back(std::move(c));
      }
      else
      {
        TTCore<T> c(cx.rl + cy.rl, cx.n, cx.rr + cy.rr);
        for (Index i = 0; i < c.n; ++i)
        {
          c.slice(i).topLeftCorner(cx.rl, cx.rr) = cx.slice(i);
          c.slice(i).bottomRightCorner(cy.rl, cy.rr) = cy.slice(i);
        }
        z.cores.push_back(std::move(c));
      }
    }
    return z;
  }

  //! Stack tensors along the left border: z_{s0 in block k} = x_k.  Mode sizes
  //! and the right border must agree; the result has r_0 = sum r_0(x_k).
  template<typename T>
  TTTensor<T> tt_stack(const std::vector<TTTensor<T>>& xs)
  {
    if (xs.empty())
      throw std::invalid_argument("tt_stack: empty input");
    const Index M = xs[0].order();
    for (const auto& x : xs)
      if (x.dims() != xs[0].dims() || x.cores.back().rr != xs[0].cores.back().rr)
        throw std::invalid_argument("tt_stack: shape mismatch");

    TTTensor<T> z;
    z.cores.reserve(M);
    for (Index m = 0; m < M; ++m)
    {
      Index rl = 0, rr = 0;
      for (const auto& x : xs)
      {
        rl += x.cores[m].rl;
        rr += x.cores[m].rr;
      }
      const Index n = xs[0].cores[m].n;
      const bool last = (m == M - 1);
      TTCore<T> c(rl, n, last ? xs[0].cores[m].rr : rr);
      for (Index i = 0; i < n; ++i)
      {
        Index ro = 0, co = 0;
        for (const auto& x : xs)
        {
          const auto& cx = x.cores[m];
          if (last)
            c.slice(i).middleRows(ro, cx.rl) = cx.slice(i);
          else
            c.slice(i).block(ro, co, cx.rl, cx.rr) = cx.slice(i);
          ro += cx.rl;
          co += cx.rr;
        }
      }
      z.cores.push_back(std::move(c));
    }
    return z;
  }

  //! Rank truncation: right-orthogonalize, then one forward sweep of SVD splits,
  //! each at relative threshold tol_rel / sqrt(M-1) so the splits combine to the
  //! requested overall tolerance.  Border ranks are untouched.
  template<typename T>
  void tt_round(TTTensor<T>& x, double tol_rel,
                Index rank_max = std::numeric_limits<Index>::max())
  {
    const Index M = x.order();
    if (M == 1)
      return;

    // backward sweep: make cores 2..M right-orthogonal via QR of the transposed right fold
    for (Index m = M - 1; m >= 1; --m)
    {
      auto& c = x.cores[m];
      Mat<T> rf = c.rightFold();
      auto qr = orthonormalize<T>(rf.transpose());  // rf^T = Q R, rf = R^T Q^T
      const Index k = qr.Q.cols();
      Mat<T> qt = qr.Q.transpose();
      c.setFromRightFold(k, c.n, c.rr, qt);
      // absorb R^T into the previous core's right rank
      auto& p = x.cores[m - 1];
      p.data = p.data * qr.R.transpose();
      p.rr = k;
    }

    const double tol_split = tol_rel / std::sqrt(double(M - 1));
    // forward sweep: SVD-truncate each bond, carrying S V^T to the right
    for (Index m = 0; m + 1 < M; ++m)
    {
      auto& c = x.cores[m];
      auto svd = truncated_svd<T>(c.data, tol_split, rank_max);
      c.data = svd.U;
      c.rr = svd.rank;
      Mat<T> carry = svd.S.asDiagonal() * svd.V.transpose();  // rank x old_rr
      auto& nx = x.cores[m + 1];
      Mat<T> rf = carry * nx.rightFold();
      nx.setFromRightFold(svd.rank, nx.n, nx.rr, rf);
    }
  }

  //! contract every mode with a vector: result(s0, sM) = sum_idx prod_m w_m(i_m) x(idx)
  template<typename T>
  Mat<T> tt_contract_modes(const TTTensor<T>& x, const std::vector<Vec<T>>& w)
  {
    if (w.size() != x.cores.size())
      throw std::invalid_argument("tt_contract_modes: need one vector per mode");
    Mat<T> acc;
    for (std::size_t m = 0; m < x.cores.size(); ++m)
    {
      const auto& c = x.cores[m];
      if (w[m].size() != c.n)
        throw std::invalid_argument("tt_contract_modes: vector length mismatch");
      Mat<T> cm = Mat<T>::Zero(c.rl, c.rr);
      for (Index i = 0; i < c.n; ++i)
        cm.noalias() += w[m][i] * c.slice(i);
      acc = (m == 0) ? cm : Mat<T>(acc * cm);
    }
    return acc;
  }

  //! restrict each mode to its first q_m indices (used to go from order 2p to p)
  template<typename T>
  TTTensor<T> tt_mode_head(const TTTensor<T>& x, const std::vector<Index>& q)
  {
    if (q.size() != x.cores.size())
      throw std::invalid_argument("tt_mode_head: need one size per mode");
    TTTensor<T> z = x;
    for (std::size_t m = 0; m < z.cores.size(); ++m)
    {
      auto& c = z.cores[m];
      if (q[m] < 1 || q[m] > c.n)
        throw std::invalid_argument("tt_mode_head: size out of range");
      c.data = Mat<T>(c.data.topRows(c.rl * q[m]));
      c.n = q[m];
    }
    return z;
  }

  //! uniform [-1,1] random tensor; the bit pattern depends only on the seed
  template<typename T>
  TTTensor<T> tt_random(const std::vector<Index>& dims, Index rank, std::uint64_t seed,
                        Index r0 = 1, Index rM = 1)
  {
    TTTensor<T> x(dims, rank, r0, rM);
    std::mt19937_64 eng(seed);
    for (auto& c : x.cores)
      for (Index j = 0; j < c.data.cols(); ++j)
        for (Index i = 0; i < c.data.rows(); ++i)
          c.data(i, j) = T(2) * (T(eng() >> 11) / T(9007199254740992.0)) - T(1);
    return x;
  }

  // --- serialization ------------------------------------------------------
  //
  // Text format, one tensor per file:
  //   line 1: "ttsg-tt 1"
  //   line 2: M
  //   line 3: n_1 ... n_M
  //   line 4: r_0 r_1 ... r_M
  //   then r_{m-1}*n_m*r_m core entries per core in storage order (left rank
  //   fastest, then mode index, then right rank), written as C99 hexfloats so
  //   a round trip is bit exact.

  template<typename T>
  void tt_save(const TTTensor<T>& x, const std::string& path)
  {
    x.validate();
    std::ofstream out(path);
    if (!out)
      throw std::runtime_error("tt_save: cannot open " + path);
    out << "ttsg-tt 1\n" << x.order() << "\n";
    for (const auto& c : x.cores)
      out << c.n << " ";
    out << "\n";
    out << x.cores.front().rl << " ";
    for (const auto& c : x.cores)
      out << c.rr << " ";
    out << "\n";
    char buf[64];
    for (const auto& c : x.cores)
    {
      for (Index j = 0; j < c.data.cols(); ++j)
        for (Index i = 0; i < c.data.rows(); ++i)
        {
          std::snprintf(buf, sizeof(buf), "%a\n", double(c.data(i, j)));
          out << buf;
        }
    }
    if (!out)
      throw std::runtime_error("tt_save: write failed for " + path);
  }

  template<typename T>
  TTTensor<T> tt_load(const std::string& path)
  {
    std::ifstream in(path);
    if (!in)
      throw std::runtime_error("tt_load: cannot open " + path);
    std::string magic;
    int version = 0;
    in >> magic >> version;
    if (magic != "ttsg-tt" || version != 1)
      throw std::runtime_error("tt_load: bad header in " + path);
    Index M = 0;
    in >> M;
    if (M < 1 || M > 4096)
      throw std::runtime_error("tt_load: implausible mode count in " + path);
    std::vector<Index> n(M), r(M + 1);
    for (auto& v : n) in >> v;
    for (auto& v : r) in >> v;
    TTTensor<T> x;
    std::string tok;
    for (Index m = 0; m < M; ++m)
    {
      TTCore<T> c(r[m], n[m], r[m + 1]);
      for (Index j = 0; j < c.data.cols(); ++j)
        for (Index i = 0; i < c.data.rows(); ++i)
        {
          if (!(in >> tok))
            throw std::runtime_error("tt_load: truncated file " + path);
          c.data(i, j) = T(std::strtod(tok.c_str(), nullptr));
        }
      x.cores.push_back(std::move(c));
    }
    x.validate();
    return x;
  }

}  // namespace ttsg
