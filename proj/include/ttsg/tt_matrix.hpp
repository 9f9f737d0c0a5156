//! @file tt_matrix.hpp
//! Tensor-train operator: a chain of 4-way cores A_m(a, i, j, b) acting on
//! TTTensor vectors mode by mode.  Storage per core is a matrix of shape
//! (rl * nrow * ncol) x rr with the left rank fastest, then the row index,
//! then the column index; the (i,j) slice is a contiguous row block.

#pragma once

#include "ttsg/tt.hpp"

namespace ttsg
{
  template<typename T>
  struct TTMatrixCore
  {
    Index rl = 1, nrow = 0, ncol = 0, rr = 1;
    Mat<T> data;  //!< (rl*nrow*ncol) x rr

    TTMatrixCore() = default;
    TTMatrixCore(Index rl_, Index nrow_, Index ncol_, Index rr_)
        : rl(rl_), nrow(nrow_), ncol(ncol_), rr(rr_),
          data(Mat<T>::Zero(rl_ * nrow_ * ncol_, rr_)) {}

    auto slice(Index i, Index j) { return data.middleRows(rl * (i + nrow * j), rl); }
    auto slice(Index i, Index j) const { return data.middleRows(rl * (i + nrow * j), rl); }
  };

  template<typename T>
  class TTMatrix
  {
  public:
    std::vector<TTMatrixCore<T>> cores;

    Index order() const { return static_cast<Index>(cores.size()); }

    std::vector<Index> rowDims() const
    {
      std::vector<Index> d(cores.size());
      for (std::size_t m = 0; m < cores.size(); ++m)
        d[m] = cores[m].nrow;
      return d;
    }

    std::vector<Index> colDims() const
    {
      std::vector<Index> d(cores.size());
      for (std::size_t m = 0; m < cores.size(); ++m)
        d[m] = cores[m].ncol;
      return d;
    }

    std::vector<Index> ranks() const
    {
      std::vector<Index> r(cores.size() + 1);
      for (std::size_t m = 0; m < cores.size(); ++m)
        r[m] = cores[m].rl;
      r[cores.size()] = cores.back().rr;
      return r;
    }

    void validate() const
    {
      for (std::size_t m = 0; m + 1 < cores.size(); ++m)
        if (cores[m].rr != cores[m + 1].rl)
          throw std::invalid_argument("TTMatrix: rank mismatch between cores");
      for (const auto& c : cores)
        if (c.data.rows() != c.rl * c.nrow * c.ncol || c.data.cols() != c.rr)
          throw std::invalid_argument("TTMatrix: core storage shape mismatch");
    }
  };

  //! A(s0; row_idx, col_idx; sM) as an r_0 x r_M matrix
  template<typename T>
  Mat<T> ttm_entry(const TTMatrix<T>& A, const std::vector<Index>& row_idx,
                   const std::vector<Index>& col_idx)
  {
    if (row_idx.size() != A.cores.size() || col_idx.size() != A.cores.size())
      throw std::invalid_argument("ttm_entry: index length mismatch");
    Mat<T> acc = A.cores[0].slice(row_idx[0], col_idx[0]);
    for (std::size_t m = 1; m < A.cores.size(); ++m)
      acc = acc * A.cores[m].slice(row_idx[m], col_idx[m]);
    return acc;
  }

  //! y = A x in TT format; ranks multiply (r_A * r_x per bond), no rounding.
  //! The combined rank index is a_A * r_x + a_x on every bond.
  template<typename T>
  TTTensor<T> ttm_apply(const TTMatrix<T>& A, const TTTensor<T>& x)
  {
    if (A.colDims() != x.dims())
      throw std::invalid_argument("ttm_apply: column dims do not match vector dims");
    const Index M = A.order();
    TTTensor<T> y;
    y.cores.reserve(M);
    for (Index m = 0; m < M; ++m)
    {
      const auto& ca = A.cores[m];
      const auto& cx = x.cores[m];
      TTCore<T> cy(ca.rl * cx.rl, ca.nrow, ca.rr * cx.rr);
      for (Index i = 0; i < ca.nrow; ++i)
      {
        auto out = cy.slice(i);
        for (Index j = 0; j < ca.ncol; ++j)
        {
          const auto sa = ca.slice(i, j);
          const auto sx = cx.slice(j);
          if ((sa.array() == T(0)).all())
            continue;
          for (Index aa = 0; aa < ca.rl; ++aa)
            for (Index bb = 0; bb < ca.rr; ++bb)
            {
              const T v = sa(aa, bb);
              if (v != T(0))
                out.block(aa * cx.rl, bb * cx.rr, cx.rl, cx.rr) += v * sx;
            }
        }
      }
      y.cores.push_back(std::move(cy));
    }
    return y;
  }

  //! <y, A x> contracted mode by mode without forming A x
  template<typename T>
  T ttm_bilinear(const TTMatrix<T>& A, const TTTensor<T>& y, const TTTensor<T>& x)
  {
    if (A.colDims() != x.dims() || A.rowDims() != y.dims())
      throw std::invalid_argument("ttm_bilinear: dimension mismatch");
    // W[k] carries the partial contraction over the leading modes; its rows
    // index the y rank, its columns the x rank
    std::vector<Mat<T>> W{Mat<T>::Ones(1, 1)};
    for (Index m = 0; m < A.order(); ++m)
    {
      const auto& ca = A.cores[m];
      const auto& cy = y.cores[m];
      const auto& cx = x.cores[m];
      std::vector<Mat<T>> U(static_cast<std::size_t>(ca.rl * ca.ncol));
      for (Index k = 0; k < ca.rl; ++k)
        for (Index j = 0; j < ca.ncol; ++j)
          U[std::size_t(k * ca.ncol + j)] = W[std::size_t(k)] * cx.slice(j);
      std::vector<Mat<T>> Wn(std::size_t(ca.rr), Mat<T>::Zero(cy.rr, cx.rr));
      for (Index i = 0; i < ca.nrow; ++i)
      {
        const Mat<T> yt = cy.slice(i).transpose();
        for (Index j = 0; j < ca.ncol; ++j)
        {
          const auto sa = ca.slice(i, j);
          for (Index k = 0; k < ca.rl; ++k)
          {
            if ((sa.row(k).array() == T(0)).all())
              continue;
            const Mat<T> G = yt * U[std::size_t(k * ca.ncol + j)];
            for (Index l = 0; l < ca.rr; ++l)
              if (sa(k, l) != T(0))
                Wn[std::size_t(l)] += sa(k, l) * G;
          }
        }
      }
      W = std::move(Wn);
    }
    return W[0](0, 0);
  }

  //! Frobenius norm of A x computed by doubling the operator layer; the
  //! product is never materialised at rank r_A * r_x.  Both half contractions
  //! run as single large matrix products per operator channel, and the
  //! symmetry of the doubled network supplies the lower channel triangle.
  template<typename T>
  T ttm_apply_norm(const TTMatrix<T>& A, const TTTensor<T>& x)
  {
    if (A.colDims() != x.dims())
      throw std::invalid_argument("ttm_apply_norm: dimension mismatch");
    // W[k][k'] pairs the two operator copies; rows and columns index the two
    // vector copies; W[k'][k] = W[k][k']^T throughout
    std::vector<std::vector<Mat<T>>> W{{Mat<T>::Ones(1, 1)}};
    for (Index m = 0; m < A.order(); ++m)
    {
      const auto& ca = A.cores[m];
      const auto& cx = x.cores[m];
      const Index ral = ca.rl, rar = ca.rr, ni = ca.nrow, nj = ca.ncol;
      const Index rl = cx.rl, rr = cx.rr;
      // operator core flattened two ways: rows pair a channel with a spatial
      // index, columns pair the other spatial index with the far channel
      Mat<T> MixA(ral * nj, ni * rar);
      Mat<T> MixB(ral * ni, nj * rar);
      for (Index i = 0; i < ni; ++i)
        for (Index j = 0; j < nj; ++j)
        {
          const auto sa = ca.slice(i, j);
          for (Index k = 0; k < ral; ++k)
            for (Index l = 0; l < rar; ++l)
            {
              MixA(k * nj + j, i * rar + l) = sa(k, l);
              MixB(k * ni + i, j + nj * l) = sa(k, l);
            }
        }
      Mat<T> Xcat(rl, nj * rr);
      for (Index j = 0; j < nj; ++j)
        Xcat.middleCols(j * rr, rr) = cx.slice(j);
      // R[k] column i*rar + l2 = vec of sum_{k2,j2} A(k2,l2;i,j2) W[k][k2] slice(j2)
      Mat<T> P(rl * rr, ral * nj);
      std::vector<Mat<T>> R;
      R.resize(std::size_t(ral));
      for (Index k = 0; k < ral; ++k)
      {
        for (Index k2 = 0; k2 < ral; ++k2)
        {
          Eigen::Map<Mat<T>> view(P.middleCols(k2 * nj, nj).data(), rl, nj * rr);
          view.noalias() = W[std::size_t(k)][std::size_t(k2)] * Xcat;
        }
        R[std::size_t(k)].noalias() = P * MixA;
      }
      std::vector<std::vector<Mat<T>>> Wn;
      Wn.assign(std::size_t(rar), std::vector<Mat<T>>(std::size_t(rar)));
      Mat<T> Rcat(rl * rr, ral * ni);
      Mat<T> Tl2(rl * rr, nj * rar);
      Mat<T> Bstack(nj * rl, rr);
      for (Index l2 = 0; l2 < rar; ++l2)
      {
        for (Index k = 0; k < ral; ++k)
          for (Index i = 0; i < ni; ++i)
            Rcat.col(k * ni + i) = R[std::size_t(k)].col(i * rar + l2);
        const Index nc = nj * (l2 + 1);
        Tl2.leftCols(nc).noalias() = Rcat * MixB.leftCols(nc);
        for (Index l = 0; l <= l2; ++l)
        {
          for (Index j = 0; j < nj; ++j)
            Bstack.middleRows(j * rl, rl) =
                Eigen::Map<const Mat<T>>(Tl2.col(j + nj * l).data(), rl, rr);
          Wn[std::size_t(l)][std::size_t(l2)].noalias() = cx.data.transpose() * Bstack;
          if (l != l2)
            Wn[std::size_t(l2)][std::size_t(l)] =
                Wn[std::size_t(l)][std::size_t(l2)].transpose();
        }
      }
      W = std::move(Wn);
    }
    using std::sqrt;
    return sqrt(std::max(W[0][0](0, 0), T(0)));
  }

  //! || f - A x || assembled from Gram contractions.  Accurate down to about
  //! sqrt(eps) * ||f|| because the three terms cancel.
  template<typename T>
  T ttm_residual_norm(const TTMatrix<T>& A, const TTTensor<T>& x, const TTTensor<T>& f)
  {
    const T na = ttm_apply_norm(A, x);
    const T fax = ttm_bilinear(A, f, x);
    const T nf = tt_norm(f);
    using std::sqrt;
    return sqrt(std::max(na * na - T(2) * fax + nf * nf, T(0)));
  }

}  // namespace ttsg
