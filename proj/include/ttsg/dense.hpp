//! @file dense.hpp
//! Dense kernels used throughout the tensor-train code: thin QR, truncated SVD,
//! symmetric eigendecomposition, SPD solves and the maxvol row selection.
//! All tolerances are relative Frobenius-norm thresholds.

#pragma once

#include <Eigen/Dense>
#include <limits>
#include <stdexcept>
#include <vector>

namespace ttsg
{
  using Index = Eigen::Index;

  template<typename T>
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

  template<typename T>
  using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

  //! result of a thin QR factorization A = Q R with orthonormal columns in Q
  template<typename T>
  struct ThinQR
  {
    Mat<T> Q;  //!< rows(A) x k with k = min(rows, cols)
    Mat<T> R;  //!< k x cols(A), upper triangular
  };

  //! thin Householder QR; throws std::invalid_argument on non-finite input
  template<typename T>
  ThinQR<T> orthonormalize(const Mat<T>& A)
  {
    if (!A.allFinite())
      throw std::invalid_argument("orthonormalize: input contains non-finite entries");
    const Index k = std::min(A.rows(), A.cols());
    Eigen::HouseholderQR<Mat<T>> qr(A);
    ThinQR<T> result;
    result.Q = qr.householderQ() * Mat<T>::Identity(A.rows(), k);
    result.R = qr.matrixQR().topRows(k).template triangularView<Eigen::Upper>();
    return result;
  }

  //! result of a rank-revealing SVD truncation A ~ U diag(S) V^T
  template<typename T>
  struct TruncatedSvd
  {
    Mat<T> U;   //!< rows(A) x rank, orthonormal columns
    Vec<T> S;   //!< rank singular values, non-increasing
    Mat<T> V;   //!< cols(A) x rank, orthonormal columns
    Index rank = 0;
    T discarded_rel = T(0);  //!< Frobenius norm of the dropped tail over ||A||_F
  };

  //! Truncated SVD: keeps the smallest rank r such that the discarded tail obeys
  //! sqrt(sum_{i>r} s_i^2) <= tol_rel * ||A||_F, capped at rank_max.
  //! A zero matrix yields rank 1 with S = [0] so downstream shapes stay valid.
  template<typename T>
  TruncatedSvd<T> truncated_svd(const Mat<T>& A, double tol_rel,
                                Index rank_max = std::numeric_limits<Index>::max())
  {
    if (!A.allFinite())
      throw std::invalid_argument("truncated_svd: input contains non-finite entries");
    if (rank_max < 1)
      throw std::invalid_argument("truncated_svd: rank_max must be >= 1");

    const Index kmax = std::min(A.rows(), A.cols());
    TruncatedSvd<T> result;
    if (A.norm() == T(0))
    {
      result.rank = 1;
      result.U = Mat<T>::Identity(A.rows(), 1);
      result.S = Vec<T>::Zero(1);
      result.V = Mat<T>::Identity(A.cols(), 1);
      return result;
    }

    Eigen::BDCSVD<Mat<T>> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec<T>& sv = svd.singularValues();
    const T total2 = sv.squaredNorm();
    const T cut2 = T(tol_rel) * T(tol_rel) * total2;

    Index r = kmax;
    T tail2 = T(0);
    while (r > 1)
    {
      const T next = tail2 + sv[r - 1] * sv[r - 1];
      if (next > cut2)
        break;
      tail2 = next;
      --r;
    }
    if (r > rank_max)
    {
      tail2 += sv.segment(rank_max, r - rank_max).squaredNorm();
      r = rank_max;
    }

    result.rank = r;
    result.U = svd.matrixU().leftCols(r);
    result.S = sv.head(r);
    result.V = svd.matrixV().leftCols(r);
    result.discarded_rel = std::sqrt(tail2 / total2);
    return result;
  }

  //! eigendecomposition of a symmetric matrix, eigenvalues sorted descending
  template<typename T>
  struct SymEig
  {
    Vec<T> values;
    Mat<T> vectors;  //!< column k is the eigenvector for values[k]
  };

  //! throws std::invalid_argument if A is not symmetric to a 1e-10 relative check
  template<typename T>
  SymEig<T> sym_eig(const Mat<T>& A)
  {
    if (A.rows() != A.cols())
      throw std::invalid_argument("sym_eig: matrix must be square");
    const T scale = A.norm();
    if (scale > T(0) && (A - A.transpose()).norm() > T(1e-10) * scale)
      throw std::invalid_argument("sym_eig: matrix is not symmetric");

    Eigen::SelfAdjointEigenSolver<Mat<T>> es(A);
    if (es.info() != Eigen::Success)
      throw std::runtime_error("sym_eig: eigendecomposition failed");

    // Eigen sorts ascending; flip to descending
    SymEig<T> result;
    result.values = es.eigenvalues().reverse();
    result.vectors = es.eigenvectors().rowwise().reverse();
    return result;
  }

  //! Cholesky solve of an SPD system A X = B; throws std::runtime_error if the
  //! factorization detects an indefinite or numerically singular matrix
  template<typename T>
  Mat<T> solve_spd(const Mat<T>& A, const Mat<T>& B)
  {
    if (A.rows() != A.cols() || A.rows() != B.rows())
      throw std::invalid_argument("solve_spd: dimension mismatch");
    Eigen::LLT<Mat<T>> llt(A);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("solve_spd: matrix is not positive definite");
    return llt.solve(B);
  }

  //! Maxvol row selection on a tall matrix A (rows >= cols): returns r = cols(A)
  //! row indices such that B = A * A(rows,:)^{-1} satisfies max|B| <= 1 + delta.
  //! Initialization is partially pivoted Gaussian elimination; ties between equal
  //! pivots break toward the lowest index, so the selection is deterministic.
  //! Indices are returned in pivot order (the order the elimination picked them).
  //! Throws std::invalid_argument for wide input and std::runtime_error when the
  //! matrix is numerically rank deficient.
  template<typename T>
  std::vector<Index> maxvol(const Mat<T>& A, double delta = 0.05, int max_swaps = 200)
  {
    const Index n = A.rows();
    const Index r = A.cols();
    if (n < r)
      throw std::invalid_argument("maxvol: matrix must be tall (rows >= cols)");
    if (!A.allFinite())
      throw std::invalid_argument("maxvol: input contains non-finite entries");

    const T tiny = std::numeric_limits<T>::epsilon() * T(64) *
                   std::max<T>(A.cwiseAbs().maxCoeff(), T(1));

    // pivot-order initialization: Gaussian elimination with row pivoting
    std::vector<Index> rows(r);
    {
      Mat<T> work = A;
      std::vector<bool> used(n, false);
      for (Index j = 0; j < r; ++j)
      {
        Index piv = -1;
        T best = T(-1);
        for (Index i = 0; i < n; ++i)
          if (!used[i] && std::abs(work(i, j)) > best)
          {
            best = std::abs(work(i, j));
            piv = i;
          }
        if (piv < 0 || best <= tiny)
          throw std::runtime_error("maxvol: matrix is numerically rank deficient");
        used[piv] = true;
        rows[j] = piv;
        for (Index i = 0; i < n; ++i)
          if (!used[i] && work(i, j) != T(0))
            work.row(i) -= (work(i, j) / work(piv, j)) * work.row(piv);
      }
    }
    if (n == r)
      return rows;

    Mat<T> sub(r, r);
    for (Index j = 0; j < r; ++j)
      sub.row(j) = A.row(rows[j]);
    Eigen::PartialPivLU<Mat<T>> lu(sub.transpose());
    Mat<T> B = lu.solve(A.transpose()).transpose();  // B = A * sub^{-1}

    for (int swap = 0; swap < max_swaps; ++swap)
    {
      // column-major scan with strict > keeps the lowest linear index on ties
      Index imax = 0, jmax = 0;
      T vmax = T(-1);
      for (Index j = 0; j < r; ++j)
        for (Index i = 0; i < n; ++i)
          if (std::abs(B(i, j)) > vmax)
          {
            vmax = std::abs(B(i, j));
            imax = i;
            jmax = j;
          }
      if (vmax <= T(1) + T(delta))
        break;

      // replace selected row jmax by row imax; Sherman-Morrison update of B
      const T pivot = B(imax, jmax);
      Vec<T> colj = B.col(jmax);
      Vec<T> rowi = B.row(imax).transpose();
      rowi[jmax] -= T(1);
      B.noalias() -= colj * (rowi.transpose() / pivot);
      rows[jmax] = imax;
    }
    return rows;
  }

}  // namespace ttsg
