//! @file fem.hpp
//! Structured P1 triangulation of the L-shaped domain [-1,1]^2 \ [0,1]^2 with
//! homogeneous Dirichlet boundary, plus weighted stiffness/load assembly.
//! Matrices are dense; the meshes in scope stay small enough for that.

#pragma once

#include "ttsg/dense.hpp"

#include <vector>

namespace ttsg
{
  struct Mesh
  {
    Mat<double> nodes;                          //!< N x 2 coordinates
    Eigen::Matrix<Index, Eigen::Dynamic, 3> tris;  //!< triangle vertex ids, ccw
    std::vector<Index> interior;                //!< interior node ids, ascending
    std::vector<Index> interiorIndex;           //!< node id -> interior position or -1
    Vec<double> weights;                        //!< lumped P1 mass per node (all nodes)
    Index k = 0;                                //!< subdivisions per unit square edge

    Index numNodes() const { return nodes.rows(); }
    Index numInterior() const { return static_cast<Index>(interior.size()); }
  };

  //! Uniform L-shape mesh at refinement level R >= 0.  Each of the three unit
  //! squares is a k x k grid of cells split along the bottom-left/top-right
  //! diagonal, with k = 3 * 2^(R+1); one level of R quadruples the triangles.
  Mesh build_lshape_mesh(int R);

  //! same mesh family with the subdivision count given directly (small tests)
  Mesh build_lshape_mesh_k(Index k);

  //! Full stiffness matrix over all nodes for coefficient w given by node
  //! values; each triangle uses the average of its three vertex values.
  Mat<double> assemble_weighted_stiffness_full(const Mesh& mesh, const Vec<double>& w);

  //! interior-interior block of the weighted stiffness (Dirichlet eliminated)
  Mat<double> assemble_weighted_stiffness(const Mesh& mesh, const Vec<double>& w);

  //! lumped load vector on interior nodes for a right-hand side of node values f
  Vec<double> assemble_load(const Mesh& mesh, const Vec<double>& f);

  //! Solve -div(kappa grad u) = f with u = 0 on the boundary; kappa and f are
  //! node-value vectors over all nodes.  Returns u on all nodes (zeros on the
  //! boundary).  Throws if the coefficient makes the system indefinite.
  Vec<double> deterministic_solve(const Mesh& mesh, const Vec<double>& kappa,
                                  const Vec<double>& f);

}  // namespace ttsg
