#include "ttsg/fem.hpp"

#include <array>

namespace ttsg
{
  namespace
  {
    //! area and the P1 gradient factors b_i = y_{i+1}-y_{i+2}, c_i = x_{i+2}-x_{i+1}
    struct TriangleGeometry
    {
      double area;
      double b[3], c[3];
    };

    TriangleGeometry triangle_geometry(const Mesh& mesh, Index t)
    {
      TriangleGeometry g{};
      const auto& tri = mesh.tris.row(t);
      double x[3], y[3];
      for (int v = 0; v < 3; ++v)
      {
        x[v] = mesh.nodes(tri[v], 0);
        y[v] = mesh.nodes(tri[v], 1);
      }
      g.area = 0.5 * ((x[1] - x[0]) * (y[2] - y[0]) - (x[2] - x[0]) * (y[1] - y[0]));
      for (int v = 0; v < 3; ++v)
      {
        const int v1 = (v + 1) % 3, v2 = (v + 2) % 3;
        g.b[v] = y[v1] - y[v2];
        g.c[v] = x[v2] - x[v1];
      }
      return g;
    }
  }

  Mesh build_lshape_mesh_k(Index k)
  {
    if (k < 2)
      throw std::invalid_argument("build_lshape_mesh_k: k must be at least 2");

    Mesh mesh;
    mesh.k = k;
    const Index span = 2 * k;  // lattice indices 0..2k per direction
    const double h = 1.0 / double(k);

    // lattice node (i,j) -> (-1 + i*h, -1 + j*h); drop the open quadrant i>k && j>k
    std::vector<Index> id((span + 1) * (span + 1), -1);
    auto lat = [span](Index i, Index j) { return i + (span + 1) * j; };

    std::vector<double> xs, ys;
    for (Index j = 0; j <= span; ++j)
      for (Index i = 0; i <= span; ++i)
      {
        if (i > k && j > k)
          continue;
        id[lat(i, j)] = static_cast<Index>(xs.size());
        xs.push_back(-1.0 + double(i) * h);
        ys.push_back(-1.0 + double(j) * h);
      }

    const Index N = static_cast<Index>(xs.size());
    mesh.nodes.resize(N, 2);
    for (Index n = 0; n < N; ++n)
    {
      mesh.nodes(n, 0) = xs[std::size_t(n)];
      mesh.nodes(n, 1) = ys[std::size_t(n)];
    }

    // two ccw triangles per kept cell, diagonal from bottom-left to top-right
    std::vector<std::array<Index, 3>> tris;
    for (Index j = 0; j < span; ++j)
      for (Index i = 0; i < span; ++i)
      {
        if (i >= k && j >= k)
          continue;
        const Index bl = id[lat(i, j)], br = id[lat(i + 1, j)];
        const Index tl = id[lat(i, j + 1)], tr = id[lat(i + 1, j + 1)];
        tris.push_back({bl, br, tr});
        tris.push_back({bl, tr, tl});
      }
    mesh.tris.resize(static_cast<Index>(tris.size()), 3);
    for (Index t = 0; t < mesh.tris.rows(); ++t)
      for (int v = 0; v < 3; ++v)
        mesh.tris(t, v) = tris[std::size_t(t)][std::size_t(v)];

    // boundary: outer square edges restricted to the domain plus the two
    // reentrant edges x=0,y>=0 and y=0,x>=0
    mesh.interiorIndex.assign(std::size_t(N), -1);
    for (Index j = 0; j <= span; ++j)
      for (Index i = 0; i <= span; ++i)
      {
        const Index n = id[lat(i, j)];
        if (n < 0)
          continue;
        const bool bdry = (i == 0) || (j == 0) || (i == span) || (j == span) ||
                          (i == k && j >= k) || (j == k && i >= k);
        if (!bdry)
        {
          mesh.interiorIndex[std::size_t(n)] = static_cast<Index>(mesh.interior.size());
          mesh.interior.push_back(n);
        }
      }

    mesh.weights = Vec<double>::Zero(N);
    for (Index t = 0; t < mesh.tris.rows(); ++t)
    {
      const double a3 = triangle_geometry(mesh, t).area / 3.0;
      for (int v = 0; v < 3; ++v)
        mesh.weights[mesh.tris(t, v)] += a3;
    }
    return mesh;
  }

  Mesh build_lshape_mesh(int R)
  {
    if (R < 0 || R > 6)
      throw std::invalid_argument("build_lshape_mesh: refinement level out of range");
    return build_lshape_mesh_k(Index(3) * (Index(1) << (R + 1)));
  }

  Mat<double> assemble_weighted_stiffness_full(const Mesh& mesh, const Vec<double>& w)
  {
    if (w.size() != mesh.numNodes())
      throw std::invalid_argument("assemble_weighted_stiffness: weight vector size mismatch");
    const Index N = mesh.numNodes();
    Mat<double> K = Mat<double>::Zero(N, N);
    for (Index t = 0; t < mesh.tris.rows(); ++t)
    {
      const TriangleGeometry g = triangle_geometry(mesh, t);
      const auto& tri = mesh.tris.row(t);
      const double wt = (w[tri[0]] + w[tri[1]] + w[tri[2]]) / 3.0;
      const double f = wt / (4.0 * g.area);
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
          K(tri[a], tri[b]) += f * (g.b[a] * g.b[b] + g.c[a] * g.c[b]);
    }
    return K;
  }

  Mat<double> assemble_weighted_stiffness(const Mesh& mesh, const Vec<double>& w)
  {
    const Mat<double> K = assemble_weighted_stiffness_full(mesh, w);
    const Index Ni = mesh.numInterior();
    Mat<double> Ki(Ni, Ni);
    for (Index a = 0; a < Ni; ++a)
      for (Index b = 0; b < Ni; ++b)
        Ki(a, b) = K(mesh.interior[std::size_t(a)], mesh.interior[std::size_t(b)]);
    return Ki;
  }

  Vec<double> assemble_load(const Mesh& mesh, const Vec<double>& f)
  {
    if (f.size() != mesh.numNodes())
      throw std::invalid_argument("assemble_load: rhs vector size mismatch");
    const Index Ni = mesh.numInterior();
    Vec<double> b(Ni);
    for (Index a = 0; a < Ni; ++a)
    {
      const Index n = mesh.interior[std::size_t(a)];
      b[a] = mesh.weights[n] * f[n];
    }
    return b;
  }

  Vec<double> deterministic_solve(const Mesh& mesh, const Vec<double>& kappa,
                                  const Vec<double>& f)
  {
    const Mat<double> K = assemble_weighted_stiffness(mesh, kappa);
    const Vec<double> b = assemble_load(mesh, f);
    const Mat<double> x = solve_spd<double>(K, b);
    Vec<double> u = Vec<double>::Zero(mesh.numNodes());
    for (Index a = 0; a < mesh.numInterior(); ++a)
      u[mesh.interior[std::size_t(a)]] = x(a, 0);
    return u;
  }

}  // namespace ttsg
