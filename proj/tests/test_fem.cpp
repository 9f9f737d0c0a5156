#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ttsg/fem.hpp"

using namespace ttsg;

TEST_CASE("mesh counts follow the structured construction")
{
  for (int R : {0, 1})
  {
    const Mesh mesh = build_lshape_mesh(R);
    const Index k = mesh.k;
    CHECK(mesh.numNodes() == 3 * k * k + 4 * k + 1);
    CHECK(mesh.tris.rows() == 6 * k * k);
    CHECK(mesh.numInterior() == (3 * k - 1) * (k - 1));
  }
  // refinement quadruples the triangle count
  CHECK(build_lshape_mesh(1).tris.rows() == 4 * build_lshape_mesh(0).tris.rows());
}

TEST_CASE("interior DoF counts stay within a factor 2 of the reference scale")
{
  const Index ref[] = {557, 2145, 8417};
  for (int R : {1, 2, 3})
  {
    const Mesh mesh = build_lshape_mesh(R);
    const double ratio = double(ref[R - 1]) / double(mesh.numInterior());
    CHECK(ratio < 2.0);
    CHECK(ratio > 0.5);
  }
}

TEST_CASE("lumped weights are positive and sum to the domain area")
{
  const Mesh mesh = build_lshape_mesh(0);
  CHECK(mesh.weights.minCoeff() > 0.0);
  CHECK(mesh.weights.sum() == doctest::Approx(3.0).epsilon(1e-13));
}

TEST_CASE("all triangles are positively oriented with equal area")
{
  const Mesh mesh = build_lshape_mesh_k(4);
  const double cell = 1.0 / (2.0 * 4.0 * 4.0);
  double total = 0;
  for (Index t = 0; t < mesh.tris.rows(); ++t)
  {
    const auto tri = mesh.tris.row(t);
    const double ax = mesh.nodes(tri[0], 0), ay = mesh.nodes(tri[0], 1);
    const double bx = mesh.nodes(tri[1], 0), by = mesh.nodes(tri[1], 1);
    const double cx = mesh.nodes(tri[2], 0), cy = mesh.nodes(tri[2], 1);
    const double area = 0.5 * ((bx - ax) * (cy - ay) - (cx - ax) * (by - ay));
    CHECK(area == doctest::Approx(cell).epsilon(1e-12));
    total += area;
  }
  CHECK(total == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("patch test: the full stiffness annihilates linear fields at interior rows")
{
  const Mesh mesh = build_lshape_mesh_k(4);
  const Vec<double> ones = Vec<double>::Ones(mesh.numNodes());
  const Mat<double> K = assemble_weighted_stiffness_full(mesh, ones);
  CHECK((K - K.transpose()).norm() < 1e-12 * K.norm());

  Vec<double> lin(mesh.numNodes());
  for (Index n = 0; n < mesh.numNodes(); ++n)
    lin[n] = 0.7 * mesh.nodes(n, 0) - 1.3 * mesh.nodes(n, 1) + 0.5;
  const Vec<double> r = K * lin;
  for (Index n : mesh.interior)
    CHECK(std::abs(r[n]) < 1e-11);
}

TEST_CASE("constant-coefficient solve behaves like the Laplace problem")
{
  const Mesh mesh = build_lshape_mesh(0);
  const Vec<double> ones = Vec<double>::Ones(mesh.numNodes());
  const Vec<double> u = deterministic_solve(mesh, ones, ones);

  // Dirichlet data and the maximum principle
  for (Index n = 0; n < mesh.numNodes(); ++n)
    if (mesh.interiorIndex[std::size_t(n)] < 0)
      CHECK(u[n] == 0.0);
  CHECK(u.minCoeff() >= 0.0);
  CHECK(u.maxCoeff() > 0.0);
  CHECK(u.maxCoeff() < 1.0);

  // the mesh and the equation are symmetric under (x,y) -> (y,x)
  auto find_node = [&mesh](double x, double y)
  {
    for (Index n = 0; n < mesh.numNodes(); ++n)
      if (std::abs(mesh.nodes(n, 0) - x) < 1e-12 && std::abs(mesh.nodes(n, 1) - y) < 1e-12)
        return n;
    return Index(-1);
  };
  const Index a = find_node(-0.5, 0.5), b = find_node(0.5, -0.5);
  REQUIRE(a >= 0);
  REQUIRE(b >= 0);
  CHECK(u[a] == doctest::Approx(u[b]).epsilon(1e-12));
}

TEST_CASE("solution converges under refinement at a fixed point")
{
  auto value_at = [](int R, double x, double y)
  {
    const Mesh mesh = build_lshape_mesh(R);
    const Vec<double> ones = Vec<double>::Ones(mesh.numNodes());
    const Vec<double> u = deterministic_solve(mesh, ones, ones);
    for (Index n = 0; n < mesh.numNodes(); ++n)
      if (std::abs(mesh.nodes(n, 0) - x) < 1e-12 && std::abs(mesh.nodes(n, 1) - y) < 1e-12)
        return u[n];
    throw std::runtime_error("node not found");
  };
  const double u0 = value_at(0, -0.5, -0.5);
  const double u1 = value_at(1, -0.5, -0.5);
  const double u2 = value_at(2, -0.5, -0.5);
  CHECK(std::abs(u2 - u1) < std::abs(u1 - u0));
  CHECK(std::abs(u1 - u0) < 0.05 * std::abs(u1));
}

TEST_CASE("assembly rejects wrong-sized inputs")
{
  const Mesh mesh = build_lshape_mesh_k(2);
  CHECK_THROWS_AS(assemble_weighted_stiffness(mesh, Vec<double>::Ones(3)),
                  std::invalid_argument);
  CHECK_THROWS_AS(assemble_load(mesh, Vec<double>::Ones(3)), std::invalid_argument);
}
