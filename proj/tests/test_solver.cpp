#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ttsg/distributions.hpp"
#include "ttsg/galerkin.hpp"
#include "ttsg/solver.hpp"

#include <random>

using namespace ttsg;

namespace
{
  TTMatrix<double> identity_op(const std::vector<Index>& dims)
  {
    TTMatrix<double> A;
    for (Index n : dims)
    {
      TTMatrixCore<double> c(1, n, n, 1);
      for (Index i = 0; i < n; ++i)
        c.slice(i, i)(0, 0) = 1.0;
      A.cores.push_back(std::move(c));
    }
    return A;
  }

  TTMatrix<double> random_op(const std::vector<Index>& dims, Index rank, unsigned seed)
  {
    std::mt19937 rng(seed);
    std::normal_distribution<double> gauss;
    TTMatrix<double> A;
    const Index M = static_cast<Index>(dims.size());
    for (Index m = 0; m < M; ++m)
    {
      const Index rl = (m == 0) ? 1 : rank;
      const Index rr = (m == M - 1) ? 1 : rank;
      TTMatrixCore<double> c(rl, dims[std::size_t(m)], dims[std::size_t(m)], rr);
      for (Index r = 0; r < c.data.rows(); ++r)
        for (Index cc = 0; cc < c.data.cols(); ++cc)
          c.data(r, cc) = gauss(rng);
      A.cores.push_back(std::move(c));
    }
    return A;
  }
}

TEST_CASE("gram contractions match the materialised product")
{
  const std::vector<Index> dims = {4, 3, 5};
  const TTMatrix<double> A = random_op(dims, 2, 7);
  const TTTensor<double> x = tt_random<double>(dims, 3, 11);
  const TTTensor<double> y = ttm_apply(A, x);

  CHECK(ttm_apply_norm(A, x) == doctest::Approx(tt_norm_orth(y)).epsilon(1e-12));

  const TTTensor<double> z = tt_random<double>(dims, 2, 13);
  CHECK(ttm_bilinear(A, z, x) == doctest::Approx(tt_dot(z, y).trace()).epsilon(1e-12));

  const TTTensor<double> f = tt_random<double>(dims, 2, 17);
  const double brute = tt_norm_orth(tt_add(f, y, 1.0, -1.0));
  CHECK(ttm_residual_norm(A, x, f) == doctest::Approx(brute).epsilon(1e-10));
}

TEST_CASE("identity system reproduces the right-hand side")
{
  const std::vector<Index> dims = {5, 4, 3};
  const TTMatrix<double> A = identity_op(dims);
  const TTTensor<double> f = tt_random<double>(dims, 2, 3);
  const TTTensor<double> x0 = tt_random<double>(dims, 1, 5);

  SolveOptions opts;
  opts.tol_rel = 1e-10;
  SolveReport rep;
  const TTTensor<double> x = als_solve(A, f, x0, opts, &rep);

  CHECK(rep.converged);
  CHECK(rep.residual_rel <= 1e-10);
  for (Index i = 0; i < 5; ++i)
    CHECK(tt_entry1(x, {i, i % 4, i % 3}) ==
          doctest::Approx(tt_entry1(f, {i, i % 4, i % 3})).epsilon(1e-9));
}

TEST_CASE("constant coefficient reduces to the deterministic solution")
{
  const Mesh mesh = build_lshape_mesh_k(4);
  const Index M = 2;
  const int p = 2;
  const PCEProblem prob = build_pce_problem(
      mesh, CovarianceModel{1.0}, [](double) { return 2.0; }, M, 2 * p);
  const KappaExpansion kap = build_kappa_tt(prob, 1e-8);
  const TTMatrix<double> A = assemble_operator_tt(mesh, prob, kap, p);

  const Vec<double> ones = Vec<double>::Ones(mesh.numNodes());
  const Vec<double> f0 = assemble_load(mesh, ones);
  const TTTensor<double> f = assemble_rhs_tt(f0, M, p);

  const auto spatial = spatial_stiffness_blocks(mesh, prob);
  const Vec<double> u0 = solve_spd<double>(spatial[0], f0);

  SolveOptions opts;
  // the certified residual is only accurate to about sqrt(eps)*||f||, so ask
  // for a target the certification arithmetic can distinguish from noise
  opts.tol_rel = 3e-8;
  SolveReport rep;
  const TTTensor<double> x = als_solve(A, f, assemble_rhs_tt(Vec<double>::Zero(f0.size()), M, p),
                                       opts, &rep);

  CHECK(rep.converged);
  const double uref = u0.cwiseAbs().maxCoeff();
  for (Index i = 0; i < f0.size(); i += 3)
  {
    CHECK(tt_entry1(x, {i, 0, 0}) == doctest::Approx(u0[i]).epsilon(1e-8));
    CHECK(std::abs(tt_entry1(x, {i, 1, 1})) <= 1e-8 * uref);
  }
}

TEST_CASE("small stochastic system agrees with the dense factorisation")
{
  const Mesh mesh = build_lshape_mesh_k(4);
  const Index M = 2;
  const int p = 3;
  const PCEProblem prob =
      build_pce_problem(mesh, CovarianceModel{1.0}, lognormal_phi(0.5), M, 2 * p);
  const KappaExpansion kap = build_kappa_tt(prob, 1e-8);
  const TTMatrix<double> A = assemble_operator_tt(mesh, prob, kap, p);

  const Vec<double> ones = Vec<double>::Ones(mesh.numNodes());
  const Vec<double> f0 = assemble_load(mesh, ones);
  const TTTensor<double> f = assemble_rhs_tt(f0, M, p);

  const auto spatial = spatial_stiffness_blocks(mesh, prob);
  const Index Ni = spatial[0].rows();
  const Index ns = p + 1;
  const Index D = Ni * ns * ns;

  // densify the operator and the right-hand side; index i + Ni*(a + ns*b)
  Mat<double> Kd(D, D);
  Vec<double> fd = Vec<double>::Zero(D);
  for (Index i = 0; i < Ni; ++i)
    fd[i] = f0[i];
  for (Index a = 0; a < ns; ++a)
    for (Index b = 0; b < ns; ++b)
      for (Index a2 = 0; a2 < ns; ++a2)
        for (Index b2 = 0; b2 < ns; ++b2)
          for (Index i = 0; i < Ni; ++i)
            for (Index j = 0; j < Ni; ++j)
              Kd(i + Ni * (a + ns * b), j + Ni * (a2 + ns * b2)) =
                  ttm_entry(A, {i, a, b}, {j, a2, b2})(0, 0);
  const Vec<double> xd = solve_spd<double>(0.5 * (Kd + Kd.transpose()), fd);

  // mean-field initial guess
  const Vec<double> u0 = solve_spd<double>(spatial[0], f0);
  SolveOptions opts;
  opts.tol_rel = 1e-6;
  SolveReport rep;
  const TTTensor<double> x = als_solve(A, f, assemble_rhs_tt(u0, M, p), opts, &rep);

  CHECK(rep.converged);
  CHECK(rep.residual_rel <= 1e-6);

  double err2 = 0.0, ref2 = 0.0;
  for (Index i = 0; i < Ni; ++i)
    for (Index a = 0; a < ns; ++a)
      for (Index b = 0; b < ns; ++b)
      {
        const double got = tt_entry1(x, {i, a, b});
        const double ref = xd[i + Ni * (a + ns * b)];
        err2 += (got - ref) * (got - ref);
        ref2 += ref * ref;
      }
  CHECK(std::sqrt(err2 / ref2) <= 1e-4);

  // energy decreases monotonically across sweeps
  REQUIRE(!rep.energy_history.empty());
  for (std::size_t s = 1; s < rep.energy_history.size(); ++s)
    CHECK(rep.energy_history[s] <=
          rep.energy_history[s - 1] + 1e-12 * std::abs(rep.energy_history[s - 1]));

  // the exact residual helper agrees with the report
  CHECK(ttm_residual_norm(A, x, f) / tt_norm(f) ==
        doctest::Approx(rep.residual_rel).epsilon(1e-6));
}

TEST_CASE("shape violations are rejected")
{
  const std::vector<Index> dims = {4, 3};
  const TTMatrix<double> A = identity_op(dims);
  const TTTensor<double> f = tt_random<double>(dims, 2, 3);
  const TTTensor<double> bad = tt_random<double>({4, 5}, 2, 3);
  CHECK_THROWS_AS((void)als_solve(A, bad, f), std::invalid_argument);
  CHECK_THROWS_AS((void)als_solve(A, f, bad), std::invalid_argument);
  CHECK_THROWS_AS((void)ttm_bilinear(A, bad, f), std::invalid_argument);
  CHECK_THROWS_AS((void)ttm_apply_norm(A, bad), std::invalid_argument);
}
