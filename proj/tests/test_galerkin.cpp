#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ttsg/distributions.hpp"
#include "ttsg/galerkin.hpp"

#include <cmath>

using namespace ttsg;

namespace
{
  TTTensor<double> single_core_chain(const Vec<double>& values)
  {
    TTTensor<double> chain;
    TTCore<double> c(1, values.size(), 1);
    c.data = values;
    chain.cores.push_back(std::move(c));
    return chain;
  }
}

TEST_CASE("order-zero chain produces the diagonal factorial core")
{
  const int p = 3;
  Vec<double> e0 = Vec<double>::Zero(2 * p + 1);
  e0[0] = 1.0;
  const auto cores = stochastic_cores(single_core_chain(e0), p);
  REQUIRE(cores.size() == 1);
  for (int a = 0; a <= p; ++a)
    for (int b = 0; b <= p; ++b)
    {
      const double expect = (a == b) ? factorial(a) : 0.0;
      CHECK(cores[0].slice(a, b)(0, 0) == doctest::Approx(expect).epsilon(1e-14));
    }
}

TEST_CASE("first-order contraction matches the hand-computed triple products")
{
  const int p = 1;
  Vec<double> vals(3);
  vals << 0.7, -1.3, 0.4;
  const auto cores = stochastic_cores(single_core_chain(vals), p);
  const auto& k = cores[0];
  CHECK(k.slice(0, 0)(0, 0) == doctest::Approx(0.7));
  CHECK(k.slice(0, 1)(0, 0) == doctest::Approx(-1.3));
  CHECK(k.slice(1, 0)(0, 0) == doctest::Approx(-1.3));
  CHECK(k.slice(1, 1)(0, 0) == doctest::Approx(0.7 + 2.0 * 0.4));
}

TEST_CASE("chain mode size must cover twice the solution order")
{
  Vec<double> vals = Vec<double>::Ones(3);
  CHECK_THROWS_AS((void)stochastic_cores(single_core_chain(vals), 2), std::invalid_argument);
}

TEST_CASE("operator ranks equal the coefficient chain ranks")
{
  const Mesh mesh = build_lshape_mesh_k(4);
  const int p = 2;
  const PCEProblem prob =
      build_pce_problem(mesh, CovarianceModel{1.0}, lognormal_phi(0.5), 3, 2 * p);
  const KappaExpansion kap = build_kappa_tt(prob, 1e-8);
  const TTMatrix<double> A = assemble_operator_tt(mesh, prob, kap, p);

  const auto field_ranks = kap.field.ranks();
  const auto op_ranks = A.ranks();
  REQUIRE(op_ranks.size() == field_ranks.size());
  for (std::size_t k = 0; k < op_ranks.size(); ++k)
    CHECK(op_ranks[k] == field_ranks[k]);
}

TEST_CASE("tiny instance agrees with the dense sum over triple products")
{
  const Mesh mesh = build_lshape_mesh_k(4);
  const Index M = 3;
  const int p = 2;
  const PCEProblem prob =
      build_pce_problem(mesh, CovarianceModel{1.0}, lognormal_phi(0.5), M, 2 * p);
  const KappaExpansion kap = build_kappa_tt(prob, 1e-8);
  const TTMatrix<double> A = assemble_operator_tt(mesh, prob, kap, p);

  const auto spatial = spatial_stiffness_blocks(mesh, prob);
  const Index Ni = spatial[0].rows();
  const Index L = prob.L();
  const Index nsol = p + 1;
  const Index n_chain = 2 * p + 1;

  // all coefficient values on the order-2p set
  const Index n_nu = n_chain * n_chain * n_chain;
  Mat<double> coeff_tab(L, n_nu);
  for (Index t = 0; t < n_nu; ++t)
  {
    const std::vector<Index> nu = {t % n_chain, (t / n_chain) % n_chain, t / (n_chain * n_chain)};
    coeff_tab.col(t) = tt_entry(kap.coeff, nu).col(0);
  }

  // stochastic factors on the solution set
  const Index n_st = nsol * nsol * nsol;
  auto unpack = [&](Index t) {
    return std::vector<Index>{t % nsol, (t / nsol) % nsol, t / (nsol * nsol)};
  };
  Mat<double> Kw = Mat<double>::Zero(n_st, n_st * (L + 1));
  for (Index ar = 0; ar < n_st; ++ar)
    for (Index bc = 0; bc < n_st; ++bc)
    {
      const auto al = unpack(ar);
      const auto be = unpack(bc);
      double d0 = 1.0;
      for (Index m = 0; m < M; ++m)
        d0 *= (al[std::size_t(m)] == be[std::size_t(m)]) ? factorial(int(al[std::size_t(m)])) : 0.0;
      Kw(ar, bc) = d0;
      for (Index t = 0; t < n_nu; ++t)
      {
        const std::vector<Index> nu = {t % n_chain, (t / n_chain) % n_chain,
                                       t / (n_chain * n_chain)};
        double dd = 1.0;
        for (Index m = 0; m < M && dd != 0.0; ++m)
          dd *= triple_delta(int(al[std::size_t(m)]), int(be[std::size_t(m)]),
                             int(nu[std::size_t(m)]));
        if (dd == 0.0)
          continue;
        for (Index l = 0; l < L; ++l)
          Kw(ar, bc + n_st * (l + 1)) += dd * coeff_tab(l, t);
      }
    }

  // spot check a spread of entries rather than the full 10^5 x 10^5 square
  double worst = 0.0, scale = 0.0;
  for (Index i = 0; i < Ni; i += 7)
    for (Index j = 0; j < Ni; j += 5)
      for (Index ar = 0; ar < n_st; ar += 2)
        for (Index bc = 0; bc < n_st; bc += 3)
        {
          double dense = spatial[0](i, j) * Kw(ar, bc);
          for (Index l = 0; l < L; ++l)
            dense += spatial[std::size_t(l) + 1](i, j) * Kw(ar, bc + n_st * (l + 1));

          const auto al = unpack(ar);
          const auto be = unpack(bc);
          std::vector<Index> row = {i}, col = {j};
          row.insert(row.end(), al.begin(), al.end());
          col.insert(col.end(), be.begin(), be.end());
          const double got = ttm_entry(A, row, col)(0, 0);
          worst = std::max(worst, std::abs(got - dense));
          scale = std::max(scale, std::abs(dense));
        }
  CHECK(scale > 0.0);
  CHECK(worst <= 1e-10 * scale);
}

TEST_CASE("operator is symmetric on random tensor pairs")
{
  const Mesh mesh = build_lshape_mesh_k(4);
  const Index M = 3;
  const int p = 2;
  const PCEProblem prob =
      build_pce_problem(mesh, CovarianceModel{1.0}, lognormal_phi(0.5), M, 2 * p);
  const KappaExpansion kap = build_kappa_tt(prob, 1e-8);
  const TTMatrix<double> A = assemble_operator_tt(mesh, prob, kap, p);

  const std::vector<Index> dims = A.rowDims();
  for (unsigned seed = 1; seed <= 20; ++seed)
  {
    const TTTensor<double> x = tt_random<double>(dims, 3, seed);
    const TTTensor<double> y = tt_random<double>(dims, 3, 1000 + seed);
    const double xy = tt_dot(y, ttm_apply(A, x)).trace();
    const double yx = tt_dot(x, ttm_apply(A, y)).trace();
    CHECK(std::abs(xy - yx) <= 1e-9 * std::max({1.0, std::abs(xy), std::abs(yx)}));
  }
}

TEST_CASE("constant coefficient reduces to the mean stiffness action")
{
  const Mesh mesh = build_lshape_mesh_k(4);
  const Index M = 2;
  const int p = 1;
  const PCEProblem prob = build_pce_problem(
      mesh, CovarianceModel{1.0}, [](double) { return 2.0; }, M, 2 * p);
  const KappaExpansion kap = build_kappa_tt(prob, 1e-8);
  const TTMatrix<double> A = assemble_operator_tt(mesh, prob, kap, p);

  const auto spatial = spatial_stiffness_blocks(mesh, prob);
  const Index Ni = spatial[0].rows();
  Vec<double> u0(Ni);
  for (Index i = 0; i < Ni; ++i)
    u0[i] = std::sin(0.37 * double(i + 1));
  const TTTensor<double> x = assemble_rhs_tt(u0, M, p);
  const TTTensor<double> y = ttm_apply(A, x);

  const Vec<double> expect = spatial[0] * u0;
  for (Index i = 0; i < Ni; i += 3)
  {
    CHECK(tt_entry1(y, {i, 0, 0}) == doctest::Approx(expect[i]).epsilon(1e-10));
    CHECK(std::abs(tt_entry1(y, {i, 1, 0})) <= 1e-12 * std::max(1.0, expect.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("right-hand side tensor is the load at order zero")
{
  Vec<double> f0(4);
  f0 << 1.0, -2.0, 0.5, 3.0;
  const TTTensor<double> f = assemble_rhs_tt(f0, 3, 2);
  CHECK(f.order() == 4);
  CHECK(tt_entry1(f, {1, 0, 0, 0}) == doctest::Approx(-2.0));
  CHECK(tt_entry1(f, {1, 1, 0, 0}) == doctest::Approx(0.0));
  CHECK(tt_entry1(f, {3, 0, 2, 1}) == doctest::Approx(0.0));
  CHECK(tt_norm(f) == doctest::Approx(f0.norm()).epsilon(1e-12));
}

TEST_CASE("mismatched spatial seam is rejected")
{
  std::vector<Mat<double>> spatial(3, Mat<double>::Identity(4, 4));
  Vec<double> vals = Vec<double>::Ones(3);
  auto cores = stochastic_cores(single_core_chain(vals), 1);  // left rank 1, seam expects 3
  CHECK_THROWS_AS((void)assemble_operator_tt(spatial, cores), std::invalid_argument);
}
