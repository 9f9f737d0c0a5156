#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ttsg/block_cross.hpp"

#include <cmath>
#include <random>

using namespace ttsg;

namespace
{
  //! separable product tensor prod_m a_m(alpha_m), exactly rank 1
  struct ProductEvaluator : BlockEvaluator
  {
    std::vector<Index> modes;
    const std::vector<Index>& modeSizes() const override { return modes; }
    Index blockCount() const override { return 1; }

    static double factor(Index m, Index a) { return 1.0 + 0.37 * double(m + 1) + 0.11 * double(a * a); }

    Vec<double> evaluateIndex(const std::vector<Index>& alpha) const override
    {
      double v = 1.0;
      for (std::size_t m = 0; m < alpha.size(); ++m)
        v *= factor(Index(m), alpha[m]);
      Vec<double> out(1);
      out[0] = v;
      return out;
    }
  };

  //! 1/(1 + shift + sum alpha_m), a smooth tensor with fast-decaying ranks
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

  //! the same family as a block of L = 3 simultaneous tensors
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

  struct NanEvaluator : BlockEvaluator
  {
    std::vector<Index> modes{3, 3, 3};
    const std::vector<Index>& modeSizes() const override { return modes; }
    Index blockCount() const override { return 1; }
    Vec<double> evaluateIndex(const std::vector<Index>&) const override
    {
      Vec<double> out(1);
      out[0] = std::nan("");
      return out;
    }
  };

  struct ZeroEvaluator : BlockEvaluator
  {
    std::vector<Index> modes{4, 3, 5};
    const std::vector<Index>& modeSizes() const override { return modes; }
    Index blockCount() const override { return 2; }
    Vec<double> evaluateIndex(const std::vector<Index>&) const override
    {
      return Vec<double>::Zero(2);
    }
  };

  //! relative Frobenius error of the TT against full enumeration, per block slice
  double full_enumeration_error(const BlockEvaluator& f, const TTTensor<double>& x)
  {
    const auto dims = f.modeSizes();
    const Index L = f.blockCount();
    std::vector<Index> idx(dims.size(), 0);
    double num = 0, den = 0;
    for (;;)
    {
      const Vec<double> ref = f.evalIndex(idx);
      const Mat<double> got = tt_entry(x, idx);  // L x 1
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
}

TEST_CASE("separable tensor is recovered at machine precision in two iterations")
{
  ProductEvaluator f;
  f.modes = {5, 5, 5, 5};
  const TTTensor<double> guess = tt_random<double>(f.modes, 2, 11);
  CrossReport rep;
  const TTTensor<double> x = block_cross_approximate(f, 1e-8, guess, 10, 200, &rep);

  CHECK(rep.converged);
  CHECK(rep.iterations <= 2);
  CHECK(x.maxRank() == 1);
  CHECK(x.cores.front().rl == 1);
  f.resetIndexEvaluations();
  CHECK(full_enumeration_error(f, x) <= 1e-12);
}

TEST_CASE("smooth four-dimensional tensor meets the sampled and full error bounds")
{
  ShiftedHilbert f;
  f.modes = {10, 10, 10, 10};
  // single-output cross keeps the ranks of the guess, so the guess must
  // already carry enough columns to resolve the target accuracy
  const TTTensor<double> guess = tt_random<double>(f.modes, 10, 23);
  CrossReport rep;
  const TTTensor<double> x = block_cross_approximate(f, 1e-8, guess, 10, 200, &rep);

  CHECK(rep.converged);
  const long long driver_tally = rep.index_evals;
  CHECK(f.indexEvaluations() == driver_tally);  // evaluator-side and driver-side counts agree

  // per-sweep budget r_{m-1} n_m r_m, summed over sweeps and modes
  const double R = double(rep.max_rank_seen);
  const double per_it = 2 * 4 * 10 * R * R + 10 * R;
  CHECK(double(driver_tally) <= double(rep.iterations) * per_it);

  f.resetIndexEvaluations();
  CHECK(full_enumeration_error(f, x) <= 1e-7);

  // sampled error at 1000 random indices
  std::mt19937_64 eng(5);
  double worst = 0;
  for (int s = 0; s < 1000; ++s)
  {
    std::vector<Index> idx(4);
    for (auto& a : idx)
      a = Index(eng() % 10);
    const double ref = f.evalIndex(idx)[0];
    const double got = tt_entry1(x, idx);
    worst = std::max(worst, std::abs(got - ref) / std::abs(ref));
  }
  CHECK(worst <= 1e-7);
}

TEST_CASE("cross runs are deterministic for a fixed guess")
{
  ShiftedHilbert f;
  f.modes = {8, 8, 8};
  const TTTensor<double> guess = tt_random<double>(f.modes, 2, 77);
  const TTTensor<double> x1 = block_cross_approximate(f, 1e-6, guess);
  const TTTensor<double> x2 = block_cross_approximate(f, 1e-6, guess);

  REQUIRE(x1.ranks() == x2.ranks());
  for (std::size_t m = 0; m < x1.cores.size(); ++m)
    CHECK(x1.cores[m].data == x2.cores[m].data);
}

TEST_CASE("block run matches three independent single-tensor baselines cheaply")
{
  HilbertFamily fam;
  fam.modes = {10, 10, 10, 10};
  const TTTensor<double> guess = tt_random<double>(fam.modes, 2, 31);
  CrossReport rep;
  const TTTensor<double> xb = block_cross_approximate(fam, 1e-8, guess, 10, 200, &rep);
  CHECK(rep.converged);
  CHECK(xb.cores.front().rl == 3);

  long long independent_evals = 0;
  double worst = 0;
  for (Index l = 0; l < 3; ++l)
  {
    ShiftedHilbert single;
    single.modes = fam.modes;
    single.shift = l;
    CrossReport drep;
    const TTTensor<double> xd =
        dmrg_cross_baseline(single, 1e-8, tt_random<double>(fam.modes, 2, 31), 10, 200, &drep);
    independent_evals += drep.index_evals;

    // compare slice l of the block result against the standalone run
    std::mt19937_64 eng(100 + std::uint64_t(l));
    for (int s = 0; s < 500; ++s)
    {
      std::vector<Index> idx(4);
      for (auto& a : idx)
        a = Index(eng() % 10);
      const double vb = tt_entry(xb, idx)(l, 0);
      const double vd = tt_entry1(xd, idx);
      worst = std::max(worst, std::abs(vb - vd) / std::abs(vd));
    }
  }
  CHECK(worst <= 1e-6);
  CHECK(double(rep.index_evals) <= 0.4 * double(independent_evals));
}

TEST_CASE("dmrg baseline recovers the separable tensor and rejects blocks")
{
  ProductEvaluator f;
  f.modes = {5, 5, 5};
  CrossReport rep;
  const TTTensor<double> x =
      dmrg_cross_baseline(f, 1e-8, tt_random<double>(f.modes, 2, 3), 10, 200, &rep);
  CHECK(x.maxRank() == 1);
  f.resetIndexEvaluations();
  CHECK(full_enumeration_error(f, x) <= 1e-12);

  HilbertFamily fam;
  fam.modes = {5, 5, 5};
  CHECK_THROWS_AS(dmrg_cross_baseline(fam, 1e-8, tt_random<double>(fam.modes, 2, 3)),
                  std::invalid_argument);
}

TEST_CASE("warmup sweep builds nested singleton or rank-sized index sets")
{
  CrossState st;
  st.u = tt_random<double>({4, 4, 4}, 2, 19);
  warmup_sweep(st);

  for (std::size_t m = 1; m <= 2; ++m)
  {
    const Index r = st.u.cores[m - 1].rr;
    REQUIRE(Index(st.Ipref[m].size()) == r);
    CHECK(std::abs(Eigen::FullPivLU<Mat<double>>(st.UL[m]).determinant()) > 0);
    for (const auto& p : st.Ipref[m])
      REQUIRE(Index(p.size()) == Index(m));
    if (m >= 2)
    {
      // nestedness: dropping the last entry of each prefix lands in Ipref[m-1]
      for (const auto& p : st.Ipref[m])
      {
        std::vector<Index> head(p.begin(), p.end() - 1);
        bool found = false;
        for (const auto& q : st.Ipref[m - 1])
          found = found || (q == head);
        CHECK(found);
      }
    }
  }

  CrossState s1;
  s1.u = tt_random<double>({4, 4, 4}, 1, 19);
  warmup_sweep(s1);
  CHECK(s1.Ipref[1].size() == 1);
  CHECK(s1.Ipref[2].size() == 1);

  // a second warmup of the already-orthonormal chain keeps core norms, bar the last
  CrossState st2 = st;
  const double n0 = st.u.cores[0].data.norm();
  const double n1 = st.u.cores[1].data.norm();
  warmup_sweep(st2);
  CHECK(st2.u.cores[0].data.norm() == doctest::Approx(n0).epsilon(1e-12));
  CHECK(st2.u.cores[1].data.norm() == doctest::Approx(n1).epsilon(1e-12));
}

TEST_CASE("an all-zero block family collapses to the zero tensor")
{
  ZeroEvaluator f;
  CrossReport rep;
  const TTTensor<double> x = block_cross_approximate(f, 1e-8, tt_random<double>(f.modes, 2, 5),
                                                     10, 200, &rep);
  CHECK(rep.converged);
  CHECK(x.maxRank() == 1);
  CHECK(x.cores.front().rl == 2);
  CHECK(tt_norm(x) == 0.0);
}

TEST_CASE("evaluator faults and bad arguments are reported")
{
  NanEvaluator f;
  CHECK_THROWS_WITH_AS(block_cross_approximate(f, 1e-8, tt_random<double>(f.modes, 2, 5)),
                       doctest::Contains("non-finite"), std::runtime_error);

  ShiftedHilbert g;
  g.modes = {4, 4};
  CHECK_THROWS_AS(block_cross_approximate(g, 0.0, tt_random<double>(g.modes, 2, 5)),
                  std::invalid_argument);
  CHECK_THROWS_AS(block_cross_approximate(g, 1e-8, tt_random<double>({4, 5}, 2, 5)),
                  std::invalid_argument);
}
