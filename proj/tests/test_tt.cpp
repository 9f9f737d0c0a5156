#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ttsg/tt.hpp"
#include "ttsg/tt_matrix.hpp"

#include <cstdio>

using namespace ttsg;

namespace
{
  // Independent contraction of a TT into the full array with explicit loops
  // (no tt_entry): layout full[s0 + r0*flat + r0*nidx*sM] where flat runs over
  // the mode indices with the first mode fastest and nidx = prod n_m.
  std::vector<double> materialize(const TTTensor<double>& x)
  {
    x.validate();
    const auto dims = x.dims();
    const Index r0 = x.cores.front().rl;
    const Index rM = x.cores.back().rr;
    Index nidx = 1;
    for (Index n : dims)
      nidx *= n;
    std::vector<double> full(std::size_t(r0 * nidx * rM));

    std::vector<Index> idx(dims.size(), 0);
    for (Index flat = 0; flat < nidx; ++flat)
    {
      Mat<double> acc = Mat<double>::Identity(r0, r0);
      for (std::size_t m = 0; m < x.cores.size(); ++m)
      {
        const auto& c = x.cores[m];
        Mat<double> next = Mat<double>::Zero(r0, c.rr);
        for (Index a = 0; a < c.rl; ++a)
          for (Index b = 0; b < c.rr; ++b)
            for (Index s = 0; s < r0; ++s)
              next(s, b) += acc(s, a) * c.data(a + c.rl * idx[m], b);
        acc = next;
      }
      for (Index s0 = 0; s0 < r0; ++s0)
        for (Index sM = 0; sM < rM; ++sM)
          full[std::size_t(s0 + r0 * flat + r0 * nidx * sM)] = acc(s0, sM);

      for (std::size_t m = 0; m < idx.size(); ++m)
      {
        if (++idx[m] < dims[m])
          break;
        idx[m] = 0;
      }
    }
    return full;
  }

  double max_rel_err(const std::vector<double>& a, const std::vector<double>& b)
  {
    REQUIRE(a.size() == b.size());
    double scale = 0;
    for (double v : a)
      scale = std::max(scale, std::abs(v));
    double err = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
      err = std::max(err, std::abs(a[i] - b[i]));
    return err / std::max(scale, 1e-300);
  }
}

TEST_CASE("tt_entry agrees with an independent full contraction")
{
  const auto x = tt_random<double>({5, 5, 5, 5}, 4, 42);
  const auto full = materialize(x);
  Index flat = 0;
  for (Index i3 = 0; i3 < 5; ++i3)
    for (Index i2 = 0; i2 < 5; ++i2)
      for (Index i1 = 0; i1 < 5; ++i1)
        for (Index i0 = 0; i0 < 5; ++i0)
          CHECK(tt_entry1(x, {i0, i1, i2, i3}) ==
                doctest::Approx(full[std::size_t(flat++)]).epsilon(1e-12));
}

TEST_CASE("tt_add matches the dense sum at machine precision")
{
  const auto x = tt_random<double>({5, 5, 5, 5}, 4, 1);
  const auto y = tt_random<double>({5, 5, 5, 5}, 3, 2);
  const auto z = tt_add(x, y, 1.0, 2.0);
  const auto fx = materialize(x);
  const auto fy = materialize(y);
  const auto fz = materialize(z);
  std::vector<double> ref(fx.size());
  for (std::size_t i = 0; i < fx.size(); ++i)
    ref[i] = fx[i] + 2.0 * fy[i];
  CHECK(max_rel_err(ref, fz) < 1e-13);

  const auto rz = z.ranks();
  CHECK(rz[1] == x.ranks()[1] + y.ranks()[1]);
}

TEST_CASE("tt_add with border ranks keeps each channel")
{
  const auto x = tt_random<double>({4, 3, 4}, 3, 7, 2, 1);
  const auto y = tt_random<double>({4, 3, 4}, 2, 8, 2, 1);
  const auto z = tt_add(x, y);
  const auto fx = materialize(x);
  const auto fy = materialize(y);
  const auto fz = materialize(z);
  std::vector<double> ref(fx.size());
  for (std::size_t i = 0; i < fx.size(); ++i)
    ref[i] = fx[i] + fy[i];
  CHECK(max_rel_err(ref, fz) < 1e-13);
}

TEST_CASE("tt_dot and tt_norm agree with brute force")
{
  const auto x = tt_random<double>({4, 3, 5}, 3, 11, 2, 1);
  const auto y = tt_random<double>({4, 3, 5}, 2, 12, 3, 1);
  const auto fx = materialize(x);
  const auto fy = materialize(y);
  const Mat<double> C = tt_dot(x, y);
  REQUIRE(C.rows() == 2);
  REQUIRE(C.cols() == 3);
  const std::size_t nidx = fx.size() / 2;
  for (Index s0 = 0; s0 < 2; ++s0)
    for (Index t0 = 0; t0 < 3; ++t0)
    {
      double ref = 0;
      for (std::size_t i = 0; i < nidx; ++i)
        ref += fx[std::size_t(s0) + 2 * i] * fy[std::size_t(t0) + 3 * i];
      CHECK(C(s0, t0) == doctest::Approx(ref).epsilon(1e-12));
    }

  double n2 = 0;
  for (double v : fx)
    n2 += v * v;
  CHECK(tt_norm(x) == doctest::Approx(std::sqrt(n2)).epsilon(1e-12));
}

TEST_CASE("tt_round respects the tolerance bound and recompresses exactly")
{
  const auto x = tt_random<double>({6, 6, 6, 6}, 5, 21);
  auto noisy = tt_add(x, tt_random<double>({6, 6, 6, 6}, 3, 22), 1.0, 1e-9);

  auto rounded = noisy;
  tt_round(rounded, 1e-8);
  const auto diff = tt_add(rounded, noisy, 1.0, -1.0);
  CHECK(tt_norm(diff) <= 1e-8 * tt_norm(noisy) * 1.0001);
  CHECK(tt_norm(rounded) <= (1.0 + 1e-8) * tt_norm(noisy));

  // doubling a tensor against itself must recompress to the original ranks
  auto twice = tt_add(x, x);
  tt_round(twice, 1e-12);
  CHECK(twice.maxRank() <= x.maxRank());
  const auto dd = tt_add(twice, x, 1.0, -2.0);
  CHECK(tt_norm(dd) <= 1e-10 * tt_norm(x));
}

TEST_CASE("tt_round keeps border ranks and respects rank_max")
{
  auto x = tt_random<double>({4, 4, 4}, 6, 31, 3, 1);
  tt_round(x, 1e-13, 2);
  const auto r = x.ranks();
  CHECK(r.front() == 3);
  CHECK(r.back() == 1);
  for (std::size_t m = 1; m + 1 < r.size(); ++m)
    CHECK(r[m] <= 2);
}

TEST_CASE("tt_contract_modes equals the weighted brute-force sum")
{
  const auto x = tt_random<double>({3, 4, 5}, 3, 41, 2, 1);
  std::vector<Vec<double>> w;
  std::mt19937_64 eng(5);
  for (Index n : x.dims())
  {
    Vec<double> v(n);
    for (Index i = 0; i < n; ++i)
      v[i] = double(eng() % 1000) / 1000.0 - 0.5;
    w.push_back(v);
  }
  const Mat<double> got = tt_contract_modes(x, w);
  const auto fx = materialize(x);
  Vec<double> ref = Vec<double>::Zero(2);
  Index flat = 0;
  for (Index i2 = 0; i2 < 5; ++i2)
    for (Index i1 = 0; i1 < 4; ++i1)
      for (Index i0 = 0; i0 < 3; ++i0)
      {
        const double c = w[0][i0] * w[1][i1] * w[2][i2];
        for (Index s0 = 0; s0 < 2; ++s0)
          ref[s0] += c * fx[std::size_t(s0 + 2 * flat)];
        ++flat;
      }
  CHECK((got.col(0) - ref).norm() < 1e-12 * ref.norm());
}

TEST_CASE("tt_mode_head restricts every mode")
{
  const auto x = tt_random<double>({5, 5, 5}, 3, 51);
  const auto y = tt_mode_head(x, {3, 3, 3});
  for (Index i0 = 0; i0 < 3; ++i0)
    for (Index i1 = 0; i1 < 3; ++i1)
      for (Index i2 = 0; i2 < 3; ++i2)
        CHECK(tt_entry1(y, {i0, i1, i2}) ==
              doctest::Approx(tt_entry1(x, {i0, i1, i2})).epsilon(1e-14));
}

TEST_CASE("tt_stack concatenates along the left border")
{
  const auto a = tt_random<double>({3, 4}, 2, 61);
  const auto b = tt_random<double>({3, 4}, 3, 62);
  const auto s = tt_stack<double>({a, b});
  CHECK(s.cores.front().rl == 2);
  for (Index i0 = 0; i0 < 3; ++i0)
    for (Index i1 = 0; i1 < 4; ++i1)
    {
      const Mat<double> e = tt_entry(s, {i0, i1});
      CHECK(e(0, 0) == doctest::Approx(tt_entry1(a, {i0, i1})).epsilon(1e-13));
      CHECK(e(1, 0) == doctest::Approx(tt_entry1(b, {i0, i1})).epsilon(1e-13));
    }
}

TEST_CASE("serialization round trip is bit exact")
{
  const auto x = tt_random<double>({4, 3, 5}, 3, 71, 2, 1);
  const std::string path = "tt_roundtrip.tmp";
  tt_save(x, path);
  const auto y = tt_load<double>(path);
  std::remove(path.c_str());
  REQUIRE(y.dims() == x.dims());
  REQUIRE(y.ranks() == x.ranks());
  for (std::size_t m = 0; m < x.cores.size(); ++m)
    CHECK((x.cores[m].data.array() == y.cores[m].data.array()).all());
}

TEST_CASE("validate rejects inconsistent chains")
{
  auto x = tt_random<double>({3, 3}, 2, 81);
  x.cores[1].rl = 3;
  x.cores[1].data = Mat<double>::Zero(9, 1);
  CHECK_THROWS_AS(x.validate(), std::invalid_argument);
}

TEST_CASE("TT operator entries and application match dense algebra")
{
  // small random operator: modes (3,2,4) square
  std::mt19937_64 eng(91);
  auto rnd = [&eng]() { return double(eng() % 2000) / 1000.0 - 1.0; };
  TTMatrix<double> A;
  std::vector<Index> dims = {3, 2, 4};
  std::vector<Index> rk = {1, 3, 2, 1};
  for (std::size_t m = 0; m < dims.size(); ++m)
  {
    TTMatrixCore<double> c(rk[m], dims[m], dims[m], rk[m + 1]);
    for (Index i = 0; i < c.data.rows(); ++i)
      for (Index j = 0; j < c.data.cols(); ++j)
        c.data(i, j) = rnd();
    A.cores.push_back(std::move(c));
  }
  A.validate();

  const auto x = tt_random<double>({3, 2, 4}, 2, 92);
  const auto y = ttm_apply(A, x);
  y.validate();

  // dense reference: loop over all row/col indices
  for (Index i0 = 0; i0 < 3; ++i0)
    for (Index i1 = 0; i1 < 2; ++i1)
      for (Index i2 = 0; i2 < 4; ++i2)
      {
        double ref = 0;
        for (Index j0 = 0; j0 < 3; ++j0)
          for (Index j1 = 0; j1 < 2; ++j1)
            for (Index j2 = 0; j2 < 4; ++j2)
              ref += ttm_entry(A, {i0, i1, i2}, {j0, j1, j2})(0, 0) *
                     tt_entry1(x, {j0, j1, j2});
        CHECK(tt_entry1(y, {i0, i1, i2}) == doctest::Approx(ref).epsilon(1e-11));
      }
}
