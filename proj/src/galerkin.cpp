#include "ttsg/galerkin.hpp"

#include "ttsg/hermite.hpp"

#include <stdexcept>

namespace ttsg
{
  std::vector<TTMatrixCore<double>> stochastic_cores(const TTTensor<double>& chain, int p)
  {
    if (p < 0)
      throw std::invalid_argument("stochastic_cores: order must be nonnegative");
    const Index n_chain = 2 * Index(p) + 1;
    std::vector<TTMatrixCore<double>> out;
    out.reserve(chain.cores.size());
    for (const auto& c : chain.cores)
    {
      if (c.n != n_chain)
        throw std::invalid_argument(
            "stochastic_cores: chain mode size must be 2p+1 for an exact contraction");
      TTMatrixCore<double> k(c.rl, p + 1, p + 1, c.rr);
      for (int a = 0; a <= p; ++a)
        for (int b = 0; b <= p; ++b)
        {
          auto acc = k.slice(a, b);
          // the triple product vanishes unless |a-b| <= nu <= a+b with a+b+nu even
          for (int nu = std::abs(a - b); nu <= a + b; nu += 2)
            acc += triple_delta(a, b, nu) * c.slice(nu);
        }
      out.push_back(std::move(k));
    }
    return out;
  }

  std::vector<Mat<double>> spatial_stiffness_blocks(const Mesh& mesh, const PCEProblem& problem)
  {
    std::vector<Mat<double>> blocks;
    blocks.reserve(std::size_t(problem.L()) + 1);
    blocks.push_back(assemble_weighted_stiffness(mesh, problem.kappa_bar));
    for (Index l = 0; l < problem.L(); ++l)
      blocks.push_back(assemble_weighted_stiffness(mesh, problem.v.col(l)));
    return blocks;
  }

  TTMatrix<double> assemble_operator_tt(const std::vector<Mat<double>>& spatial,
                                        const std::vector<TTMatrixCore<double>>& chain)
  {
    if (spatial.empty() || chain.empty())
      throw std::invalid_argument("assemble_operator_tt: empty inputs");
    const Index S = Index(spatial.size());
    const Index Ni = spatial[0].rows();
    for (const auto& K : spatial)
      if (K.rows() != Ni || K.cols() != Ni)
        throw std::invalid_argument("assemble_operator_tt: spatial blocks must be square and equal-sized");
    if (chain.front().rl != S)
      throw std::invalid_argument("assemble_operator_tt: rank mismatch at the spatial seam");

    TTMatrix<double> A;
    A.cores.reserve(chain.size() + 1);
    TTMatrixCore<double> c0(1, Ni, Ni, S);
    for (Index l = 0; l < S; ++l)
      c0.data.col(l) = Eigen::Map<const Vec<double>>(spatial[std::size_t(l)].data(), Ni * Ni);
    A.cores.push_back(std::move(c0));
    for (const auto& c : chain)
      A.cores.push_back(c);
    A.validate();
    return A;
  }

  TTMatrix<double> assemble_operator_tt(const Mesh& mesh, const PCEProblem& problem,
                                        const KappaExpansion& kappa, int p)
  {
    TTTensor<double> chain;
    chain.cores.assign(kappa.field.cores.begin() + 1, kappa.field.cores.end());
    return assemble_operator_tt(spatial_stiffness_blocks(mesh, problem),
                                stochastic_cores(chain, p));
  }

  TTTensor<double> assemble_rhs_tt(const Vec<double>& f0, Index M, int p)
  {
    if (f0.size() < 1 || M < 1 || p < 0)
      throw std::invalid_argument("assemble_rhs_tt: empty right-hand side");
    TTTensor<double> f;
    f.cores.reserve(std::size_t(M) + 1);
    TTCore<double> c0(1, f0.size(), 1);
    c0.data = f0;
    f.cores.push_back(std::move(c0));
    for (Index m = 0; m < M; ++m)
    {
      TTCore<double> c(1, p + 1, 1);
      c.data.setZero();
      c.data(0, 0) = 1.0;
      f.cores.push_back(std::move(c));
    }
    f.validate();
    return f;
  }

}  // namespace ttsg
