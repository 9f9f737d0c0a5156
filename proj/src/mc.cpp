#include "ttsg/mc.hpp"

#include "ttsg/postproc.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace ttsg
{
  namespace
  {
    std::uint64_t splitmix64(std::uint64_t x)
    {
      x += 0x9e3779b97f4a7c15ULL;
      x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
      x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
      return x ^ (x >> 31);
    }

    //! uniform in (0,1); the offset keeps log() finite
    double uniform01(std::mt19937_64& rng)
    {
      return (double((rng() >> 11)) + 0.5) * 0x1p-53;
    }

    //! Repeated deterministic solves share the mesh geometry, the interior
    //! scatter pattern, the load vector and the factorization workspace, so
    //! those are set up once per reference run.  Accumulation mirrors
    //! assemble_weighted_stiffness term for term in the same order, which
    //! keeps every sample bit-identical to deterministic_solve.
    class SampleSolver
    {
    public:
      SampleSolver(const Mesh& mesh, const Vec<double>& f)
          : b_(assemble_load(mesh, f)), mesh_(mesh), u_(Vec<double>::Zero(mesh.numNodes())),
            K_(mesh.numInterior(), mesh.numInterior())
      {
        const Index T = mesh.tris.rows();
        tris_.reserve(std::size_t(T));
        for (Index t = 0; t < T; ++t)
        {
          Element e{};
          double x[3], y[3];
          for (int v = 0; v < 3; ++v)
          {
            e.node[v] = mesh.tris(t, v);
            e.pos[v] = mesh.interiorIndex[std::size_t(e.node[v])];
            x[v] = mesh.nodes(e.node[v], 0);
            y[v] = mesh.nodes(e.node[v], 1);
          }
          const double area =
              0.5 * ((x[1] - x[0]) * (y[2] - y[0]) - (x[2] - x[0]) * (y[1] - y[0]));
          e.denom = 4.0 * area;
          double b[3], c[3];
          for (int v = 0; v < 3; ++v)
          {
            const int v1 = (v + 1) % 3, v2 = (v + 2) % 3;
            b[v] = y[v1] - y[v2];
            c[v] = x[v2] - x[v1];
          }
          for (int a = 0; a < 3; ++a)
            for (int bb = 0; bb < 3; ++bb)
              e.grad[a][bb] = b[a] * b[bb] + c[a] * c[bb];
          tris_.push_back(e);
        }
      }

      //! solution over all nodes for coefficient node values kappa
      const Vec<double>& solve(const Vec<double>& kappa)
      {
        K_.setZero();
        for (const Element& e : tris_)
        {
          const double wt = (kappa[e.node[0]] + kappa[e.node[1]] + kappa[e.node[2]]) / 3.0;
          const double f = wt / e.denom;
          for (int a = 0; a < 3; ++a)
          {
            if (e.pos[a] < 0)
              continue;
            for (int b = 0; b < 3; ++b)
              if (e.pos[b] >= 0)
                K_(e.pos[a], e.pos[b]) += f * e.grad[a][b];
          }
        }
        llt_.compute(K_);
        if (llt_.info() != Eigen::Success)
          throw std::runtime_error("SampleSolver: sample stiffness is not positive definite");
        // one-column matrix rhs so the solve kernel matches solve_spd exactly
        const Mat<double> x = llt_.solve(b_);
        for (Index a = 0; a < mesh_.numInterior(); ++a)
          u_[mesh_.interior[std::size_t(a)]] = x(a, 0);
        return u_;
      }

    private:
      struct Element
      {
        Index node[3];       //!< mesh node ids
        Index pos[3];        //!< interior positions, -1 on the boundary
        double denom;        //!< 4 * area
        double grad[3][3];   //!< b_a b_b + c_a c_b
      };

      Mat<double> b_;  //!< one column; a matrix to match the solve_spd kernel
      const Mesh& mesh_;
      Vec<double> u_;
      Mat<double> K_;
      std::vector<Element> tris_;
      Eigen::LLT<Mat<double>> llt_;
    };
  }  // namespace

  Vec<double> gaussian_germ(Index M, std::uint64_t seed, long long z)
  {
    if (M < 0)
      throw std::invalid_argument("gaussian_germ: negative dimension");
    // Box-Muller instead of std::normal_distribution: the standard does not
    // pin the latter's algorithm, and sample streams must be reproducible
    std::mt19937_64 rng(splitmix64(seed ^ splitmix64(std::uint64_t(z))));
    Vec<double> theta(M);
    for (Index m = 0; m < M; m += 2)
    {
      const double u1 = uniform01(rng);
      const double u2 = uniform01(rng);
      const double r = std::sqrt(-2.0 * std::log(u1));
      theta[m] = r * std::cos(2.0 * M_PI * u2);
      if (m + 1 < M)
        theta[m + 1] = r * std::sin(2.0 * M_PI * u2);
    }
    return theta;
  }

  Vec<double> field_sample(const PCEProblem& problem,
                           const std::function<double(double)>& phi, const Vec<double>& theta)
  {
    if (theta.size() != problem.g.cols())
      throw std::invalid_argument("field_sample: germ dimension mismatch");
    Vec<double> kappa = problem.g * theta;
    for (Index i = 0; i < kappa.size(); ++i)
      kappa[i] = phi(kappa[i]);
    return kappa;
  }

  McReference mc_reference(const Mesh& mesh, const PCEProblem& problem,
                           const std::function<double(double)>& phi, const Vec<double>& f,
                           Index probe_node, double threshold, const McOptions& opts)
  {
    if (opts.n_samples < 1)
      throw std::invalid_argument("mc_reference: need at least one sample");
    if (probe_node < 0 || probe_node >= mesh.numNodes())
      throw std::invalid_argument("mc_reference: probe node out of range");
    if (f.size() != mesh.numNodes())
      throw std::invalid_argument("mc_reference: load vector size mismatch");

    const Index N = mesh.numNodes();
    McReference out;
    out.mean = Vec<double>::Zero(N);
    Vec<double> m2 = Vec<double>::Zero(N);
    Vec<double> delta(N);
    SampleSolver solver(mesh, f);
    long long hits = 0;
    for (long long z = 0; z < opts.n_samples; ++z)
    {
      const Vec<double> theta = gaussian_germ(problem.M, opts.seed, z);
      const Vec<double> kappa = field_sample(problem, phi, theta);
      const Vec<double>& u = solver.solve(kappa);
      delta = u - out.mean;
      out.mean += delta / double(z + 1);
      m2 += delta.cwiseProduct(u - out.mean);
      if (u[probe_node] > threshold)
        ++hits;
    }
    out.variance = m2 / double(std::max<long long>(1, opts.n_samples - 1));
    out.p_star = double(hits) / double(opts.n_samples);
    out.n_samples = opts.n_samples;
    return out;
  }

  SurrogateErrors surrogate_errors(const Mesh& mesh, const PCEProblem& problem,
                                   const std::function<double(double)>& phi,
                                   const Vec<double>& f, const TTTensor<double>& kappa_tt,
                                   const TTTensor<double>& u_tt, const McOptions& opts)
  {
    if (opts.n_samples < 1)
      throw std::invalid_argument("surrogate_errors: need at least one sample");
    if (kappa_tt.cores.front().n != mesh.numNodes())
      throw std::invalid_argument("surrogate_errors: coefficient tensor is not on all nodes");
    if (u_tt.cores.front().n != mesh.numInterior())
      throw std::invalid_argument("surrogate_errors: solution tensor is not on interior nodes");
    if (f.size() != mesh.numNodes())
      throw std::invalid_argument("surrogate_errors: load vector size mismatch");

    const Index Ni = mesh.numInterior();
    SurrogateErrors out;
    SampleSolver solver(mesh, f);
    Vec<double> ui(Ni);
    for (long long z = 0; z < opts.n_samples; ++z)
    {
      const Vec<double> theta = gaussian_germ(problem.M, opts.seed, z);
      const Vec<double> kappa = field_sample(problem, phi, theta);
      const Vec<double> kt = tt_eval_hermite(kappa_tt, theta);
      out.e_kappa += (kt - kappa).norm() / kappa.norm();

      const Vec<double>& u = solver.solve(kappa);
      for (Index i = 0; i < Ni; ++i)
        ui[i] = u[mesh.interior[std::size_t(i)]];
      const Vec<double> ut = tt_eval_hermite(u_tt, theta);
      out.e_u += (ut - ui).norm() / ui.norm();
    }
    out.e_kappa /= double(opts.n_samples);
    out.e_u /= double(opts.n_samples);
    out.n_samples = opts.n_samples;
    return out;
  }

}  // namespace ttsg
