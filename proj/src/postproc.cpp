#include "ttsg/postproc.hpp"

#include "ttsg/block_cross.hpp"
#include "ttsg/hermite.hpp"

namespace ttsg
{
  namespace
  {
    void require_field(const TTTensor<double>& u, const char* who)
    {
      u.validate();
      if (u.order() < 2)
        throw std::invalid_argument(std::string(who) + ": need a spatial mode plus at least one stochastic mode");
      if (u.cores.front().rl != 1 || u.cores.back().rr != 1)
        throw std::invalid_argument(std::string(who) + ": border ranks must be 1");
    }
  }

  Vec<double> tt_mean_field(const TTTensor<double>& u)
  {
    require_field(u, "tt_mean_field");
    Mat<double> acc = u.cores.back().slice(0);
    for (Index m = u.order() - 2; m >= 1; --m)
      acc = u.cores[std::size_t(m)].slice(0) * acc;
    return u.cores.front().data * acc;
  }

  Vec<double> tt_variance_field(const TTTensor<double>& u)
  {
    require_field(u, "tt_variance_field");
    TTTensor<double> s = u;
    for (Index m = 1; m < s.order(); ++m)
    {
      auto& c = s.cores[std::size_t(m)];
      if (c.n > kMaxHermiteOrder + 1)
        throw std::invalid_argument("tt_variance_field: stochastic mode size exceeds the factorial table");
      for (Index a = 0; a < c.n; ++a)
        c.slice(a) *= std::sqrt(factorial(int(a)));
    }
    Mat<double> W = Mat<double>::Identity(1, 1);
    for (Index m = s.order() - 1; m >= 1; --m)
    {
      const auto& c = s.cores[std::size_t(m)];
      Mat<double> Wn = Mat<double>::Zero(c.rl, c.rl);
      for (Index a = 0; a < c.n; ++a)
        Wn.noalias() += c.slice(a) * W * c.slice(a).transpose();
      W.swap(Wn);
    }
    const auto& d = s.cores.front().data;
    const Vec<double> mean = tt_mean_field(u);
    Vec<double> var = (d.cwiseProduct(d * W)).rowwise().sum() - mean.cwiseProduct(mean);
    return var.cwiseMax(0.0);
  }

  Vec<double> tt_eval_hermite(const TTTensor<double>& u, const Vec<double>& y)
  {
    require_field(u, "tt_eval_hermite");
    if (y.size() != u.order() - 1)
      throw std::invalid_argument("tt_eval_hermite: one sample entry per stochastic mode required");
    Mat<double> acc = Mat<double>::Ones(1, 1);
    for (Index m = u.order() - 1; m >= 1; --m)
    {
      const auto& c = u.cores[std::size_t(m)];
      const Vec<double> h = hermite_all(int(c.n) - 1, y[m - 1]);
      Mat<double> B = Mat<double>::Zero(c.rl, c.rr);
      for (Index a = 0; a < c.n; ++a)
        B += h[a] * c.slice(a);
      acc = B * acc;
    }
    return u.cores.front().data * acc;
  }

  namespace
  {
    //! Weighted indicator 1{g(theta) > t} * w(theta) of a chaos expansion
    //! restricted to one node, tabulated on the tensor Gauss-Hermite grid; w
    //! is the product of the normalized quadrature weights, so the total
    //! probability is the plain sum of all entries.  Weighting flattens the
    //! tails, which keeps the ranks of the cross approximation low when the
    //! event is rare.  The grid values of g form a TT of the same ranks as
    //! the expansion, so blocks reduce to cached prefix and suffix chain
    //! products around one free mode.
    class WeightedIndicatorEvaluator final : public BlockEvaluator
    {
    public:
      WeightedIndicatorEvaluator(const TTTensor<double>& u, Index node, double threshold,
                                 int n_quad)
          : threshold_(threshold)
      {
        const Index Ms = u.order() - 1;
        modes_.assign(std::size_t(Ms), Index(n_quad));
        const QuadratureRule rule = gauss_hermite_rule(n_quad);
        weights_ = rule.weights;
        grid_.cores.reserve(std::size_t(Ms));
        const Mat<double> row = u.cores.front().data.row(node);
        for (Index m = 1; m <= Ms; ++m)
        {
          const auto& c = u.cores[std::size_t(m)];
          Mat<double> H(n_quad, c.n);
          for (int q = 0; q < n_quad; ++q)
            H.row(q) = hermite_all(int(c.n) - 1, rule.nodes[q]).transpose();
          TTCore<double> g(m == 1 ? 1 : c.rl, Index(n_quad), c.rr);
          for (Index q = 0; q < Index(n_quad); ++q)
          {
            Mat<double> B = Mat<double>::Zero(c.rl, c.rr);
            for (Index a = 0; a < c.n; ++a)
              B += H(q, a) * c.slice(a);
            g.slice(q) = (m == 1) ? Mat<double>(row * B) : B;
          }
          grid_.cores.push_back(std::move(g));
        }
      }

      const std::vector<Index>& modeSizes() const override { return modes_; }
      Index blockCount() const override { return 1; }

    protected:
      Vec<double> evaluateIndex(const std::vector<Index>& alpha) const override
      {
        double w = 1.0;
        for (std::size_t k = 0; k < alpha.size(); ++k)
          w *= weights_[alpha[k]];
        Vec<double> v(1);
        v[0] = tt_entry1(grid_, alpha) > threshold_ ? w : 0.0;
        return v;
      }

      Mat<double> evaluateBlock(const std::vector<std::vector<Index>>& prefixes, Index m,
                                const std::vector<std::vector<Index>>& suffixes) const override
      {
        const Index nI = Index(prefixes.size());
        const Index nJ = Index(suffixes.size());
        const Index n = modes_[std::size_t(m)];
        const Index M = Index(modes_.size());
        std::vector<Mat<double>> pre(std::size_t(nI), Mat<double>::Ones(1, 1));
        Vec<double> wpre = Vec<double>::Ones(nI);
        for (Index i = 0; i < nI; ++i)
          for (Index k = 0; k < m; ++k)
          {
            const Index a = prefixes[std::size_t(i)][std::size_t(k)];
            pre[std::size_t(i)] = pre[std::size_t(i)] * grid_.cores[std::size_t(k)].slice(a);
            wpre[i] *= weights_[a];
          }
        std::vector<Mat<double>> suf(std::size_t(nJ), Mat<double>::Ones(1, 1));
        Vec<double> wsuf = Vec<double>::Ones(nJ);
        for (Index j = 0; j < nJ; ++j)
          for (Index k = M - 1; k > m; --k)
          {
            const Index a = suffixes[std::size_t(j)][std::size_t(k - m - 1)];
            suf[std::size_t(j)] = grid_.cores[std::size_t(k)].slice(a) * suf[std::size_t(j)];
            wsuf[j] *= weights_[a];
          }
        Mat<double> out(nI * n, nJ);
        for (Index i = 0; i < nI; ++i)
          for (Index a = 0; a < n; ++a)
          {
            const Mat<double> left = pre[std::size_t(i)] * grid_.cores[std::size_t(m)].slice(a);
            const double wa = wpre[i] * weights_[a];
            for (Index j = 0; j < nJ; ++j)
              out(i + nI * a, j) =
                  (left * suf[std::size_t(j)])(0, 0) > threshold_ ? wa * wsuf[j] : 0.0;
          }
        return out;
      }

    private:
      double threshold_;
      std::vector<Index> modes_;
      TTTensor<double> grid_;
      Vec<double> weights_;
    };
  }

  ExceedanceResult exceedance_probability(const TTTensor<double>& u, Index node,
                                          double threshold, const ExceedanceOptions& opts)
  {
    require_field(u, "exceedance_probability");
    if (node < 0 || node >= u.cores.front().n)
      throw std::invalid_argument("exceedance_probability: node out of range");
    if (opts.n_quad < 1)
      throw std::invalid_argument("exceedance_probability: need at least one quadrature point");

    if (opts.restarts < 1)
      throw std::invalid_argument("exceedance_probability: need at least one restart");

    const WeightedIndicatorEvaluator f(u, node, threshold, opts.n_quad);

    ExceedanceResult out;
    std::vector<double> probs;
    probs.reserve(std::size_t(opts.restarts));
    for (int run = 0; run < opts.restarts; ++run)
    {
      // a single-output cross cannot raise ranks above the guess, so the
      // guess carries the full budget
      const unsigned seed = opts.seed + unsigned(run) * 0x9e3779b9u;
      const TTTensor<double> guess = tt_random<double>(f.modeSizes(), opts.rank_max, seed);
      CrossReport rep;
      const TTTensor<double> chi =
          block_cross_approximate(f, opts.cross_tol, guess, opts.n_it_max, opts.rank_max, &rep);

      // the quadrature weights are baked into the evaluator, so the
      // probability is the sum of all entries
      Mat<double> acc = Mat<double>::Ones(1, 1);
      for (const auto& c : chi.cores)
      {
        Mat<double> B = Mat<double>::Zero(c.rl, c.rr);
        for (Index q = 0; q < c.n; ++q)
          B += c.slice(q);
        acc = acc * B;
      }
      probs.push_back(std::min(1.0, std::max(0.0, acc(0, 0))));
      out.max_rank = std::max(out.max_rank, rep.max_rank_seen);
      out.evaluations += rep.index_evals;
      out.iterations = std::max(out.iterations, rep.iterations);
    }

    std::sort(probs.begin(), probs.end());
    const std::size_t h = probs.size() / 2;
    out.probability =
        (probs.size() % 2 == 1) ? probs[h] : 0.5 * (probs[h - 1] + probs[h]);
    return out;
  }
}  // namespace ttsg
