//! @file experiment.cpp
//! Batch experiment driver: build the chaos expansion of the coefficient
//! field, assemble and solve the stochastic Galerkin system in TT format,
//! compute statistics, and verify against Monte Carlo reference solves.
//! Emits one CSV row per run plus TT artifacts and convergence logs.

#include "CLI11.hpp"

#include "ttsg/distributions.hpp"
#include "ttsg/galerkin.hpp"
#include "ttsg/mc.hpp"
#include "ttsg/postproc.hpp"
#include "ttsg/solver.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace
{
  using namespace ttsg;

  struct ExperimentConfig
  {
    std::string distribution = "lognormal";
    long long M = 20;
    int p = 3;
    double lc = 1.0;
    double sigma = 0.5;
    int R = 1;
    double eps = 1e-4;
    double tau = 1.2;
    long long nmc = 10000;
    std::uint64_t seed = 1;
    std::string out = ".";
    bool verbose = false;
    bool reuse_kappa = false;
    bool reuse_u = false;
  };

  struct StageError : std::runtime_error
  {
    StageError(const std::string& stage, const std::string& what)
        : std::runtime_error(stage + ": " + what)
    {
    }
  };

  double seconds_since(std::chrono::steady_clock::time_point& t0)
  {
    const auto t1 = std::chrono::steady_clock::now();
    const double dt = std::chrono::duration<double>(t1 - t0).count();
    t0 = t1;
    return dt;
  }

  Index max_rank(const TTTensor<double>& x)
  {
    Index r = 1;
    for (const auto& c : x.cores)
      r = std::max(r, c.rr);
    return r;
  }

  std::string fmt(double v)
  {
    std::ostringstream os;
    os << std::setprecision(10) << v;
    return os.str();
  }

  //! one result row; cells without a value stay empty in the CSV
  struct Row
  {
    std::string parameter, value;
    std::string t_kappa, t_op, t_u, t_stats, t_mc;
    std::string r_kappa, r_u, r_chi;
    std::string e_kappa, e_u, e_mean, e_var;
    std::string p_tt, p_mc, e_p;
    std::string sweeps, residual, status;

    std::string csv() const
    {
      std::string s = status;
      for (char& c : s)
        if (c == ',' || c == '\n')
          c = ';';
      std::ostringstream os;
      os << parameter << ',' << value << ',' << t_kappa << ',' << t_op << ',' << t_u << ','
         << t_stats << ',' << t_mc << ',' << r_kappa << ',' << r_u << ',' << r_chi << ','
         << e_kappa << ',' << e_u << ',' << e_mean << ',' << e_var << ',' << p_tt << ','
         << p_mc << ',' << e_p << ',' << sweeps << ',' << residual << ',' << s;
      return os.str();
    }
    static std::string header()
    {
      return "parameter,value,T_kappa[s],T_op[s],T_u[s],T_stats[s],T_mc[s],"
             "r_kappa[-],r_u[-],r_chi[-],E_kappa[-],E_u[-],E_mean[-],E_var[-],"
             "P[-],P_mc[-],E_P[-],solver_sweeps[-],solver_residual[-],status";
    }
  };

  std::function<double(double)> make_transform(const ExperimentConfig& cfg)
  {
    if (cfg.distribution == "lognormal")
      return lognormal_phi(cfg.sigma);
    if (cfg.distribution == "beta")
      return beta_phi();
    throw StageError("config", "unknown distribution '" + cfg.distribution + "'");
  }

  //! full pipeline for one configuration; suffix names the TT artifacts.
  //! Returns false when the Galerkin solver did not reach its tolerance.
  bool run_experiment(const ExperimentConfig& cfg, const std::string& suffix, Row& row,
                      std::ostream& cross_log, std::ostream& solver_log)
  {
    namespace fs = std::filesystem;
    const fs::path outdir(cfg.out);
    const std::string kappa_path = (outdir / ("kappa" + suffix + ".tt")).string();
    const std::string u_path = (outdir / ("u" + suffix + ".tt")).string();

    auto clock = std::chrono::steady_clock::now();

    Mesh mesh;
    PCEProblem prob;
    try
    {
      mesh = build_lshape_mesh(cfg.R);
      prob = build_pce_problem(mesh, CovarianceModel{cfg.lc}, make_transform(cfg),
                               Index(cfg.M), 2 * cfg.p, 2.0 * cfg.eps);
    }
    catch (const std::exception& e)
    {
      throw StageError("setup", e.what());
    }

    KappaExpansion kappa;
    try
    {
      clock = std::chrono::steady_clock::now();
      if (cfg.reuse_kappa && fs::exists(kappa_path))
      {
        kappa.field = tt_load<double>(kappa_path);
        if (kappa.field.cores.front().n != mesh.numNodes() ||
            kappa.field.order() != Index(cfg.M) + 1)
          throw std::runtime_error("cached tensor does not match the configuration");
      }
      else
      {
        cross_log << "# coefficient cross" << suffix << '\n';
        kappa = build_kappa_tt(prob, cfg.eps, 200, &cross_log);
        tt_save(kappa.field, kappa_path);
      }
      row.t_kappa = fmt(seconds_since(clock));
      row.r_kappa = std::to_string(max_rank(kappa.field));
      if (cfg.verbose)
        std::cout << "kappa: rank " << row.r_kappa << " (" << row.t_kappa << " s)\n";
    }
    catch (const std::exception& e)
    {
      throw StageError("kappa", e.what());
    }

    TTMatrix<double> A;
    Vec<double> f0;
    TTTensor<double> f_tt;
    try
    {
      A = assemble_operator_tt(mesh, prob, kappa, cfg.p);
      f0 = assemble_load(mesh, Vec<double>::Ones(mesh.numNodes()));
      f_tt = assemble_rhs_tt(f0, Index(cfg.M), cfg.p);
      row.t_op = fmt(seconds_since(clock));
    }
    catch (const std::exception& e)
    {
      throw StageError("operator", e.what());
    }

    TTTensor<double> u;
    bool converged = true;
    try
    {
      if (cfg.reuse_u && fs::exists(u_path))
      {
        u = tt_load<double>(u_path);
        if (u.cores.front().n != mesh.numInterior() || u.order() != Index(cfg.M) + 1)
          throw std::runtime_error("cached tensor does not match the configuration");
        row.residual = fmt(ttm_residual_norm(A, u, f_tt) / tt_norm_orth(f_tt));
      }
      else
      {
        const Mat<double> K0 = assemble_weighted_stiffness(mesh, prob.kappa_bar);
        const TTTensor<double> x0 =
            assemble_rhs_tt(solve_spd<double>(K0, f0), Index(cfg.M), cfg.p);
        SolveOptions sopt;
        sopt.tol_rel = cfg.eps;
        solver_log << "# galerkin solve" << suffix << '\n';
        sopt.trace = &solver_log;
        SolveReport srep;
        u = als_solve(A, f_tt, x0, sopt, &srep);
        converged = srep.converged;
        row.sweeps = std::to_string(srep.sweeps);
        row.residual = fmt(srep.residual_rel);
        tt_save(u, u_path);
      }
      row.t_u = fmt(seconds_since(clock));
      row.r_u = std::to_string(max_rank(u));
      if (cfg.verbose)
        std::cout << "solve: rank " << row.r_u << ", residual " << row.residual << " ("
                  << row.t_u << " s)\n";
    }
    catch (const std::exception& e)
    {
      throw StageError("solve", e.what());
    }

    Vec<double> mean, var;
    Index imax = 0;
    double threshold = 0.0;
    double p_tt = 0.0;
    try
    {
      mean = tt_mean_field(u);
      var = tt_variance_field(u);
      mean.maxCoeff(&imax);
      threshold = cfg.tau * mean[imax];
      ExceedanceOptions eopt;
      eopt.cross_tol = std::min(cfg.eps, 1e-5);
      eopt.seed = unsigned(cfg.seed);
      const ExceedanceResult tail = exceedance_probability(u, imax, threshold, eopt);
      p_tt = tail.probability;
      row.p_tt = fmt(p_tt);
      row.r_chi = std::to_string(tail.max_rank);
      row.t_stats = fmt(seconds_since(clock));
      if (cfg.verbose)
        std::cout << "statistics: P(u > " << threshold << ") = " << row.p_tt
                  << ", indicator rank " << row.r_chi << '\n';
    }
    catch (const std::exception& e)
    {
      throw StageError("statistics", e.what());
    }

    if (cfg.nmc > 0)
    {
      try
      {
        McOptions mopt;
        mopt.n_samples = cfg.nmc;
        mopt.seed = cfg.seed;
        const auto phi = make_transform(cfg);
        const Vec<double> ones = Vec<double>::Ones(mesh.numNodes());
        const SurrogateErrors err =
            surrogate_errors(mesh, prob, phi, ones, kappa.field, u, mopt);
        row.e_kappa = fmt(err.e_kappa);
        row.e_u = fmt(err.e_u);

        const McReference ref = mc_reference(mesh, prob, phi, ones,
                                             mesh.interior[std::size_t(imax)], threshold, mopt);
        const Index Ni = mesh.numInterior();
        Vec<double> mc_mean(Ni), mc_var(Ni);
        for (Index i = 0; i < Ni; ++i)
        {
          mc_mean[i] = ref.mean[mesh.interior[std::size_t(i)]];
          mc_var[i] = ref.variance[mesh.interior[std::size_t(i)]];
        }
        row.e_mean = fmt((mean - mc_mean).norm() / mc_mean.norm());
        row.e_var = fmt((var - mc_var).norm() / mc_var.norm());
        row.p_mc = fmt(ref.p_star);
        if (ref.p_star > 0.0)
          row.e_p = fmt(std::abs(p_tt - ref.p_star) / ref.p_star);
        row.t_mc = fmt(seconds_since(clock));
        if (cfg.verbose)
          std::cout << "monte carlo: E_kappa " << row.e_kappa << ", E_u " << row.e_u
                    << ", P* " << row.p_mc << " (" << row.t_mc << " s)\n";
      }
      catch (const std::exception& e)
      {
        throw StageError("monte-carlo", e.what());
      }
    }

    row.status = converged ? "ok" : "not-converged";
    return converged;
  }

  //! apply one swept value onto a copy of the base configuration
  ExperimentConfig with_value(const ExperimentConfig& base, const std::string& name, double v)
  {
    ExperimentConfig cfg = base;
    if (name == "p")
      cfg.p = int(std::llround(v));
    else if (name == "M")
      cfg.M = std::llround(v);
    else if (name == "lc")
      cfg.lc = v;
    else if (name == "sigma")
      cfg.sigma = v;
    else if (name == "R")
      cfg.R = int(std::llround(v));
    else
      throw StageError("sweep", "unknown parameter '" + name + "' (use p, M, lc, sigma, R)");
    return cfg;
  }
}  // namespace

int main(int argc, char** argv)
{
  ExperimentConfig cfg;
  std::string sweep_arg;

  CLI::App app{"Stochastic Galerkin experiments in tensor-train format"};
  app.set_config("--config", "", "flat key=value configuration file");
  app.add_option("--distribution", cfg.distribution, "target marginal: lognormal or beta")
      ->capture_default_str();
  app.add_option("--M", cfg.M, "number of KLE terms")->capture_default_str();
  app.add_option("--p", cfg.p, "chaos polynomial order")->capture_default_str();
  app.add_option("--lc", cfg.lc, "covariance length scale")->capture_default_str();
  app.add_option("--sigma", cfg.sigma, "log-normal scale parameter")->capture_default_str();
  app.add_option("--R", cfg.R, "mesh refinement level")->capture_default_str();
  app.add_option("--eps", cfg.eps, "global tolerance for cross and solver")
      ->capture_default_str();
  app.add_option("--tau", cfg.tau, "exceedance threshold factor")->capture_default_str();
  app.add_option("--nmc", cfg.nmc, "Monte Carlo samples; 0 skips the reference")
      ->capture_default_str();
  app.add_option("--seed", cfg.seed, "random seed for sampling stages")->capture_default_str();
  app.add_option("--out", cfg.out, "output directory")->capture_default_str();
  app.add_option("--sweep", sweep_arg, "parameter sweep, e.g. p=1,2,3 or M=10,15,20");
  app.add_flag("--verbose", cfg.verbose, "print per-stage progress");
  app.add_flag("--reuse-kappa", cfg.reuse_kappa, "load kappa.tt from the output directory");
  app.add_flag("--reuse-u", cfg.reuse_u, "load u.tt from the output directory");
  CLI11_PARSE(app, argc, argv);

  try
  {
    std::filesystem::create_directories(cfg.out);
    const auto path = [&cfg](const char* name)
    { return (std::filesystem::path(cfg.out) / name).string(); };
    std::ofstream cross_log(path("cross.log"));
    std::ofstream solver_log(path("solver.log"));
    std::ofstream csv(path("results.csv"));
    if (!cross_log || !solver_log || !csv)
      throw StageError("output", "cannot write into '" + cfg.out + "'");
    csv << Row::header() << '\n';

    bool all_ok = true;
    if (sweep_arg.empty())
    {
      Row row;
      row.parameter = "-";
      row.value = "-";
      try
      {
        all_ok = run_experiment(cfg, "", row, cross_log, solver_log);
      }
      catch (const StageError& e)
      {
        row.status = std::string("error ") + e.what();
        all_ok = false;
      }
      csv << row.csv() << '\n';
      if (!all_ok)
        std::cerr << "run failed: " << row.status << '\n';
    }
    else
    {
      const auto eq = sweep_arg.find('=');
      if (eq == std::string::npos)
        throw StageError("sweep", "expected NAME=v1,v2,...");
      const std::string name = sweep_arg.substr(0, eq);
      std::vector<double> values;
      std::stringstream vs(sweep_arg.substr(eq + 1));
      for (std::string tok; std::getline(vs, tok, ',');)
        values.push_back(std::stod(tok));
      for (const double v : values)
      {
        Row row;
        row.parameter = name;
        row.value = fmt(v);
        try
        {
          const ExperimentConfig rcfg = with_value(cfg, name, v);
          const std::string suffix = "_" + name + row.value;
          if (!run_experiment(rcfg, suffix, row, cross_log, solver_log))
            all_ok = false;
        }
        catch (const StageError& e)
        {
          row.status = std::string("error ") + e.what();
          all_ok = false;
          std::cerr << "sweep " << name << "=" << row.value << " failed: " << e.what() << '\n';
        }
        csv << row.csv() << '\n';
        csv.flush();
      }
    }
    return all_ok ? 0 : 1;
  }
  catch (const std::exception& e)
  {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
