#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <svrn/svrn.hpp>

using namespace svrn;
using Json = nlohmann::ordered_json;

namespace {

struct ProblemFlags {
  Index n = 4096;
  Index d = 32;
  double kappa = 10.0;
  std::string coherence = "gaussian";
  std::string task = "lsq";
  double gamma = 1e-8;
  std::uint64_t seed = 0;
};

struct SolverFlags {
  std::vector<std::string> solvers;
  std::vector<std::uint64_t> seeds;
  std::optional<Index> m, t_max, k;
  std::optional<double> eta;
  std::optional<std::string> resample;
  std::optional<int> max_outer;
};

void add_problem_flags(CLI::App* app, ProblemFlags& p) {
  app->add_option("--n", p.n, "number of rows");
  app->add_option("--d", p.d, "dimension");
  app->add_option("--kappa", p.kappa, "condition number of A");
  app->add_option("--coherence", p.coherence, "gaussian or gamma");
  app->add_option("--task", p.task, "lsq or logistic");
  app->add_option("--gamma", p.gamma, "ridge parameter");
  app->add_option("--seed", p.seed, "generator seed");
}

void add_solver_flags(CLI::App* app, SolverFlags& s) {
  app->add_option("--m", s.m, "gradient batch size");
  app->add_option("--t-max", s.t_max, "inner steps per stage");
  app->add_option("--k", s.k, "Hessian sample size");
  app->add_option("--eta", s.eta, "SVRG step size");
  app->add_option("--resample", s.resample, "gradient batch policy")
      ->check(CLI::IsMember({"once", "stage", "step"}));
  app->add_option("--max-outer", s.max_outer, "outer iteration cap");
}

SyntheticSpec to_spec(const ProblemFlags& p) {
  SyntheticSpec spec;
  spec.n = p.n;
  spec.d = p.d;
  spec.kappa_A = p.kappa;
  spec.coherence = parse_coherence(p.coherence);
  spec.task = parse_task(p.task);
  spec.gamma = p.gamma;
  spec.seed = p.seed;
  spec.validate();
  return spec;
}

void apply_solver_flags(const SolverFlags& s, std::map<std::string, std::string>& opts) {
  const auto num = [](double v) {
    std::ostringstream o;
    o << std::setprecision(17) << v;
    return o.str();
  };
  if (s.m) opts["m"] = std::to_string(*s.m);
  if (s.t_max) opts["t_max"] = std::to_string(*s.t_max);
  if (s.k) opts["k"] = std::to_string(*s.k);
  if (s.eta) opts["eta"] = num(*s.eta);
  if (s.resample) opts["resample"] = *s.resample;
  if (s.max_outer) opts["max_outer"] = std::to_string(*s.max_outer);
}

int cmd_gen(const ProblemFlags& p, const std::string& out) {
  const SyntheticProblem prob = gen_synthetic(to_spec(p));
  write_csv(out, prob.instance);
  std::cerr << "wrote " << prob.instance.n() << " x " << prob.instance.d() << " problem to " << out << "\n";
  return 0;
}

int cmd_run(const std::string& config_path, const ProblemFlags& p, const CLI::App& sub, const SolverFlags& s,
            const std::string& out) {
  ExperimentConfig cfg;
  if (!config_path.empty()) {
    cfg = load_experiment_config(config_path);
  } else {
    cfg.synthetic = SyntheticSpec{};
  }
  const auto given = [&](const char* flag) { return sub.count(flag) > 0; };
  if (given("--task")) cfg.task = parse_task(p.task);
  if (given("--gamma")) cfg.gamma = p.gamma;
  if (cfg.synthetic) {
    auto& spec = *cfg.synthetic;
    if (given("--n")) spec.n = p.n;
    if (given("--d")) spec.d = p.d;
    if (given("--kappa")) spec.kappa_A = p.kappa;
    if (given("--coherence")) spec.coherence = parse_coherence(p.coherence);
    spec.task = cfg.task;
    spec.gamma = cfg.gamma;
  }
  if (!s.solvers.empty()) {
    cfg.solvers.clear();
    for (const auto& name : s.solvers) cfg.solvers.push_back({name, {}});
  }
  if (!s.seeds.empty()) cfg.seeds = s.seeds;
  else if (given("--seed")) cfg.seeds = {p.seed};
  if (cfg.seeds.empty()) cfg.seeds = {0, 1, 2, 3, 4};
  if (!out.empty()) cfg.output_dir = out;
  apply_solver_flags(s, cfg.solver_defaults);

  const ExperimentOutcome outcome = run_experiment(cfg);
  for (const auto& f : outcome.failures)
    std::cerr << "run failed: " << f.solver << " seed " << f.seed << ": " << f.message << "\n";
  std::cerr << "wrote " << outcome.trace_files.size() << " traces and " << outcome.summary_file << "\n";
  return outcome.failures.empty() ? 0 : 3;
}

int cmd_lsq(const std::string& csv, double gamma, const std::string& solver, const SolverFlags& s,
            std::uint64_t seed, std::optional<Index> sketch_rows, double target_eps, const std::string& out) {
  const ProblemInstance inst = load_csv(csv, Task::LeastSquares, gamma);
  LsqSolverConfig cfg;
  cfg.mode = parse_lsq_mode(solver.starts_with("lsq-") ? solver.substr(4) : solver);
  cfg.seed = seed;
  cfg.target_eps = target_eps;
  if (sketch_rows) cfg.sketch_rows = *sketch_rows;
  if (s.m) cfg.m = *s.m;
  if (s.t_max) cfg.t_max = *s.t_max;
  if (s.resample) cfg.resample = parse_resample_policy(*s.resample);
  if (s.max_outer) cfg.max_stages = *s.max_outer;
  LsqResult r = solve_least_squares(inst.A, inst.y, gamma, cfg);
  r.trace.seed = seed;
  std::cout << trace_to_jsonl(r.trace);
  if (!out.empty()) {
    std::ofstream f(out);
    f << std::setprecision(17);
    for (Index j = 0; j < r.x.size(); ++j) f << r.x[j] << "\n";
  }
  if (!r.converged) std::cerr << "stage budget exhausted before the stopping rule fired\n";
  return r.converged ? 0 : 2;
}

int cmd_probe(const ProblemFlags& p, const SolverFlags& s, const std::string& suite, Index trials,
              const std::string& sampling) {
  const SyntheticSpec spec = to_spec(p);
  const Objective obj(gen_synthetic(spec).instance);
  const Reference ref = compute_reference(obj);
  const SvrnConfig defaults = SvrnConfig::defaults(obj.n(), obj.d());
  Rng rng(p.seed + 1);

  if (suite == "variance") {
    const SamplingDistribution dist = sampling == "leverage" && spec.task == Task::LeastSquares
                                          ? leverage_distribution(leverage_scores(obj.instance().A))
                                          : SamplingDistribution::uniform(obj.n());
    std::normal_distribution<double> nd(0.0, 0.1);
    Vector x = ref.x_star;
    for (auto& v : x) v += nd(rng);
    const Index base = s.m.value_or(std::max<Index>(1, obj.n() / 64));
    for (Index m = base; m <= obj.n() && m <= 8 * base; m *= 2) {
      const ProbeStats st = variance_probe(obj, x, ref.x_star, m, trials, rng, dist);
      Json j;
      j["suite"] = "variance";
      j["sampling"] = sampling;
      j["m"] = m;
      j["mean"] = st.mean;
      j["median"] = st.median;
      j["q10"] = st.q10;
      j["q90"] = st.q90;
      j["d_over_m"] = static_cast<double>(obj.d()) / static_cast<double>(m);
      std::cout << j.dump() << "\n";
    }
    return 0;
  }
  if (suite == "spectral") {
    const Index k = s.k.value_or(defaults.k);
    const auto dist = SamplingDistribution::uniform(obj.n());
    HessianModel avg;
    for (int step = 1; step <= 16; ++step) {
      const Matrix sample = subsampled_hessian(obj, ref.x_star, k, dist, rng);
      const double single = spectral_approx(sample, ref.hessian, 0.25).eps_actual;
      avg.update(sample);
      Json j;
      j["suite"] = "spectral";
      j["k"] = k;
      j["s"] = step;
      j["eps_single"] = single;
      j["eps_average"] = spectral_approx(avg.average(), ref.hessian, 0.25).eps_actual;
      std::cout << j.dump() << "\n";
    }
    return 0;
  }
  throw ConfigError("probe suite must be 'variance' or 'spectral'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"finite-sum second-order solvers"};
  app.require_subcommand(1);

  ProblemFlags gen_p;
  std::string gen_out = "problem.csv";
  auto* gen = app.add_subcommand("gen", "write a synthetic problem as CSV");
  add_problem_flags(gen, gen_p);
  gen->add_option("--out", gen_out, "output CSV path");

  ProblemFlags run_p;
  SolverFlags run_s;
  std::string config_path, run_out;
  auto* run = app.add_subcommand("run", "run an experiment config");
  run->add_option("config", config_path, "config file")->check(CLI::ExistingFile);
  add_problem_flags(run, run_p);
  add_solver_flags(run, run_s);
  run->add_option("--solver", run_s.solvers, "solver names (comma separated)")->delimiter(',');
  run->add_option("--seeds", run_s.seeds, "seeds (comma separated)")->delimiter(',');
  run->add_option("--out", run_out, "trace directory");

  std::string csv, lsq_solver = "lsq-leverage", lsq_out;
  double lsq_gamma = 0.0, lsq_eps = 1e-8;
  std::uint64_t lsq_seed = 0;
  std::optional<Index> sketch_rows;
  SolverFlags lsq_s;
  auto* lsq = app.add_subcommand("lsq", "solve a least-squares CSV problem");
  lsq->add_option("csv", csv, "problem CSV (features..., target)")->required()->check(CLI::ExistingFile);
  lsq->add_option("--gamma", lsq_gamma, "ridge parameter");
  lsq->add_option("--seed", lsq_seed, "solver seed");
  lsq->add_option("--solver", lsq_solver, "lsq-leverage, lsq-rht or lsq-uniform");
  lsq->add_option("--sketch-rows", sketch_rows, "preconditioner sketch size");
  lsq->add_option("--eps", lsq_eps, "target relative accuracy");
  lsq->add_option("--out", lsq_out, "write the solution, one entry per line");
  add_solver_flags(lsq, lsq_s);

  ProblemFlags probe_p;
  SolverFlags probe_s;
  std::string suite = "variance", sampling = "uniform";
  Index trials = 200;
  auto* probe = app.add_subcommand("probe", "variance and spectral diagnostics");
  probe->add_option("suite", suite, "variance or spectral");
  add_problem_flags(probe, probe_p);
  add_solver_flags(probe, probe_s);
  probe->add_option("--trials", trials, "draws per batch size");
  probe->add_option("--sampling", sampling, "uniform or leverage")->check(CLI::IsMember({"uniform", "leverage"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_gen(gen_p, gen_out);
    if (*run) return cmd_run(config_path, run_p, *run, run_s, run_out);
    if (*lsq) return cmd_lsq(csv, lsq_gamma, lsq_solver, lsq_s, lsq_seed, sketch_rows, lsq_eps, lsq_out);
    return cmd_probe(probe_p, probe_s, suite, trials, sampling);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
