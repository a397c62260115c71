#ifndef SVRN_HARNESS_HPP
#define SVRN_HARNESS_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "svrn/errors.hpp"
#include "svrn/linalg.hpp"
#include "svrn/lsq_solver.hpp"
#include "svrn/optimizers.hpp"
#include "svrn/problem.hpp"
#include "svrn/sampling.hpp"
#include "svrn/trace.hpp"

namespace svrn {

enum class Coherence { Gaussian, GammaScaled };

inline Coherence parse_coherence(const std::string& name) {
  if (name == "gaussian") return Coherence::Gaussian;
  if (name == "gamma" || name == "gamma-scaled" || name == "high") return Coherence::GammaScaled;
  throw ConfigError("unknown coherence '" + name + "'");
}

inline std::string to_string(Coherence c) { return c == Coherence::Gaussian ? "gaussian" : "gamma"; }

struct SyntheticSpec {
  Index n = 4096;
  Index d = 32;
  double kappa_A = 1.0;
  Coherence coherence = Coherence::Gaussian;
  Task task = Task::LeastSquares;
  double noise_sigma = std::sqrt(0.1);
  double gamma = 1e-8;
  std::uint64_t seed = 0;

  void validate() const {
    detail::require(d >= 1 && n >= d, "synthetic problem needs n >= d >= 1");
    detail::require(kappa_A >= 1.0, "kappa_A must be at least 1");
    detail::require(noise_sigma >= 0.0, "noise_sigma must be nonnegative");
    detail::require(gamma >= 0.0, "gamma must be nonnegative");
  }
};

struct SyntheticProblem {
  ProblemInstance instance;
  Vector x_planted;
};

/// A = U diag(1..kappa_A) V from the reduced SVD of a Gaussian matrix, with
/// optional 1/sqrt(g_i) row scaling, g_i ~ Gamma(2, 1/2). Labels are
/// sign(A x) or A x + noise for x ~ N(0, I/d). Pure in (spec, seed).
inline SyntheticProblem gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Index n = spec.n;
  const Index d = spec.d;

  Matrix G(n, d);
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < n; ++i) G(i, j) = normal(rng);

  // Reduced SVD through G = QR, R = U_r S V^T.
  const Eigen::HouseholderQR<Matrix> qr(G);
  const Matrix Q = qr.householderQ() * Matrix::Identity(n, d);
  const Matrix R = qr.matrixQR().topRows(d).triangularView<Eigen::Upper>();
  const Eigen::JacobiSVD<Matrix> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.info() != Eigen::Success) throw Error("SVD of the Gaussian matrix failed");

  Vector spread(d);
  for (Index j = 0; j < d; ++j) {
    spread[j] = d == 1 ? 1.0 : 1.0 + (spec.kappa_A - 1.0) * static_cast<double>(j) / static_cast<double>(d - 1);
  }
  RowMatrix A = (Q * svd.matrixU()) * spread.asDiagonal() * svd.matrixV().transpose();

  if (spec.coherence == Coherence::GammaScaled) {
    std::gamma_distribution<double> gamma_draw(2.0, 0.5);
    for (Index i = 0; i < n; ++i) A.row(i) /= std::sqrt(gamma_draw(rng));
  }

  Vector planted(d);
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  for (Index j = 0; j < d; ++j) planted[j] = sd * normal(rng);

  Vector y = A * planted;
  if (spec.task == Task::Logistic) {
    for (Index i = 0; i < n; ++i) y[i] = y[i] >= 0.0 ? 1.0 : -1.0;
  } else {
    for (Index i = 0; i < n; ++i) y[i] += spec.noise_sigma * normal(rng);
  }

  SyntheticProblem out;
  out.instance.A = std::move(A);
  out.instance.y = std::move(y);
  out.instance.gamma = spec.gamma;
  out.instance.task = spec.task;
  out.x_planted = std::move(planted);
  return out;
}

/// Trusted optimum: QR solve of the regularized least-squares system, or
/// damped Newton on logistic regression until the gradient stops shrinking.
inline Reference compute_reference(const Objective& obj, const std::optional<Vector>& x0 = std::nullopt) {
  const auto& inst = obj.instance();
  const Index n = inst.n();
  const Index d = inst.d();
  Reference ref;
  if (inst.task == Task::LeastSquares) {
    const double root_n = std::sqrt(static_cast<double>(n));
    Matrix stacked = Matrix::Zero(n + d, d);
    stacked.topRows(n) = inst.A / root_n;
    stacked.bottomRows(d).diagonal().setConstant(std::sqrt(inst.gamma));
    Vector rhs = Vector::Zero(n + d);
    rhs.head(n) = inst.y / root_n;
    const Eigen::HouseholderQR<Matrix> qr(stacked);
    const Vector rdiag = qr.matrixQR().diagonal().cwiseAbs();
    if (rdiag.minCoeff() <= 1e-14 * rdiag.maxCoeff()) throw NotStronglyConvex("least-squares system is singular");
    ref.x_star = qr.solve(rhs);
  } else {
    Vector x = x0.value_or(Vector::Zero(d));
    ArmijoParams armijo;
    Vector best = x;
    double best_norm = std::numeric_limits<double>::infinity();
    int stalled = 0;
    for (int it = 0; it < 200; ++it) {
      const Vector g = obj.full_gradient(x);
      const double gn = g.norm();
      if (gn < best_norm) {
        best_norm = gn;
        best = x;
        stalled = 0;
      } else if (++stalled >= 3) {
        break;
      }
      if (gn <= 1e-14) break;
      const Vector v = -SpdFactorization(obj.full_hessian(x)).solve(g);
      const double f = obj.loss(x);
      const double slope = g.dot(v);
      // Once f no longer resolves the decrease, continue with unit Newton
      // steps judged by the gradient norm.
      if (slope < 0.0 && !detail::at_numerical_optimum(slope, f)) {
        x += armijo_search(obj, x, v, g, armijo, f).eta * v;
      } else {
        x += v;
      }
    }
    if (!(best_norm <= 1e-10)) throw NotConverged("Newton did not converge within 200 iterations");
    ref.x_star = best;
  }
  ref.hessian = obj.full_hessian(ref.x_star);
  ref.f_star = obj.loss(ref.x_star);
  return ref;
}

/// Reads header-free rows `y,a_1,...,a_d`. Logistic labels become +1 when
/// positive and -1 otherwise.
inline ProblemInstance load_csv(const std::string& path, Task task, double gamma) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError("non-numeric cell '" + cell + "' in '" + path + "'");
      }
    }
    if (row.size() < 2) throw ConfigError("row with fewer than two columns in '" + path + "'");
    if (width == 0) width = row.size();
    if (row.size() != width) throw ConfigError("ragged row in '" + path + "'");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("dataset '" + path + "' is empty");
  ProblemInstance inst;
  const auto n = static_cast<Index>(rows.size());
  const auto d = static_cast<Index>(width - 1);
  inst.A.resize(n, d);
  inst.y.resize(n);
  for (Index i = 0; i < n; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    inst.y[i] = task == Task::Logistic ? (row[0] > 0.0 ? 1.0 : -1.0) : row[0];
    for (Index j = 0; j < d; ++j) inst.A(i, j) = row[static_cast<std::size_t>(j + 1)];
  }
  inst.gamma = gamma;
  inst.task = task;
  inst.validate();
  return inst;
}

inline void write_csv(const std::string& path, const ProblemInstance& inst) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Index i = 0; i < inst.n(); ++i) {
    out << inst.y[i];
    for (Index j = 0; j < inst.d(); ++j) out << ',' << inst.A(i, j);
    out << '\n';
  }
}

/// JSON Lines, one record per outer iteration.
inline std::string trace_to_jsonl(const ConvergenceTrace& trace, bool include_wall_time = true) {
  std::string out;
  for (const auto& r : trace.records) {
    nlohmann::ordered_json j;
    j["solver"] = trace.solver;
    j["seed"] = trace.seed;
    j["s"] = r.s;
    j["passes"] = r.passes;
    j["err"] = r.err;
    j["eta"] = r.eta;
    j["phase"] = to_string(r.phase);
    if (include_wall_time) j["wall_s"] = r.wall_s;
    out += j.dump();
    out += '\n';
  }
  return out;
}

struct SolverSpec {
  std::string name;
  std::map<std::string, std::string> overrides;
};

struct ExperimentConfig {
  std::optional<SyntheticSpec> synthetic;
  std::string csv_path;
  Task task = Task::LeastSquares;
  double gamma = 1e-8;
  std::vector<SolverSpec> solvers;
  std::vector<std::uint64_t> seeds;
  std::string output_dir = "traces";
  bool use_reference = true;
  std::map<std::string, std::string> solver_defaults;

  void validate() const {
    if (solvers.empty()) throw ConfigError("experiment needs at least one solver");
    if (seeds.empty()) throw ConfigError("experiment needs at least one seed");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
      throw ConfigError("experiment seeds must be distinct");
    }
    if (!synthetic && csv_path.empty()) throw ConfigError("experiment needs a synthetic spec or a CSV path");
    if (synthetic) synthetic->validate();
    static const std::set<std::string> known = {"svrn-ha", "sn-ha", "sngs-ha", "svrg", "svrg-tuned", "newton",
                                                "lsq-leverage", "lsq-rht", "lsq-uniform"};
    for (const auto& s : solvers) {
      if (!known.contains(s.name)) throw ConfigError("unknown solver '" + s.name + "'");
      if (s.name.starts_with("lsq-") && task != Task::LeastSquares) {
        throw ConfigError("solver '" + s.name + "' needs a least-squares problem");
      }
    }
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\"'");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\"'");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split_list(std::string value) {
  std::erase(value, '[');
  std::erase(value, ']');
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "' expects a number, got '" + value + "'");
  }
}

inline std::int64_t to_int(const std::string& key, const std::string& value) {
  const double v = to_double(key, value);
  if (v != std::floor(v)) throw ConfigError("key '" + key + "' expects an integer, got '" + value + "'");
  return static_cast<std::int64_t>(v);
}

}  // namespace detail

/// Parses `key = value` lines; `[solver.NAME]` sections hold per-solver
/// overrides of the solver keys (m, t_max, k, resample, max_outer, eta,
/// svrg_inner, sketch_rows, target_eps).
inline ExperimentConfig parse_experiment_config(std::istream& in) {
  ExperimentConfig cfg;
  SyntheticSpec spec;
  bool have_synthetic_keys = false;
  std::string problem = "synthetic";
  std::string section;
  std::map<std::string, std::map<std::string, std::string>> per_solver;
  std::vector<std::string> solver_names;
  static const std::set<std::string> solver_keys = {"m",   "t_max",       "k",          "resample", "max_outer",
                                                    "eta", "svrg_inner", "sketch_rows", "target_eps"};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      section = detail::trim(line.substr(1, line.find(']') - 1));
      if (!section.starts_with("solver.")) throw ConfigError("unknown section [" + section + "]");
      section = section.substr(7);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = detail::trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '-', '_');
    const std::string value = detail::trim(line.substr(eq + 1));
    if (!section.empty()) {
      if (!solver_keys.contains(key)) throw ConfigError("key '" + key + "' cannot be set per solver");
      per_solver[section][key] = value;
      continue;
    }
    if (solver_keys.contains(key)) {
      cfg.solver_defaults[key] = value;
    } else if (key == "problem") {
      problem = value;
    } else if (key == "csv") {
      cfg.csv_path = value;
    } else if (key == "n") {
      spec.n = detail::to_int(key, value), have_synthetic_keys = true;
    } else if (key == "d") {
      spec.d = detail::to_int(key, value), have_synthetic_keys = true;
    } else if (key == "kappa" || key == "kappa_a") {
      spec.kappa_A = detail::to_double(key, value), have_synthetic_keys = true;
    } else if (key == "coherence") {
      spec.coherence = parse_coherence(value);
    } else if (key == "noise_sigma") {
      spec.noise_sigma = detail::to_double(key, value);
    } else if (key == "task") {
      cfg.task = parse_task(value);
    } else if (key == "gamma") {
      cfg.gamma = detail::to_double(key, value);
    } else if (key == "solvers" || key == "solver") {
      solver_names = detail::split_list(value);
    } else if (key == "seeds" || key == "seed") {
      for (const auto& s : detail::split_list(value)) cfg.seeds.push_back(static_cast<std::uint64_t>(detail::to_int(key, s)));
    } else if (key == "out" || key == "output") {
      cfg.output_dir = value;
    } else if (key == "metric") {
      if (value != "reference" && value != "loss") throw ConfigError("metric must be 'reference' or 'loss'");
      cfg.use_reference = value == "reference";
    } else {
      throw ConfigError("unknown key '" + key + "'");
    }
  }
  if (problem == "synthetic") {
    spec.task = cfg.task;
    spec.gamma = cfg.gamma;
    cfg.synthetic = spec;
  } else if (problem != "csv") {
    throw ConfigError("problem must be 'synthetic' or 'csv'");
  } else if (have_synthetic_keys) {
    throw ConfigError("synthetic dimensions given for a CSV problem");
  }
  for (const auto& name : solver_names) cfg.solvers.push_back({name, per_solver[name]});
  for (const auto& [name, _] : per_solver) {
    if (std::find(solver_names.begin(), solver_names.end(), name) == solver_names.end()) {
      throw ConfigError("section [solver." + name + "] names a solver that is not run");
    }
  }
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  return parse_experiment_config(in);
}

struct RunFailure {
  std::string solver;
  std::uint64_t seed = 0;
  std::string message;
};

struct ExperimentOutcome {
  std::vector<std::string> trace_files;
  std::string summary_file;
  std::vector<RunFailure> failures;
};

/// Worker count from SVRN_THREADS (default 1).
inline unsigned worker_count() {
  if (const char* env = std::getenv("SVRN_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  return 1;
}

/// Runs one named solver; throws svrn::Error on failure.
inline RunResult run_solver(const SolverSpec& solver, const std::map<std::string, std::string>& defaults,
                            const Objective& obj, const std::optional<Reference>& ref, std::uint64_t seed) {
  std::map<std::string, std::string> opts = defaults;
  for (const auto& [k, v] : solver.overrides) opts[k] = v;
  const auto get_int = [&](const std::string& key, std::int64_t fallback) {
    const auto it = opts.find(key);
    return it == opts.end() ? fallback : detail::to_int(key, it->second);
  };
  const auto get_double = [&](const std::string& key, double fallback) {
    const auto it = opts.find(key);
    return it == opts.end() ? fallback : detail::to_double(key, it->second);
  };
  const Vector x0 = Vector::Zero(obj.d());
  const int max_outer = static_cast<int>(get_int("max_outer", 30));
  const std::string& name = solver.name;

  if (name == "svrn-ha" || name == "sn-ha" || name == "sngs-ha") {
    SvrnConfig cfg = SvrnConfig::defaults(obj.n(), obj.d());
    cfg.m = get_int("m", cfg.m);
    cfg.t_max = get_int("t_max", cfg.t_max);
    cfg.k = get_int("k", cfg.k);
    if (const auto it = opts.find("resample"); it != opts.end()) cfg.resample = parse_resample_policy(it->second);
    cfg.max_outer = max_outer;
    cfg.seed = seed;
    if (name == "svrn-ha") return svrn_ha_run(obj, x0, cfg, ref);
    if (name == "sn-ha") return sn_ha_run(obj, x0, cfg, ref);
    return sngs_ha_run(obj, x0, cfg, ref);
  }
  if (name == "newton") return newton_run(obj, x0, ArmijoParams{}, max_outer, ref);
  if (name == "svrg" || name == "svrg-tuned") {
    const SmoothnessEstimates est = strong_smooth_estimates(obj.instance(), ref ? std::optional<Vector>(ref->x_star) : std::nullopt);
    SvrgConfig cfg;
    cfg.eta = get_double("eta", 1.0 / (4.0 * est.lambda));
    cfg.inner_m = get_int("svrg_inner", obj.n());
    cfg.max_outer = max_outer;
    cfg.seed = seed;
    if (name == "svrg") return svrg_run(obj, x0, cfg, ref);
    RunResult r = svrg_tuned_run(obj, x0, est.lambda, cfg, ref);
    r.trace.solver = "svrg-tuned";
    return r;
  }
  LsqSolverConfig cfg;
  cfg.mode = parse_lsq_mode(name.substr(4));
  cfg.sketch_rows = get_int("sketch_rows", 0);
  cfg.m = get_int("m", 0);
  cfg.t_max = get_int("t_max", 0);
  cfg.max_stages = max_outer;
  cfg.target_eps = get_double("target_eps", 1e-8);
  if (const auto it = opts.find("resample"); it != opts.end()) cfg.resample = parse_resample_policy(it->second);
  cfg.seed = seed;
  if (ref) cfg.f_star = ref->f_star;
  LsqResult r = solve_least_squares(obj.instance().A, obj.instance().y, obj.gamma(), cfg);
  return {r.x, std::move(r.trace)};
}

inline std::string trace_file_name(const std::string& solver, std::uint64_t seed) {
  return solver + "_seed" + std::to_string(seed) + ".jsonl";
}

/// Median curves per (solver, s) across seeds.
inline std::string summarize_traces(const std::vector<ConvergenceTrace>& traces) {
  std::map<std::string, std::map<int, std::vector<const TraceRecord*>>> grouped;
  for (const auto& t : traces)
    for (const auto& r : t.records) grouped[t.solver][r.s].push_back(&r);
  const auto quantile = [](std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "solver,s,runs,passes_median,err_median,err_q25,err_q75,wall_s_median\n";
  for (const auto& [solver, by_s] : grouped) {
    for (const auto& [s, recs] : by_s) {
      std::vector<double> passes, err, wall;
      for (const auto* r : recs) {
        passes.push_back(r->passes);
        err.push_back(r->err);
        wall.push_back(r->wall_s);
      }
      out << solver << ',' << s << ',' << recs.size() << ',' << quantile(passes, 0.5) << ',' << quantile(err, 0.5)
          << ',' << quantile(err, 0.25) << ',' << quantile(err, 0.75) << ',' << quantile(wall, 0.5) << '\n';
    }
  }
  return out.str();
}

/// For every (solver, seed): build the problem, compute the reference, run,
/// and write one trace file; then write summary.csv. Solver errors are
/// recorded per run and do not abort the sweep.
inline ExperimentOutcome run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);

  struct Prepared {
    std::shared_ptr<const Objective> obj;
    std::optional<Reference> ref;
  };
  std::vector<Prepared> problems;
  std::shared_ptr<const ProblemInstance> csv_instance;
  if (!cfg.synthetic) csv_instance = std::make_shared<const ProblemInstance>(load_csv(cfg.csv_path, cfg.task, cfg.gamma));
  std::optional<Reference> csv_ref;
  for (const auto seed : cfg.seeds) {
    Prepared p;
    if (cfg.synthetic) {
      SyntheticSpec spec = *cfg.synthetic;
      spec.seed = seed;
      p.obj = std::make_shared<const Objective>(gen_synthetic(spec).instance);
      if (cfg.use_reference) p.ref = compute_reference(*p.obj);
    } else {
      p.obj = std::make_shared<const Objective>(csv_instance);
      if (cfg.use_reference && !csv_ref) csv_ref = compute_reference(*p.obj);
      p.ref = csv_ref;
    }
    problems.push_back(std::move(p));
  }

  const std::size_t tasks = cfg.seeds.size() * cfg.solvers.size();
  std::vector<ConvergenceTrace> traces(tasks);
  std::vector<std::optional<RunFailure>> failures(tasks);
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t t = next++; t < tasks; t = next++) {
      const std::size_t seed_idx = t / cfg.solvers.size();
      const auto& solver = cfg.solvers[t % cfg.solvers.size()];
      const std::uint64_t seed = cfg.seeds[seed_idx];
      const auto& prep = problems[seed_idx];
      try {
        traces[t] = run_solver(solver, cfg.solver_defaults, *prep.obj, prep.ref, seed).trace;
      } catch (const LineSearchFailed& e) {
        traces[t] = e.trace();
        failures[t] = RunFailure{solver.name, seed, e.what()};
      } catch (const Error& e) {
        failures[t] = RunFailure{solver.name, seed, e.what()};
      }
      traces[t].solver = solver.name;
      traces[t].seed = seed;
      std::ofstream out(fs::path(cfg.output_dir) / trace_file_name(solver.name, seed));
      out << trace_to_jsonl(traces[t]);
    }
  };
  const unsigned workers = std::min<unsigned>(worker_count(), static_cast<unsigned>(tasks));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();

  ExperimentOutcome outcome;
  for (std::size_t t = 0; t < tasks; ++t) {
    const std::size_t seed_idx = t / cfg.solvers.size();
    outcome.trace_files.push_back(
        (fs::path(cfg.output_dir) / trace_file_name(cfg.solvers[t % cfg.solvers.size()].name, cfg.seeds[seed_idx]))
            .string());
    if (failures[t]) outcome.failures.push_back(*failures[t]);
  }
  outcome.summary_file = (fs::path(cfg.output_dir) / "summary.csv").string();
  std::ofstream summary(outcome.summary_file);
  std::vector<ConvergenceTrace> nonempty;
  for (auto& t : traces)
    if (!t.records.empty()) nonempty.push_back(t);
  summary << summarize_traces(nonempty);
  return outcome;
}

}  // namespace svrn

#endif  // SVRN_HARNESS_HPP
