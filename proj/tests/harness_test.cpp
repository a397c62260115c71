#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "test_util.hpp"

using namespace svrn;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("svrn_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// drops the trailing wall_s field from each JSON line
std::string without_wall_time(const std::string& jsonl) {
  std::stringstream in(jsonl), out;
  std::string line;
  while (std::getline(in, line)) {
    auto j = nlohmann::ordered_json::parse(line);
    j.erase("wall_s");
    out << j.dump() << '\n';
  }
  return out.str();
}

ExperimentConfig small_experiment(const fs::path& out) {
  std::istringstream in(
      "problem = synthetic\n"
      "n = 2048\n"
      "d = 16\n"
      "kappa = 10\n"
      "task = least_squares\n"
      "solvers = [svrn-ha, sn-ha]\n"
      "seeds = [1, 2, 3]\n"
      "max_outer = 6\n"
      "out = " + out.string() + "\n");
  return parse_experiment_config(in);
}

}  // namespace

TEST(Synthetic, UnitKappaIsOrthonormalDesign) {
  const auto p = testutil::lsq_synthetic(512, 8, 1.0, 1);
  const Eigen::JacobiSVD<Matrix> svd(Matrix(p.instance.A));
  EXPECT_LE(svd.singularValues().maxCoeff() / svd.singularValues().minCoeff(), 1 + 1e-8);
}

TEST(Synthetic, SingularValuesFollowGrid) {
  const auto p = testutil::lsq_synthetic(1024, 8, 50.0, 2);
  const Eigen::JacobiSVD<Matrix> svd(Matrix(p.instance.A));
  const Vector sv = svd.singularValues();  // descending
  for (Index j = 0; j < 8; ++j) EXPECT_NEAR(sv[7 - j], 1.0 + 49.0 * j / 7.0, 1e-8 * 50);
}

TEST(Synthetic, GammaScalingRaisesCoherence) {
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto p = testutil::lsq_synthetic(4096, 32, 1.0, seed, Coherence::GammaScaled);
    if (leverage_scores(p.instance.A).maxCoeff() > 5.0 * 32 / 4096) ++ok;
  }
  EXPECT_GE(ok, 90);
}

TEST(Synthetic, PureInSpecAndSeed) {
  SyntheticSpec spec;
  spec.n = 300;
  spec.d = 5;
  spec.kappa_A = 3;
  spec.task = Task::Logistic;
  spec.seed = 17;
  const auto a = gen_synthetic(spec);
  const auto b = gen_synthetic(spec);
  EXPECT_EQ(a.instance.A, b.instance.A);
  EXPECT_EQ(a.instance.y, b.instance.y);
  for (Index i = 0; i < 300; ++i) EXPECT_TRUE(a.instance.y[i] == 1.0 || a.instance.y[i] == -1.0);
  spec.seed = 18;
  EXPECT_NE(gen_synthetic(spec).instance.A, a.instance.A);
}

TEST(Synthetic, RejectsBadSpec) {
  SyntheticSpec spec;
  spec.kappa_A = 0.5;
  EXPECT_THROW(gen_synthetic(spec), ContractViolation);
  spec = {};
  spec.n = 4;
  spec.d = 8;
  EXPECT_THROW(gen_synthetic(spec), ContractViolation);
}

TEST(Reference, ConsistentLeastSquaresRecoversPlanted) {
  SyntheticSpec spec;
  spec.n = 500;
  spec.d = 10;
  spec.kappa_A = 20;
  spec.noise_sigma = 0;
  spec.gamma = 0;
  spec.seed = 4;
  const auto p = gen_synthetic(spec);
  const Reference ref = compute_reference(Objective(p.instance));
  EXPECT_LE((ref.x_star - p.x_planted).norm(), 1e-10);
}

TEST(Reference, GradientVanishes) {
  for (const Task task : {Task::LeastSquares, Task::Logistic}) {
    SyntheticSpec spec;
    spec.n = 2048;
    spec.d = 16;
    spec.task = task;
    spec.seed = 5;
    const Objective obj(gen_synthetic(spec).instance);
    const Reference ref = compute_reference(obj);
    EXPECT_LE(obj.full_gradient(ref.x_star).norm(), 1e-13) << to_string(task);
    EXPECT_LE((ref.hessian - obj.full_hessian(ref.x_star)).norm(), 0.0);
    EXPECT_DOUBLE_EQ(ref.f_star, obj.loss(ref.x_star));
  }
}

TEST(Reference, UniqueFromAnyStart) {
  SyntheticSpec spec;
  spec.n = 1024;
  spec.d = 8;
  spec.task = Task::Logistic;
  spec.gamma = 1e-3;
  spec.seed = 6;
  const Objective obj(gen_synthetic(spec).instance);
  const Reference a = compute_reference(obj);
  const Reference b = compute_reference(obj, testutil::gaussian_vector(8, 7, 2.0));
  EXPECT_LE((a.x_star - b.x_star).norm(), 1e-10);
}

TEST(Csv, RoundTrip) {
  const auto dir = scratch_dir("csv");
  const auto inst = testutil::random_instance(Task::LeastSquares, 30, 4, 0.0, 3);
  write_csv((dir / "d.csv").string(), inst);
  const auto back = load_csv((dir / "d.csv").string(), Task::LeastSquares, 0.5);
  EXPECT_EQ(back.A, inst.A);
  EXPECT_EQ(back.y, inst.y);
  EXPECT_EQ(back.gamma, 0.5);
}

TEST(Csv, LogisticLabelsCoerced) {
  const auto dir = scratch_dir("csv_labels");
  std::ofstream(dir / "l.csv") << "1,0.5,2\n0,1,1\n-3,2,0\n";
  const auto inst = load_csv((dir / "l.csv").string(), Task::Logistic, 0.0);
  EXPECT_EQ(inst.y, (Vector{{1.0, -1.0, -1.0}}));
  EXPECT_EQ(inst.d(), 2);
}

TEST(Csv, Errors) {
  const auto dir = scratch_dir("csv_bad");
  EXPECT_THROW(load_csv((dir / "missing.csv").string(), Task::LeastSquares, 0), ConfigError);
  std::ofstream(dir / "ragged.csv") << "1,2,3\n1,2\n";
  EXPECT_THROW(load_csv((dir / "ragged.csv").string(), Task::LeastSquares, 0), ConfigError);
  std::ofstream(dir / "text.csv") << "1,abc\n";
  EXPECT_THROW(load_csv((dir / "text.csv").string(), Task::LeastSquares, 0), ConfigError);
  std::ofstream(dir / "empty.csv") << "\n";
  EXPECT_THROW(load_csv((dir / "empty.csv").string(), Task::LeastSquares, 0), ConfigError);
}

TEST(Config, ParsesSectionsAndLists) {
  std::istringstream in(
      "# sweep\n"
      "problem = synthetic\n"
      "n = 4096\n"
      "d = 32\n"
      "kappa = 1000\n"
      "coherence = gamma\n"
      "task = logistic\n"
      "gamma = 1e-6\n"
      "solvers = [svrn-ha, svrg]\n"
      "seeds = [0, 1, 2]\n"
      "out = results\n"
      "m = 512\n"
      "[solver.svrg]\n"
      "eta = 0.01\n"
      "max_outer = 4\n");
  const auto cfg = parse_experiment_config(in);
  ASSERT_TRUE(cfg.synthetic.has_value());
  EXPECT_EQ(cfg.synthetic->n, 4096);
  EXPECT_EQ(cfg.synthetic->kappa_A, 1000.0);
  EXPECT_EQ(cfg.synthetic->coherence, Coherence::GammaScaled);
  EXPECT_EQ(cfg.task, Task::Logistic);
  EXPECT_EQ(cfg.synthetic->gamma, 1e-6);
  ASSERT_EQ(cfg.solvers.size(), 2u);
  EXPECT_EQ(cfg.solvers[1].name, "svrg");
  EXPECT_EQ(cfg.solvers[1].overrides.at("eta"), "0.01");
  EXPECT_TRUE(cfg.solvers[0].overrides.empty());
  EXPECT_EQ(cfg.solver_defaults.at("m"), "512");
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{0, 1, 2}));
  EXPECT_EQ(cfg.output_dir, "results");
  EXPECT_NO_THROW(cfg.validate());
}

TEST(Config, Rejects) {
  const auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return parse_experiment_config(in);
  };
  EXPECT_THROW(parse("colour = red\n"), ConfigError);
  EXPECT_THROW(parse("n = 1.5\n"), ConfigError);
  EXPECT_THROW(parse("n\n"), ConfigError);
  EXPECT_THROW(parse("[other]\n"), ConfigError);
  EXPECT_THROW(parse("solvers = [sn-ha]\n[solver.svrg]\neta = 1\n"), ConfigError);
  EXPECT_THROW(parse("solvers = svrn-ha\nseeds = []\n").validate(), ConfigError);
  EXPECT_THROW(parse("solvers = svrn-ha\nseeds = 1, 1\n").validate(), ConfigError);
  EXPECT_THROW(parse("solvers = magic\nseeds = 1\n").validate(), ConfigError);
  EXPECT_THROW(parse("task = logistic\nsolvers = lsq-rht\nseeds = 1\n").validate(), ConfigError);
  EXPECT_THROW(parse("problem = csv\nn = 10\n"), ConfigError);
}

TEST(Trace, JsonLinesFields) {
  ConvergenceTrace t;
  t.solver = "svrn-ha";
  t.seed = 3;
  t.n = 10;
  TraceRecord r;
  r.s = 2;
  r.passes = 1.5;
  r.err = 0.25;
  r.eta = 1;
  r.phase = Phase::Svrn;
  r.wall_s = 0.125;
  t.records.push_back(r);
  EXPECT_EQ(trace_to_jsonl(t),
            "{\"solver\":\"svrn-ha\",\"seed\":3,\"s\":2,\"passes\":1.5,\"err\":0.25,\"eta\":1.0,\"phase\":\"svrn\","
            "\"wall_s\":0.125}\n");
  EXPECT_EQ(trace_to_jsonl(t, false).find("wall_s"), std::string::npos);
}

TEST(Summary, MediansAcrossSeeds) {
  std::vector<ConvergenceTrace> traces(3);
  for (int k = 0; k < 3; ++k) {
    traces[k].solver = "x";
    traces[k].records.resize(1);
    traces[k].records[0].err = k + 1.0;
    traces[k].records[0].passes = 2.0;
  }
  const std::string csv = summarize_traces(traces);
  EXPECT_EQ(csv, "solver,s,runs,passes_median,err_median,err_q25,err_q75,wall_s_median\nx,0,3,2,2,1.5,2.5,0\n");
}

TEST(Experiment, CountsFilesAndReproduces) {
  const auto dir = scratch_dir("exp");
  auto cfg = small_experiment(dir / "a");
  const auto first = run_experiment(cfg);
  EXPECT_TRUE(first.failures.empty());
  ASSERT_EQ(first.trace_files.size(), 6u);
  for (const auto& f : first.trace_files) EXPECT_TRUE(fs::exists(f)) << f;
  EXPECT_TRUE(fs::exists(first.summary_file));
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir / "a")) files += e.is_regular_file();
  EXPECT_EQ(files, 7u);

  cfg.output_dir = (dir / "b").string();
  const auto second = run_experiment(cfg);
  for (std::size_t i = 0; i < 6; ++i) {
    const std::string a = slurp(first.trace_files[i]);
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(without_wall_time(a), without_wall_time(slurp(second.trace_files[i])));
  }
  // first record of every trace has err 1 and passes 0
  const auto j = nlohmann::json::parse(slurp(first.trace_files[0]).substr(0, slurp(first.trace_files[0]).find('\n')));
  EXPECT_EQ(j["err"].get<double>(), 1.0);
  EXPECT_EQ(j["passes"].get<double>(), 0.0);
}

TEST(Experiment, ThreadsGiveSameTraces) {
  const auto dir = scratch_dir("exp_threads");
  auto cfg = small_experiment(dir / "serial");
  const auto serial = run_experiment(cfg);
  ::setenv("SVRN_THREADS", "3", 1);
  EXPECT_EQ(worker_count(), 3u);
  cfg.output_dir = (dir / "pool").string();
  const auto pooled = run_experiment(cfg);
  ::unsetenv("SVRN_THREADS");
  EXPECT_EQ(worker_count(), 1u);
  for (std::size_t i = 0; i < 6; ++i)
    EXPECT_EQ(without_wall_time(slurp(serial.trace_files[i])), without_wall_time(slurp(pooled.trace_files[i])));
}

TEST(Experiment, FailuresDoNotAbortSweep) {
  const auto dir = scratch_dir("exp_fail");
  std::istringstream in(
      "n = 1024\nd = 8\nsolvers = [svrg, newton]\nseeds = [1, 2]\nmax_outer = 5\n"
      "out = " + (dir / "o").string() + "\n"
      "[solver.svrg]\neta = 1000\n");
  const auto outcome = run_experiment(parse_experiment_config(in));
  EXPECT_EQ(outcome.failures.size(), 2u);
  for (const auto& f : outcome.failures) EXPECT_EQ(f.solver, "svrg");
  EXPECT_EQ(outcome.trace_files.size(), 4u);
  EXPECT_TRUE(fs::exists(outcome.summary_file));
}

TEST(Experiment, CsvProblemWithLsqSolvers) {
  const auto dir = scratch_dir("exp_csv");
  const auto p = testutil::lsq_synthetic(2048, 8, 10, 3);
  write_csv((dir / "data.csv").string(), p.instance);
  std::istringstream in("problem = csv\ncsv = " + (dir / "data.csv").string() +
                        "\nsolvers = lsq-rht, lsq-leverage, newton\nseeds = 5\nout = " + (dir / "o").string() + "\n");
  const auto outcome = run_experiment(parse_experiment_config(in));
  EXPECT_TRUE(outcome.failures.empty());
  EXPECT_EQ(outcome.trace_files.size(), 3u);
}
