#ifndef SVRN_LSQ_SOLVER_HPP
#define SVRN_LSQ_SOLVER_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "svrn/errors.hpp"
#include "svrn/linalg.hpp"
#include "svrn/optimizers.hpp"
#include "svrn/problem.hpp"
#include "svrn/sampling.hpp"
#include "svrn/trace.hpp"

namespace svrn {

/// Gradient sampling strategy for the least-squares solver. PlainUniform
/// samples the raw rows uniformly and exists for diagnostics only.
enum class LsqMode { LeverageSampling, RhtUniform, PlainUniform };

inline LsqMode parse_lsq_mode(const std::string& name) {
  if (name == "leverage") return LsqMode::LeverageSampling;
  if (name == "rht") return LsqMode::RhtUniform;
  if (name == "uniform") return LsqMode::PlainUniform;
  throw ConfigError("unknown least-squares mode '" + name + "'");
}

inline std::string to_string(LsqMode mode) {
  switch (mode) {
    case LsqMode::LeverageSampling: return "leverage";
    case LsqMode::RhtUniform: return "rht";
    case LsqMode::PlainUniform: return "uniform";
  }
  return "rht";
}

/// Accuracy the sketched preconditioner is sized for.
inline constexpr double kSketchAccuracy = 0.25;

/// Default sketch size, 32 d ceil(log2 d) rows (at least 2d).
inline Index default_sketch_rows(Index d) {
  const auto log_d = static_cast<Index>(std::ceil(std::log2(static_cast<double>(std::max<Index>(d, 2)))));
  return std::max<Index>(32 * d * log_d, 2 * d);
}

/// Preconditioner (1/n)(SA)^T(SA) + gamma I, where S subsamples rows of the
/// Hadamard-mixed matrix HDA uniformly and rescales by sqrt(n_pad/rows).
/// A sketch as tall as the padded matrix uses every row unsampled.
inline HessianModel sketched_hessian_inverse(const RowMatrix& A, double gamma, Index sketch_rows, Rng& rng) {
  const Index n = A.rows();
  const Index d = A.cols();
  detail::require(n >= d && d >= 1, "sketch needs n >= d >= 1");
  detail::require(sketch_rows >= d, "sketch needs at least d rows");
  detail::require(gamma >= 0.0, "gamma must be nonnegative");
  for (int attempt = 0; attempt < 2; ++attempt) {
    const RhtTransform t = RhtTransform::draw(n, rng);
    const Matrix mixed = t.apply(Matrix(A));
    Matrix sketch;
    if (sketch_rows >= t.n_pad) {
      sketch = mixed;
    } else {
      const double scale = std::sqrt(static_cast<double>(t.n_pad) / static_cast<double>(sketch_rows));
      const std::vector<Index> rows = uniform_batch(t.n_pad, sketch_rows, rng);
      sketch.resize(sketch_rows, d);
      for (Index r = 0; r < sketch_rows; ++r) sketch.row(r) = scale * mixed.row(rows[static_cast<std::size_t>(r)]);
    }
    Matrix gram = Matrix::Zero(d, d);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(sketch.transpose(), 1.0 / static_cast<double>(n));
    gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
    if (Eigen::LLT<Matrix>(gram).info() != Eigen::Success) continue;  // rank collapse: redraw once
    gram.diagonal().array() += gamma;
    return HessianModel::fixed(gram);
  }
  throw SketchFailed("sketched Hessian is rank deficient after resampling");
}

struct LsqSolverConfig {
  LsqMode mode = LsqMode::RhtUniform;
  Index sketch_rows = 0;  // 0: default_sketch_rows(d)
  Index m = 0;            // 0: floor(n / log2(n/d))
  Index t_max = 0;        // 0: floor(log2(n/d))
  ResamplePolicy resample = ResamplePolicy::PerStage;
  double target_eps = 1e-8;
  int max_stages = 100;
  std::uint64_t seed = 0;
  /// Trusted optimal value; when set the solver stops on f <= (1+eps) f*.
  std::optional<double> f_star;

  void validate() const {
    detail::require(target_eps > 0.0, "target_eps must be positive");
    detail::require(max_stages >= 1, "max_stages must be positive");
  }
};

struct LsqResult {
  Vector x;
  ConvergenceTrace trace;
  bool converged = false;
};

/// Randomized least-squares solver: one sketched preconditioner, then SVRN
/// stages with unit steps from x = 0.
///
/// The trace error is the loss gap (f - f*)/(f0 - f*) when f* is supplied,
/// otherwise the surrogate g^T B g / (2 (1 - 1/4)) relative to its initial value.
inline LsqResult solve_least_squares(const RowMatrix& A, const Vector& y, double gamma, const LsqSolverConfig& cfg) {
  cfg.validate();
  const Index n = A.rows();
  const Index d = A.cols();
  detail::require(y.size() == n, "target length must equal the number of rows");
  detail::require(n >= 2 * d && static_cast<double>(n) > static_cast<double>(d) * std::log2(static_cast<double>(n) / d),
                  "solver schedule needs n > d log2(n/d)");
  Rng rng(cfg.seed);

  ProblemInstance inst;
  inst.A = A;
  inst.y = y;
  inst.gamma = gamma;
  inst.task = Task::LeastSquares;

  const HessianModel precond =
      sketched_hessian_inverse(A, gamma, cfg.sketch_rows > 0 ? cfg.sketch_rows : default_sketch_rows(d), rng);

  std::optional<SamplingDistribution> dist;
  if (cfg.mode == LsqMode::RhtUniform) {
    inst = rht_problem(inst, rng);
    dist = SamplingDistribution::uniform(inst.n());
  } else if (cfg.mode == LsqMode::LeverageSampling) {
    dist = leverage_distribution(leverage_scores(A));
  } else {
    dist = SamplingDistribution::uniform(n);
  }
  const Objective obj(std::move(inst));

  const SvrnConfig schedule = SvrnConfig::defaults(obj.n(), d);
  const Index m = cfg.m > 0 ? cfg.m : schedule.m;
  const Index t_max = cfg.t_max > 0 ? cfg.t_max : schedule.t_max;
  GradientSampler sampler(*dist, m, cfg.resample, BatchMode::Sampled);
  TraceRecorder rec("lsq-" + to_string(cfg.mode), cfg.seed, obj.n());

  const auto surrogate_gap = [&](const Vector& g) {
    return 0.5 * g.dot(precond.solve(g)) / (1.0 - kSketchAccuracy);
  };

  Vector x = Vector::Zero(d);
  double f = obj.loss(x);
  Vector g = obj.full_gradient(x);
  rec.add_gradient_evals(static_cast<std::uint64_t>(obj.n()));
  const double initial_gap = cfg.f_star ? f - *cfg.f_star : surrogate_gap(g);
  const auto error = [&](double loss, const Vector& grad) {
    const double gap = cfg.f_star ? loss - *cfg.f_star : surrogate_gap(grad);
    return initial_gap > 0.0 ? std::max(gap, 0.0) / initial_gap : 0.0;
  };
  const auto done = [&](double loss, const Vector& grad) {
    if (cfg.f_star) return loss <= (1.0 + cfg.target_eps) * *cfg.f_star;
    const double gap = surrogate_gap(grad);
    return gap <= cfg.target_eps * (loss - gap);
  };

  rec.record(0, error(f, g), f, 0.0, Phase::Init);
  bool converged = done(f, g);
  for (int s = 0; s < cfg.max_stages && !converged; ++s) {
    std::uint64_t evals = 0;
    x = svrn_stage(obj, x, g, precond, t_max, sampler, rng, &evals);
    rec.add_gradient_evals(evals);
    f = obj.loss(x);
    g = obj.full_gradient(x);
    rec.add_gradient_evals(static_cast<std::uint64_t>(obj.n()));
    rec.record(s + 1, error(f, g), f, 1.0, Phase::Svrn);
    converged = done(f, g);
  }
  return {x, rec.take(), converged};
}

}  // namespace svrn

#endif  // SVRN_LSQ_SOLVER_HPP
