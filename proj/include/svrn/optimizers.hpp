#ifndef SVRN_OPTIMIZERS_HPP
#define SVRN_OPTIMIZERS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "svrn/errors.hpp"
#include "svrn/linalg.hpp"
#include "svrn/problem.hpp"
#include "svrn/sampling.hpp"
#include "svrn/trace.hpp"

namespace svrn {

struct ArmijoParams {
  double c = 1e-4;
  double beta = 0.5;
  int max_halvings = 50;

  void validate() const {
    detail::require(c > 0.0 && c < 0.5, "Armijo constant c must lie in (0, 1/2)");
    detail::require(beta > 0.0 && beta < 1.0, "backtracking factor must lie in (0, 1)");
    detail::require(max_halvings >= 0, "max_halvings must be nonnegative");
  }
};

/// How often the gradient batch of the inner loop is redrawn.
enum class ResamplePolicy { Once, PerStage, PerStep };

/// Sampled draws, or deterministic enumeration of every component once
/// (the full-batch limit used by exactness checks).
enum class BatchMode { Sampled, Exhaustive };

inline ResamplePolicy parse_resample_policy(const std::string& name) {
  if (name == "once") return ResamplePolicy::Once;
  if (name == "stage" || name == "per-stage") return ResamplePolicy::PerStage;
  if (name == "step" || name == "per-step") return ResamplePolicy::PerStep;
  throw ConfigError("unknown resample policy '" + name + "'");
}

inline std::string to_string(ResamplePolicy policy) {
  switch (policy) {
    case ResamplePolicy::Once: return "once";
    case ResamplePolicy::PerStage: return "stage";
    case ResamplePolicy::PerStep: return "step";
  }
  return "stage";
}

/// Whether the Newton/stochastic phase is re-decided every outer iteration
/// from the previous step size, or fixed once the first unit step is accepted.
enum class SwitchRule { Recheck, Sticky };

struct SvrnConfig {
  Index m = 1;
  Index t_max = 1;
  Index k = 1;
  ResamplePolicy resample = ResamplePolicy::PerStage;
  BatchMode gradient_batches = BatchMode::Sampled;
  BatchMode hessian_batches = BatchMode::Sampled;
  SwitchRule switch_rule = SwitchRule::Recheck;
  ArmijoParams armijo;
  int max_outer = 100;
  double tolerance = 1e-13;
  std::uint64_t seed = 0;

  /// t_max = floor(log2(n/d)), m = floor(n / log2(n/d)), k = 4d.
  static SvrnConfig defaults(Index n, Index d) {
    detail::require(d >= 1 && n >= 2 * d, "default schedule needs n/d >= 2");
    const double ratio = std::log2(static_cast<double>(n) / static_cast<double>(d));
    SvrnConfig cfg;
    cfg.t_max = static_cast<Index>(std::floor(ratio));
    cfg.m = static_cast<Index>(std::floor(static_cast<double>(n) / ratio));
    cfg.k = 4 * d;
    return cfg;
  }

  void validate() const {
    detail::require(m >= 1, "gradient batch size m must be positive");
    detail::require(t_max >= 1, "t_max must be positive");
    detail::require(k >= 1, "Hessian sample size k must be positive");
    detail::require(max_outer >= 1, "max_outer must be positive");
    armijo.validate();
  }
};

/// Running arithmetic mean of sampled Hessians, refactored on every update.
class HessianModel {
 public:
  HessianModel() = default;

  /// A model frozen at H (counts as one estimate).
  static HessianModel fixed(Matrix H) {
    HessianModel model;
    model.update(H);
    return model;
  }

  /// H_s = s/(s+1) H_{s-1} + 1/(s+1) H_hat, where s estimates were averaged before.
  void update(const Matrix& sample) {
    detail::require(sample.rows() == sample.cols(), "Hessian estimate must be square");
    const auto s = static_cast<double>(count_);
    if (count_ == 0) {
      average_ = sample;
    } else {
      detail::require(sample.rows() == average_.rows(), "Hessian estimate changed dimension");
      average_ = (s / (s + 1.0)) * average_ + (1.0 / (s + 1.0)) * sample;
    }
    ++count_;
    factorization_.emplace(average_);
  }

  Index count() const { return count_; }
  bool valid() const { return factorization_.has_value(); }
  const Matrix& average() const { return average_; }

  const SpdFactorization& factorization() const {
    if (!factorization_) throw ContractViolation("Hessian model holds no estimate yet");
    return *factorization_;
  }

  Vector solve(const Vector& g) const { return factorization().solve(g); }

 private:
  Matrix average_;
  Index count_ = 0;
  std::optional<SpdFactorization> factorization_;
};

struct ArmijoResult {
  double eta = 1.0;
  double f_new = 0.0;
};

namespace detail {

// f(x + eta v) is compared against the Armijo bound with a few ulps of f(x)
// allowance; without it a step at the optimum fails on roundoff alone.
inline double roundoff_allowance(double f) {
  return 8.0 * std::numeric_limits<double>::epsilon() * std::abs(f);
}

}  // namespace detail

/// Largest eta in {1, beta, beta^2, ...} with f(x + eta v) <= f(x) + c eta g^T v.
inline ArmijoResult armijo_search(const Objective& obj, const Vector& x, const Vector& v, const Vector& g,
                                  const ArmijoParams& params, std::optional<double> f_x = std::nullopt) {
  params.validate();
  const double slope = g.dot(v);
  if (!(slope < 0.0)) throw NotDescent("search direction is not a descent direction");
  const double f0 = f_x ? *f_x : obj.loss(x);
  double eta = 1.0;
  for (int halving = 0; halving <= params.max_halvings; ++halving) {
    const double f_new = obj.loss(x + eta * v);
    if (f_new <= f0 + params.c * eta * slope + detail::roundoff_allowance(f0)) return {eta, f_new};
    eta *= params.beta;
  }
  throw LineSearchFailed("Armijo backtracking exhausted its halvings");
}

/// Produces inner-loop gradient batches according to a resampling policy.
class GradientSampler {
 public:
  GradientSampler(const SamplingDistribution& dist, Index m, ResamplePolicy policy, BatchMode mode)
      : dist_(&dist), m_(m), policy_(policy), mode_(mode) {
    detail::require(m >= 1, "gradient batch size must be positive");
    if (mode_ == BatchMode::Exhaustive) {
      batch_.resize(static_cast<std::size_t>(dist.size()));
      std::iota(batch_.begin(), batch_.end(), Index{0});
      have_batch_ = true;
    }
  }

  /// Called once at the start of every stage.
  void begin_stage(Rng& rng) {
    if (mode_ == BatchMode::Sampled && policy_ == ResamplePolicy::PerStage) draw(rng);
  }

  /// Batch for the next inner step.
  void next_step(Rng& rng) {
    if (mode_ == BatchMode::Exhaustive) return;
    if (policy_ == ResamplePolicy::PerStep || !have_batch_) draw(rng);
  }

  std::span<const Index> indices() const { return batch_; }
  std::span<const double> weights() const { return weights_; }
  Index batch_size() const { return static_cast<Index>(batch_.size()); }

 private:
  void draw(Rng& rng) {
    batch_ = dist_->sample(m_, rng);
    weights_ = dist_->weights(batch_);
    have_batch_ = true;
  }

  const SamplingDistribution* dist_;
  Index m_;
  ResamplePolicy policy_;
  BatchMode mode_;
  std::vector<Index> batch_;
  std::vector<double> weights_;
  bool have_batch_ = false;
};

/// One SVRN stage from x_stage with anchor gradient g_stage = grad f(x_stage):
///   x_{t+1} = x_t - B (g_hat(x_t) - g_hat(x_stage) + g_stage),
/// both g_hat evaluations sharing one batch. Returns x_{t_max}; adds the
/// component gradient evaluations it spent to `evals`.
inline Vector svrn_stage(const Objective& obj, const Vector& x_stage, const Vector& g_stage, const HessianModel& hess,
                         Index t_max, GradientSampler& sampler, Rng& rng, std::uint64_t* evals = nullptr) {
  detail::require(t_max >= 1, "t_max must be positive");
  if (!hess.valid()) throw ContractViolation("Hessian model holds no valid factorization");
  sampler.begin_stage(rng);
  Vector x = x_stage;
  for (Index t = 0; t < t_max; ++t) {
    sampler.next_step(rng);
    const Vector g_x = obj.batch_gradient(sampler.indices(), sampler.weights(), x);
    const Vector g_anchor = obj.batch_gradient(sampler.indices(), sampler.weights(), x_stage);
    const Vector g_bar = g_x - g_anchor + g_stage;
    x -= hess.solve(g_bar);
    if (evals) *evals += 2 * static_cast<std::uint64_t>(sampler.batch_size());
  }
  return x;
}

/// Convenience form that computes the anchor gradient itself (one full pass).
inline Vector svrn_stage(const Objective& obj, const Vector& x_stage, const HessianModel& hess, const SvrnConfig& cfg,
                         GradientSampler& sampler, Rng& rng, std::uint64_t* evals = nullptr) {
  cfg.validate();
  const Vector g_stage = obj.full_gradient(x_stage);
  if (evals) *evals += static_cast<std::uint64_t>(obj.n());
  return svrn_stage(obj, x_stage, g_stage, hess, cfg.t_max, sampler, rng, evals);
}

enum class HessianAveragedMethod { SvrnHa, SnHa, SngsHa };

inline std::string to_string(HessianAveragedMethod method) {
  switch (method) {
    case HessianAveragedMethod::SvrnHa: return "svrn-ha";
    case HessianAveragedMethod::SnHa: return "sn-ha";
    case HessianAveragedMethod::SngsHa: return "sngs-ha";
  }
  return "svrn-ha";
}

namespace detail {

// Directional decrease below this is indistinguishable from roundoff in f.
inline bool at_numerical_optimum(double slope, double f) { return -slope <= roundoff_allowance(f); }

inline RunResult hessian_averaged_run(const Objective& obj, const Vector& x0, const SvrnConfig& cfg,
                                      const std::optional<Reference>& ref, HessianAveragedMethod method,
                                      const SamplingDistribution& dist) {
  cfg.validate();
  require(x0.size() == obj.d(), "initial iterate has the wrong dimension");
  require(dist.size() == obj.n(), "distribution size must match the number of components");
  Rng hess_rng = stream_rng(cfg.seed, kHessianStream);
  Rng rng = stream_rng(cfg.seed, kGradientStream);
  const ErrorMetric metric(obj, x0, ref);
  TraceRecorder rec(to_string(method), cfg.seed, obj.n());
  HessianModel hess;
  const ResamplePolicy policy = method == HessianAveragedMethod::SngsHa ? ResamplePolicy::PerStep : cfg.resample;
  GradientSampler sampler(dist, cfg.m, policy, cfg.gradient_batches);

  Vector x = x0;
  double f = obj.loss(x);
  rec.record(0, metric(x, f), f, 0.0, Phase::Init);
  double eta_prev = 0.0;
  bool switched = false;

  for (int s = 0; s < cfg.max_outer; ++s) {
    if (cfg.hessian_batches == BatchMode::Exhaustive) {
      std::vector<Index> all(static_cast<std::size_t>(obj.n()));
      std::iota(all.begin(), all.end(), Index{0});
      hess.update(obj.batch_hessian(all, {}, x));
      rec.add_hessian_evals(all.size());
    } else {
      hess.update(subsampled_hessian(obj, x, cfg.k, dist, hess_rng));
      rec.add_hessian_evals(static_cast<std::uint64_t>(cfg.k));
    }
    const Vector g = obj.full_gradient(x);
    rec.add_gradient_evals(static_cast<std::uint64_t>(obj.n()));

    Vector v;
    Phase phase = Phase::SubsampledNewton;
    const bool stochastic = cfg.switch_rule == SwitchRule::Sticky ? switched : eta_prev >= 1.0;
    if (method == HessianAveragedMethod::SnHa || !stochastic) {
      v = -hess.solve(g);
    } else if (method == HessianAveragedMethod::SvrnHa) {
      std::uint64_t evals = 0;
      v = svrn_stage(obj, x, g, hess, cfg.t_max, sampler, rng, &evals) - x;
      rec.add_gradient_evals(evals);
      phase = Phase::Svrn;
    } else {
      Vector xt = x;
      sampler.begin_stage(rng);
      for (Index t = 0; t < cfg.t_max; ++t) {
        sampler.next_step(rng);
        xt -= hess.solve(obj.batch_gradient(sampler.indices(), sampler.weights(), xt));
        rec.add_gradient_evals(static_cast<std::uint64_t>(sampler.batch_size()));
      }
      v = xt - x;
      phase = Phase::GradientSubsampled;
    }

    const double slope = g.dot(v);
    double eta = 0.0;
    if (slope < 0.0 && !at_numerical_optimum(slope, f)) {
      try {
        const ArmijoResult ls = armijo_search(obj, x, v, g, cfg.armijo, f);
        eta = ls.eta;
        x += eta * v;
        f = ls.f_new;
      } catch (const LineSearchFailed& e) {
        throw LineSearchFailed(e.what(), rec.take());
      }
    } else if (phase == Phase::SubsampledNewton) {
      // The exact-gradient Newton direction has no measurable decrease left.
      rec.record(s + 1, metric(x, f), f, 0.0, Phase::Converged);
      break;
    }
    // A rejected stochastic direction leaves eta = 0, which routes the next
    // iteration through the subsampled Newton branch.
    eta_prev = eta;
    switched = switched || eta >= 1.0;
    const double err = metric(x, f);
    rec.record(s + 1, err, f, eta, phase);
    if (metric.has_reference() && err < cfg.tolerance) break;
  }
  return {x, rec.take()};
}

}  // namespace detail

/// Subsampled Variance-Reduced Newton with Hessian Averaging: subsampled
/// Newton steps until Armijo accepts a unit step, then SVRN stages; a
/// rejected unit step falls back to the Newton branch.
inline RunResult svrn_ha_run(const Objective& obj, const Vector& x0, const SvrnConfig& cfg,
                             const std::optional<Reference>& ref = std::nullopt) {
  return detail::hessian_averaged_run(obj, x0, cfg, ref, HessianAveragedMethod::SvrnHa,
                                      SamplingDistribution::uniform(obj.n()));
}

inline RunResult svrn_ha_run(const Objective& obj, const Vector& x0, const SvrnConfig& cfg,
                             const std::optional<Reference>& ref, const SamplingDistribution& dist) {
  return detail::hessian_averaged_run(obj, x0, cfg, ref, HessianAveragedMethod::SvrnHa, dist);
}

/// Subsampled Newton with Hessian averaging and no variance reduction.
inline RunResult sn_ha_run(const Objective& obj, const Vector& x0, const SvrnConfig& cfg,
                           const std::optional<Reference>& ref = std::nullopt) {
  return detail::hessian_averaged_run(obj, x0, cfg, ref, HessianAveragedMethod::SnHa,
                                      SamplingDistribution::uniform(obj.n()));
}

/// SVRN-HA with the correction -g_hat(x_stage) + g_stage removed; batches
/// are redrawn every inner step.
inline RunResult sngs_ha_run(const Objective& obj, const Vector& x0, const SvrnConfig& cfg,
                             const std::optional<Reference>& ref = std::nullopt) {
  return detail::hessian_averaged_run(obj, x0, cfg, ref, HessianAveragedMethod::SngsHa,
                                      SamplingDistribution::uniform(obj.n()));
}

/// SVRN stages with a fixed Hessian model (no averaging). With `armijo` set
/// each stage direction is step-size selected; otherwise the unit step is
/// taken unconditionally.
inline RunResult svrn_fixed_run(const Objective& obj, const Vector& x0, const HessianModel& hess,
                                const SvrnConfig& cfg, const std::optional<Reference>& ref,
                                const SamplingDistribution& dist, bool use_armijo) {
  cfg.validate();
  detail::require(dist.size() == obj.n(), "distribution size must match the number of components");
  Rng rng(cfg.seed);
  const ErrorMetric metric(obj, x0, ref);
  TraceRecorder rec("svrn", cfg.seed, obj.n());
  GradientSampler sampler(dist, cfg.m, cfg.resample, cfg.gradient_batches);
  Vector x = x0;
  double f = obj.loss(x);
  rec.record(0, metric(x, f), f, 0.0, Phase::Init);
  for (int s = 0; s < cfg.max_outer; ++s) {
    const Vector g = obj.full_gradient(x);
    rec.add_gradient_evals(static_cast<std::uint64_t>(obj.n()));
    std::uint64_t evals = 0;
    const Vector v = svrn_stage(obj, x, g, hess, cfg.t_max, sampler, rng, &evals) - x;
    rec.add_gradient_evals(evals);
    double eta = 1.0;
    if (use_armijo) {
      const double slope = g.dot(v);
      if (slope < 0.0 && !detail::at_numerical_optimum(slope, f)) {
        try {
          const ArmijoResult ls = armijo_search(obj, x, v, g, cfg.armijo, f);
          eta = ls.eta;
          f = ls.f_new;
        } catch (const LineSearchFailed& e) {
          throw LineSearchFailed(e.what(), rec.take());
        }
      } else {
        eta = 0.0;
      }
      x += eta * v;
    } else {
      x += v;
      f = obj.loss(x);
    }
    const double err = metric(x, f);
    rec.record(s + 1, err, f, eta, Phase::Svrn);
    if (metric.has_reference() && err < cfg.tolerance) break;
  }
  return {x, rec.take()};
}

/// Classical damped Newton with exact Hessians and gradients.
inline RunResult newton_run(const Objective& obj, const Vector& x0, const ArmijoParams& armijo, int max_outer,
                            const std::optional<Reference>& ref = std::nullopt, double tolerance = 1e-13) {
  armijo.validate();
  detail::require(max_outer >= 1, "max_outer must be positive");
  const ErrorMetric metric(obj, x0, ref);
  TraceRecorder rec("newton", 0, obj.n());
  Vector x = x0;
  double f = obj.loss(x);
  rec.record(0, metric(x, f), f, 0.0, Phase::Init);
  for (int s = 0; s < max_outer; ++s) {
    const Matrix H = obj.full_hessian(x);
    rec.add_hessian_evals(static_cast<std::uint64_t>(obj.n()));
    const Vector g = obj.full_gradient(x);
    rec.add_gradient_evals(static_cast<std::uint64_t>(obj.n()));
    const Vector v = -SpdFactorization(H).solve(g);
    const double slope = g.dot(v);
    if (!(slope < 0.0) || detail::at_numerical_optimum(slope, f)) {
      rec.record(s + 1, metric(x, f), f, 0.0, Phase::Converged);
      break;
    }
    ArmijoResult ls;
    try {
      ls = armijo_search(obj, x, v, g, armijo, f);
    } catch (const LineSearchFailed& e) {
      throw LineSearchFailed(e.what(), rec.take());
    }
    x += ls.eta * v;
    f = ls.f_new;
    const double err = metric(x, f);
    rec.record(s + 1, err, f, ls.eta, Phase::Newton);
    if (metric.has_reference() && err < tolerance) break;
  }
  return {x, rec.take()};
}

struct SvrgConfig {
  double eta = 0.0;
  Index inner_m = 0;
  int max_outer = 20;
  std::uint64_t seed = 0;
  double divergence_threshold = 1e6;
  double tolerance = 1e-13;
};

/// SVRG with single-sample inner steps; the outer iterate is the last inner one.
inline RunResult svrg_run(const Objective& obj, const Vector& x0, const SvrgConfig& cfg,
                          const std::optional<Reference>& ref = std::nullopt) {
  detail::require(cfg.eta > 0.0 && std::isfinite(cfg.eta), "SVRG step size must be positive");
  detail::require(cfg.inner_m >= 1, "SVRG inner loop length must be positive");
  detail::require(cfg.max_outer >= 1, "max_outer must be positive");
  Rng rng(cfg.seed);
  const ErrorMetric metric(obj, x0, ref);
  TraceRecorder rec("svrg", cfg.seed, obj.n());
  std::uniform_int_distribution<Index> pick(0, obj.n() - 1);

  Vector x = x0;
  double f = obj.loss(x);
  rec.record(0, metric(x, f), f, 0.0, Phase::Init);
  for (int s = 0; s < cfg.max_outer; ++s) {
    const Vector anchor = x;
    const Vector g_anchor = obj.full_gradient(anchor);
    rec.add_gradient_evals(static_cast<std::uint64_t>(obj.n()));
    for (Index t = 0; t < cfg.inner_m; ++t) {
      const Index i = pick(rng);
      x -= cfg.eta * (obj.component_gradient(i, x) - obj.component_gradient(i, anchor) + g_anchor);
    }
    rec.add_gradient_evals(2 * static_cast<std::uint64_t>(cfg.inner_m));
    f = obj.loss(x);
    const double err = metric(x, f);
    rec.record(s + 1, err, f, cfg.eta, Phase::Svrg);
    if (!std::isfinite(err) || !std::isfinite(f) || err > cfg.divergence_threshold) {
      throw Diverged("SVRG diverged: error metric " + std::to_string(err));
    }
    if (metric.has_reference() && err < cfg.tolerance) break;
  }
  return {x, rec.take()};
}

/// Sweeps eta over {2^-1, ..., 2^-12} / lambda and keeps the run with the
/// smallest final error; diverged step sizes are skipped.
inline RunResult svrg_tuned_run(const Objective& obj, const Vector& x0, double lambda, SvrgConfig cfg,
                                const std::optional<Reference>& ref = std::nullopt) {
  detail::require(lambda > 0.0, "smoothness constant must be positive");
  std::optional<RunResult> best;
  for (int p = 1; p <= 12; ++p) {
    cfg.eta = std::ldexp(1.0, -p) / lambda;
    try {
      RunResult r = svrg_run(obj, x0, cfg, ref);
      if (!best || r.trace.last().err < best->trace.last().err) best = std::move(r);
    } catch (const Diverged&) {
    }
  }
  if (!best) throw Diverged("every SVRG step size in the sweep diverged");
  return std::move(*best);
}

struct ProbeStats {
  double mean = 0.0;
  double median = 0.0;
  double q10 = 0.0;
  double q90 = 0.0;
  double mean_unnormalized = 0.0;
  double normalizer = 0.0;  // ||x - x*||^2 in the Hessian norm at x
  Index trials = 0;
};

/// Monte-Carlo estimate of ||g_hat(x) - g_hat(x*) + grad f(x*) - grad f(x)||^2
/// in the inverse-Hessian norm at x, relative to ||x - x*||^2 in the Hessian
/// norm at x.
inline ProbeStats variance_probe(const Objective& obj, const Vector& x, const Vector& x_star, Index m, Index trials,
                                 Rng& rng, const SamplingDistribution& dist,
                                 BatchMode mode = BatchMode::Sampled) {
  detail::require(trials >= 1, "probe needs at least one trial");
  detail::require(dist.size() == obj.n(), "distribution size must match the number of components");
  const SpdFactorization H(obj.full_hessian(x));
  const Vector delta = x - x_star;
  const double normalizer = delta.dot(H.matrix() * delta);
  detail::require(normalizer > 0.0, "probe point must differ from the optimum");
  const Vector g_x = obj.full_gradient(x);
  const Vector g_star = obj.full_gradient(x_star);

  GradientSampler sampler(dist, m, ResamplePolicy::PerStep, mode);
  std::vector<double> errors(static_cast<std::size_t>(trials));
  for (auto& e : errors) {
    sampler.next_step(rng);
    const Vector gx = obj.batch_gradient(sampler.indices(), sampler.weights(), x);
    const Vector gs = obj.batch_gradient(sampler.indices(), sampler.weights(), x_star);
    const Vector err = (gx - g_x) - (gs - g_star);
    const double q = H.inverse_norm(err);
    e = q * q;
  }
  ProbeStats out;
  out.trials = trials;
  out.normalizer = normalizer;
  out.mean_unnormalized = std::accumulate(errors.begin(), errors.end(), 0.0) / static_cast<double>(trials);
  out.mean = out.mean_unnormalized / normalizer;
  std::sort(errors.begin(), errors.end());
  const auto quantile = [&](double q) {
    const auto pos = static_cast<std::size_t>(std::floor(q * static_cast<double>(errors.size() - 1)));
    return errors[pos] / normalizer;
  };
  out.median = quantile(0.5);
  out.q10 = quantile(0.1);
  out.q90 = quantile(0.9);
  return out;
}

inline ProbeStats variance_probe(const Objective& obj, const Vector& x, const Vector& x_star, Index m, Index trials,
                                 Rng& rng) {
  return variance_probe(obj, x, x_star, m, trials, rng, SamplingDistribution::uniform(obj.n()));
}

}  // namespace svrn

#endif  // SVRN_OPTIMIZERS_HPP
