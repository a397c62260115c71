#ifndef SVRN_TRACE_HPP
#define SVRN_TRACE_HPP

#include <chrono>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "svrn/errors.hpp"
#include "svrn/linalg.hpp"
#include "svrn/problem.hpp"

namespace svrn {

enum class Phase { Init, SubsampledNewton, Svrn, GradientSubsampled, Newton, Svrg, Converged };

inline std::string to_string(Phase phase) {
  switch (phase) {
    case Phase::Init: return "init";
    case Phase::SubsampledNewton: return "sn";
    case Phase::Svrn: return "svrn";
    case Phase::GradientSubsampled: return "sngs";
    case Phase::Newton: return "newton";
    case Phase::Svrg: return "svrg";
    case Phase::Converged: return "converged";
  }
  return "unknown";
}

/// One outer iteration. `passes` is gradient_evals / n; wall time is the only
/// nondeterministic field.
struct TraceRecord {
  int s = 0;
  std::uint64_t gradient_evals = 0;
  std::uint64_t hessian_evals = 0;
  double passes = 0.0;
  double err = 1.0;
  double loss = 0.0;
  double eta = 0.0;
  Phase phase = Phase::Init;
  double wall_s = 0.0;
};

struct ConvergenceTrace {
  std::string solver;
  std::uint64_t seed = 0;
  Index n = 0;
  std::vector<TraceRecord> records;

  const TraceRecord& last() const { return records.back(); }

  double min_err() const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : records) best = std::min(best, r.err);
    return best;
  }
};

/// Trusted optimum used by the error metric.
struct Reference {
  Vector x_star;
  Matrix hessian;
  double f_star = 0.0;
};

/// ||x - x*||_H^2 / ||x0 - x*||_H^2 with H the Hessian at x*, or the raw loss
/// when no reference is available.
class ErrorMetric {
 public:
  ErrorMetric(const Objective& obj, const Vector& x0, const std::optional<Reference>& ref) {
    if (ref) {
      detail::require(ref->x_star.size() == obj.d(), "reference optimum has the wrong dimension");
      ref_ = *ref;
      const double q = squared_distance(x0);
      denominator_ = q > 0.0 ? q : 1.0;
    }
  }

  bool has_reference() const { return ref_.has_value(); }

  double operator()(const Vector& x, double loss) const {
    if (!ref_) return loss;
    return squared_distance(x) / denominator_;
  }

 private:
  double squared_distance(const Vector& x) const {
    const Vector delta = x - ref_->x_star;
    return std::max(delta.dot(ref_->hessian * delta), 0.0);
  }

  std::optional<Reference> ref_;
  double denominator_ = 1.0;
};

/// Accumulates records with integer evaluation bookkeeping and a monotonic clock.
class TraceRecorder {
 public:
  TraceRecorder(std::string solver, std::uint64_t seed, Index n) : start_(std::chrono::steady_clock::now()) {
    trace_.solver = std::move(solver);
    trace_.seed = seed;
    trace_.n = n;
  }

  void add_gradient_evals(std::uint64_t count) { gradient_evals_ += count; }
  void add_hessian_evals(std::uint64_t count) { hessian_evals_ += count; }
  std::uint64_t gradient_evals() const { return gradient_evals_; }

  void record(int s, double err, double loss, double eta, Phase phase) {
    TraceRecord r;
    r.s = s;
    r.gradient_evals = gradient_evals_;
    r.hessian_evals = hessian_evals_;
    r.passes = static_cast<double>(gradient_evals_) / static_cast<double>(trace_.n);
    r.err = err;
    r.loss = loss;
    r.eta = eta;
    r.phase = phase;
    r.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    trace_.records.push_back(r);
  }

  const ConvergenceTrace& trace() const { return trace_; }
  ConvergenceTrace take() { return std::move(trace_); }

 private:
  ConvergenceTrace trace_;
  std::uint64_t gradient_evals_ = 0;
  std::uint64_t hessian_evals_ = 0;
  std::chrono::steady_clock::time_point start_;
};

/// Armijo backtracking exhausted its halvings. Carries the trace so far.
class LineSearchFailed : public Error {
 public:
  explicit LineSearchFailed(const std::string& what, ConvergenceTrace trace = {})
      : Error(what), trace_(std::move(trace)) {}
  const ConvergenceTrace& trace() const { return trace_; }

 private:
  ConvergenceTrace trace_;
};

struct RunResult {
  Vector x;
  ConvergenceTrace trace;
};

}  // namespace svrn

#endif  // SVRN_TRACE_HPP
