#ifndef SVRN_PROBLEM_HPP
#define SVRN_PROBLEM_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "svrn/errors.hpp"

namespace svrn {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
// Rows a_i^T are touched one at a time by every stochastic routine.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Task { Logistic, LeastSquares };

inline std::string to_string(Task task) {
  return task == Task::Logistic ? "logistic" : "lsq";
}

inline Task parse_task(const std::string& name) {
  if (name == "logistic" || name == "logreg") return Task::Logistic;
  if (name == "lsq" || name == "least-squares" || name == "least_squares" || name == "leastsquares") return Task::LeastSquares;
  throw ConfigError("unknown task '" + name + "'");
}

/// Dense data for f(x) = (1/n) sum_i psi_i(x), where every component
/// carries the full gamma/2 ||x||^2 regularizer.
struct ProblemInstance {
  RowMatrix A;
  Vector y;
  double gamma = 0.0;
  Task task = Task::LeastSquares;

  Index n() const { return A.rows(); }
  Index d() const { return A.cols(); }

  void validate() const {
    detail::require(A.rows() >= 1 && A.cols() >= 1, "problem needs n >= 1 and d >= 1");
    detail::require(y.size() == A.rows(), "target length must equal the number of rows");
    detail::require(gamma >= 0.0 && std::isfinite(gamma), "gamma must be finite and nonnegative");
    if (task == Task::Logistic) {
      for (Index i = 0; i < y.size(); ++i) {
        detail::require(y[i] == 1.0 || y[i] == -1.0, "logistic labels must be +1 or -1");
      }
    }
  }
};

namespace detail {

// 1/(1+e^{-z}) without overflow for large |z|.
inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1+e^{z})
inline double softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

}  // namespace detail

/// Finite-sum objective over a shared, immutable ProblemInstance.
///
/// Importance-reweighted batches scale only the data term of each component
/// by its weight 1/(n p_i); the regularizer gamma*x is added once, unweighted,
/// so that the sampled estimate is unbiased under any distribution.
///
/// The objective counts component gradient and Hessian evaluations (a full
/// gradient counts n). Counters are atomic, so concurrent read-only use is safe.
class Objective {
 public:
  explicit Objective(ProblemInstance instance)
      : instance_(std::make_shared<const ProblemInstance>(std::move(instance))) {
    instance_->validate();
  }

  explicit Objective(std::shared_ptr<const ProblemInstance> instance) : instance_(std::move(instance)) {
    detail::require(instance_ != nullptr, "objective needs a problem instance");
    instance_->validate();
  }

  Objective(const Objective& other)
      : instance_(other.instance_),
        gradient_evals_(other.gradient_evals()),
        hessian_evals_(other.hessian_evals()) {}

  Objective& operator=(const Objective& other) {
    instance_ = other.instance_;
    gradient_evals_.store(other.gradient_evals());
    hessian_evals_.store(other.hessian_evals());
    return *this;
  }

  const ProblemInstance& instance() const { return *instance_; }
  std::shared_ptr<const ProblemInstance> shared_instance() const { return instance_; }
  Index n() const { return instance_->n(); }
  Index d() const { return instance_->d(); }
  double gamma() const { return instance_->gamma; }
  Task task() const { return instance_->task; }

  std::uint64_t gradient_evals() const { return gradient_evals_.load(std::memory_order_relaxed); }
  std::uint64_t hessian_evals() const { return hessian_evals_.load(std::memory_order_relaxed); }
  void reset_counters() {
    gradient_evals_.store(0);
    hessian_evals_.store(0);
  }

  /// Data part of psi_i at x (no regularizer).
  double component_data_loss(Index i, const Vector& x) const {
    check_index(i);
    const double z = instance_->A.row(i).dot(x);
    return data_loss(i, z);
  }

  double loss(const Vector& x) const {
    check_dim(x);
    const auto& inst = *instance_;
    double sum = 0.0;
    for (Index i = 0; i < inst.n(); ++i) sum += data_loss(i, inst.A.row(i).dot(x));
    return sum / static_cast<double>(inst.n()) + 0.5 * inst.gamma * x.squaredNorm();
  }

  /// Scalar c_i with grad(data_i)(x) = c_i a_i.
  double gradient_coefficient(Index i, double z) const {
    const auto& inst = *instance_;
    if (inst.task == Task::LeastSquares) return z - inst.y[i];
    const double yi = inst.y[i];
    return -yi * detail::sigmoid(-yi * z);
  }

  /// Scalar h_i >= 0 with hess(data_i)(x) = h_i a_i a_i^T.
  double hessian_coefficient(double z) const {
    if (instance_->task == Task::LeastSquares) return 1.0;
    const double s = detail::sigmoid(z);
    return s * (1.0 - s);
  }

  Vector component_gradient(Index i, const Vector& x) const {
    check_index(i);
    check_dim(x);
    const auto& inst = *instance_;
    gradient_evals_.fetch_add(1, std::memory_order_relaxed);
    const double c = gradient_coefficient(i, inst.A.row(i).dot(x));
    return c * inst.A.row(i).transpose() + inst.gamma * x;
  }

  Matrix component_hessian(Index i, const Vector& x) const {
    check_index(i);
    check_dim(x);
    const auto& inst = *instance_;
    hessian_evals_.fetch_add(1, std::memory_order_relaxed);
    const Vector a = inst.A.row(i).transpose();
    const double h = hessian_coefficient(a.dot(x));
    Matrix out = (a * a.transpose()).eval();
    out *= h;
    out.diagonal().array() += inst.gamma;
    return out;
  }

  /// (1/|I|) sum_{i in I} w_i grad(data_i)(x) + gamma x, summed in index order.
  /// An empty weight span means unit weights.
  Vector batch_gradient(std::span<const Index> indices, std::span<const double> weights, const Vector& x) const {
    check_dim(x);
    detail::require(!indices.empty(), "batch must contain at least one index");
    detail::require(weights.empty() || weights.size() == indices.size(), "one weight per batch index");
    const auto& inst = *instance_;
    Vector g = Vector::Zero(inst.d());
    for (std::size_t j = 0; j < indices.size(); ++j) {
      const Index i = indices[j];
      check_index(i);
      double c = gradient_coefficient(i, inst.A.row(i).dot(x));
      if (!weights.empty()) c *= weights[j];
      g.noalias() += c * inst.A.row(i).transpose();
    }
    g /= static_cast<double>(indices.size());
    g += inst.gamma * x;
    gradient_evals_.fetch_add(indices.size(), std::memory_order_relaxed);
    return g;
  }

  Vector full_gradient(const Vector& x) const {
    check_dim(x);
    const auto& inst = *instance_;
    Vector g = Vector::Zero(inst.d());
    for (Index i = 0; i < inst.n(); ++i) {
      const double c = gradient_coefficient(i, inst.A.row(i).dot(x));
      g.noalias() += c * inst.A.row(i).transpose();
    }
    g /= static_cast<double>(inst.n());
    g += inst.gamma * x;
    gradient_evals_.fetch_add(static_cast<std::uint64_t>(inst.n()), std::memory_order_relaxed);
    return g;
  }

  /// (1/|I|) sum_{i in I} w_i hess(data_i)(x) + gamma I.
  Matrix batch_hessian(std::span<const Index> indices, std::span<const double> weights, const Vector& x) const {
    check_dim(x);
    detail::require(!indices.empty(), "batch must contain at least one index");
    detail::require(weights.empty() || weights.size() == indices.size(), "one weight per batch index");
    const auto& inst = *instance_;
    const auto k = static_cast<Index>(indices.size());
    Matrix scaled(k, inst.d());
    for (Index j = 0; j < k; ++j) {
      const Index i = indices[static_cast<std::size_t>(j)];
      check_index(i);
      double h = hessian_coefficient(inst.A.row(i).dot(x));
      if (!weights.empty()) h *= weights[static_cast<std::size_t>(j)];
      detail::require(h >= 0.0, "importance weights must be nonnegative");
      scaled.row(j) = std::sqrt(h) * inst.A.row(i);
    }
    Matrix H = Matrix::Zero(inst.d(), inst.d());
    H.selfadjointView<Eigen::Lower>().rankUpdate(scaled.transpose(), 1.0 / static_cast<double>(k));
    H.triangularView<Eigen::StrictlyUpper>() = H.transpose();
    H.diagonal().array() += inst.gamma;
    hessian_evals_.fetch_add(indices.size(), std::memory_order_relaxed);
    return H;
  }

  Matrix full_hessian(const Vector& x) const {
    check_dim(x);
    const auto& inst = *instance_;
    Vector h(inst.n());
    for (Index i = 0; i < inst.n(); ++i) h[i] = hessian_coefficient(inst.A.row(i).dot(x));
    Matrix H = Matrix::Zero(inst.d(), inst.d());
    const RowMatrix scaled = h.cwiseSqrt().asDiagonal() * inst.A;
    H.selfadjointView<Eigen::Lower>().rankUpdate(scaled.transpose(), 1.0 / static_cast<double>(inst.n()));
    H.triangularView<Eigen::StrictlyUpper>() = H.transpose();
    H.diagonal().array() += inst.gamma;
    hessian_evals_.fetch_add(static_cast<std::uint64_t>(inst.n()), std::memory_order_relaxed);
    return H;
  }

 private:
  double data_loss(Index i, double z) const {
    const auto& inst = *instance_;
    if (inst.task == Task::LeastSquares) {
      const double r = z - inst.y[i];
      return 0.5 * r * r;
    }
    return detail::softplus(-inst.y[i] * z);
  }

  void check_index(Index i) const {
    if (i < 0 || i >= instance_->n()) throw ContractViolation("component index out of range");
  }

  void check_dim(const Vector& x) const {
    if (x.size() != instance_->d()) throw ContractViolation("iterate dimension does not match the problem");
  }

  std::shared_ptr<const ProblemInstance> instance_;
  mutable std::atomic<std::uint64_t> gradient_evals_{0};
  mutable std::atomic<std::uint64_t> hessian_evals_{0};
};

/// Strong convexity / smoothness diagnostics. For logistic regression mu is a
/// local estimate taken from the Hessian at `at` (default: the origin).
struct SmoothnessEstimates {
  double mu = 0.0;
  double lambda = 0.0;
  double kappa = 0.0;
  double lambda_without_gamma = 0.0;
};

inline SmoothnessEstimates strong_smooth_estimates(const ProblemInstance& inst,
                                                   const std::optional<Vector>& at = std::nullopt) {
  inst.validate();
  detail::require(static_cast<double>(inst.n()) * static_cast<double>(inst.d()) <= 1e8,
                  "problem too large for a dense eigendecomposition");
  const double max_row = inst.A.rowwise().squaredNorm().maxCoeff();
  const double curvature_cap = inst.task == Task::Logistic ? 0.25 : 1.0;

  Matrix data_hessian;
  if (inst.task == Task::LeastSquares) {
    data_hessian = inst.A.transpose() * inst.A / static_cast<double>(inst.n());
  } else {
    ProblemInstance unregularized = inst;
    unregularized.gamma = 0.0;
    const Objective obj(std::move(unregularized));
    data_hessian = obj.full_hessian(at.value_or(Vector::Zero(inst.d())));
  }
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(data_hessian, Eigen::EigenvaluesOnly);
  SmoothnessEstimates out;
  out.mu = std::max(eig.eigenvalues()[0], 0.0) + inst.gamma;
  out.lambda_without_gamma = curvature_cap * max_row;
  out.lambda = out.lambda_without_gamma + inst.gamma;
  if (!(out.mu > 0.0)) throw NotStronglyConvex("strong convexity constant is not positive");
  out.kappa = out.lambda / out.mu;
  return out;
}

}  // namespace svrn

#endif  // SVRN_PROBLEM_HPP
