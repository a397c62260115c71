#ifndef SVRN_SAMPLING_HPP
#define SVRN_SAMPLING_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "svrn/errors.hpp"
#include "svrn/linalg.hpp"
#include "svrn/problem.hpp"

namespace svrn {

using Rng = std::mt19937_64;

/// Named substreams of one run seed; Hessian samples and gradient batches
/// draw from separate streams so paired runs see the same Hessian sequence.
inline constexpr std::uint64_t kHessianStream = 1;
inline constexpr std::uint64_t kGradientStream = 2;

inline Rng stream_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return Rng(seq);
}

/// Probability vector over component indices with an inverse-CDF sampler.
/// Components drawn with probability p_i carry importance weight 1/(n p_i).
class SamplingDistribution {
 public:
  static SamplingDistribution uniform(Index n) {
    detail::require(n >= 1, "distribution needs at least one outcome");
    SamplingDistribution dist;
    dist.uniform_ = true;
    dist.p_.assign(static_cast<std::size_t>(n), 1.0 / static_cast<double>(n));
    dist.build_cdf();
    return dist;
  }

  /// Normalizes nonnegative masses into probabilities.
  explicit SamplingDistribution(std::vector<double> mass) : p_(std::move(mass)) {
    detail::require(!p_.empty(), "distribution needs at least one outcome");
    double total = 0.0;
    for (const double m : p_) {
      detail::require(m >= 0.0 && std::isfinite(m), "probability mass must be finite and nonnegative");
      total += m;
    }
    if (!(total > 0.0)) throw ContractViolation("distribution has zero total mass");
    for (double& m : p_) m /= total;
    build_cdf();
  }

  Index size() const { return static_cast<Index>(p_.size()); }
  bool is_uniform() const { return uniform_; }
  std::span<const double> probabilities() const { return p_; }
  std::span<const double> cumulative() const { return cdf_; }
  double probability(Index i) const { return p_[static_cast<std::size_t>(i)]; }

  /// 1/(n p_i); unity for the uniform distribution.
  double weight(Index i) const {
    if (uniform_) return 1.0;
    return 1.0 / (static_cast<double>(p_.size()) * p_[static_cast<std::size_t>(i)]);
  }

  Index draw(Rng& rng) const {
    if (uniform_) {
      std::uniform_int_distribution<Index> pick(0, size() - 1);
      return pick(rng);
    }
    std::uniform_real_distribution<double> u(0.0, cdf_.back());
    const double r = u(rng);
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), r);
    const auto i = static_cast<Index>(std::min<std::ptrdiff_t>(it - cdf_.begin(), size() - 1));
    return i;
  }

  std::vector<Index> sample(Index m, Rng& rng) const {
    detail::require(m >= 1, "batch size must be positive");
    std::vector<Index> out(static_cast<std::size_t>(m));
    for (auto& i : out) i = draw(rng);
    return out;
  }

  std::vector<double> weights(std::span<const Index> indices) const {
    if (uniform_) return {};
    std::vector<double> w(indices.size());
    for (std::size_t j = 0; j < indices.size(); ++j) w[j] = weight(indices[j]);
    return w;
  }

 private:
  SamplingDistribution() = default;

  void build_cdf() {
    cdf_.resize(p_.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < p_.size(); ++i) {
      acc += p_[i];
      cdf_[i] = acc;
    }
  }

  std::vector<double> p_;
  std::vector<double> cdf_;
  bool uniform_ = false;
};

/// m i.i.d. uniform indices in [0, n), with replacement.
inline std::vector<Index> uniform_batch(Index n, Index m, Rng& rng) {
  detail::require(n >= 1, "population must be nonempty");
  detail::require(m >= 1, "batch size must be positive");
  std::uniform_int_distribution<Index> pick(0, n - 1);
  std::vector<Index> out(static_cast<std::size_t>(m));
  for (auto& i : out) i = pick(rng);
  return out;
}

/// l_i = a_i^T (A^T A)^{-1} a_i, as squared row norms of the thin Q factor.
template <typename Derived>
Vector leverage_scores(const Eigen::MatrixBase<Derived>& A) {
  const Index n = A.rows();
  const Index d = A.cols();
  detail::require(n >= d && d >= 1, "leverage scores need n >= d >= 1");
  const Matrix dense = A;
  const Eigen::HouseholderQR<Matrix> qr(dense);
  const Vector rdiag = qr.matrixQR().diagonal().head(d).cwiseAbs();
  const double top = rdiag.maxCoeff();
  if (!(top > 0.0) || rdiag.minCoeff() <= 1e-12 * top) throw RankDeficient("matrix is not full column rank");
  const Matrix Q = qr.householderQ() * Matrix::Identity(n, d);
  return Q.rowwise().squaredNorm();
}

/// p_i = l_i / sum_j l_j, which gives p_i >= l_i / (2d) whenever sum_j l_j <= 2d.
inline SamplingDistribution leverage_distribution(const Vector& scores) {
  detail::require(scores.size() >= 1, "scores must be nonempty");
  if ((scores.array() < 0.0).any()) throw ContractViolation("leverage scores must be nonnegative");
  if (!(scores.sum() > 0.0)) throw ContractViolation("leverage scores are all zero");
  return SamplingDistribution(std::vector<double>(scores.data(), scores.data() + scores.size()));
}

/// Random sign diagonal D followed by the orthonormal Hadamard matrix H, on
/// inputs zero-padded to the next power of two.
struct RhtTransform {
  std::vector<double> signs;
  Index n = 0;
  Index n_pad = 0;

  static RhtTransform draw(Index n, Rng& rng) {
    detail::require(n >= 1, "transform needs at least one row");
    RhtTransform t;
    t.n = n;
    t.n_pad = static_cast<Index>(std::bit_ceil(static_cast<std::uint64_t>(n)));
    t.signs.resize(static_cast<std::size_t>(t.n_pad));
    std::bernoulli_distribution coin(0.5);
    for (auto& s : t.signs) s = coin(rng) ? 1.0 : -1.0;
    return t;
  }

  /// H D [M; 0] for an n-row input, returning n_pad rows.
  Matrix apply(const Matrix& M) const {
    detail::require(M.rows() == n, "transform input has the wrong row count");
    Matrix out = Matrix::Zero(n_pad, M.cols());
    for (Index i = 0; i < n; ++i) out.row(i) = signs[static_cast<std::size_t>(i)] * M.row(i);
    fwht_columns(out);
    return out;
  }
};

struct RhtResult {
  RowMatrix A;
  Vector y;
  RhtTransform transform;
};

/// Returns (HDA, HDy) on zero-padded inputs; ||HDA x - HDy|| = ||Ax - y|| for all x.
inline RhtResult rht_apply(const RowMatrix& A, const Vector& y, Rng& rng) {
  detail::require(A.rows() == y.size(), "target length must equal the number of rows");
  RhtTransform t = RhtTransform::draw(A.rows(), rng);
  Matrix joined(A.rows(), A.cols() + 1);
  joined.leftCols(A.cols()) = A;
  joined.col(A.cols()) = y;
  const Matrix mixed = t.apply(joined);
  RhtResult out;
  out.A = mixed.leftCols(A.cols());
  out.y = mixed.col(A.cols());
  out.transform = std::move(t);
  return out;
}

/// Least-squares instance on the transformed data, rescaled by sqrt(n_pad/n)
/// so the normalized objective (1/rows) sum psi_i is unchanged.
inline ProblemInstance rht_problem(const ProblemInstance& inst, Rng& rng) {
  detail::require(inst.task == Task::LeastSquares, "the Hadamard preconditioner applies to least squares");
  RhtResult r = rht_apply(inst.A, inst.y, rng);
  const double scale = std::sqrt(static_cast<double>(r.transform.n_pad) / static_cast<double>(inst.n()));
  ProblemInstance out;
  out.A = scale * r.A;
  out.y = scale * r.y;
  out.gamma = inst.gamma;
  out.task = inst.task;
  return out;
}

/// (1/k) sum of k sampled component Hessians (importance-reweighted) at x.
inline Matrix subsampled_hessian(const Objective& obj, const Vector& x, Index k, const SamplingDistribution& dist,
                                 Rng& rng) {
  detail::require(k >= 1, "Hessian sample size must be positive");
  detail::require(dist.size() == obj.n(), "distribution size must match the number of components");
  const std::vector<Index> idx = dist.sample(k, rng);
  const std::vector<double> w = dist.weights(idx);
  return obj.batch_hessian(idx, w, x);
}

}  // namespace svrn

#endif  // SVRN_SAMPLING_HPP
