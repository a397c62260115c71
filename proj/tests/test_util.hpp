#pragma once

#include <random>

#include <svrn/svrn.hpp>

namespace testutil {

using svrn::Index;
using svrn::Matrix;
using svrn::RowMatrix;
using svrn::Vector;

inline RowMatrix gaussian(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  RowMatrix A(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) A(i, j) = nd(rng);
  return A;
}

inline Vector gaussian_vector(Index n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, scale);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = nd(rng);
  return v;
}

inline svrn::ProblemInstance random_instance(svrn::Task task, Index n, Index d, double gamma, std::uint64_t seed) {
  svrn::ProblemInstance inst;
  inst.A = gaussian(n, d, seed);
  inst.task = task;
  inst.gamma = gamma;
  inst.y = gaussian_vector(n, seed + 1000);
  if (task == svrn::Task::Logistic)
    for (Index i = 0; i < n; ++i) inst.y[i] = inst.y[i] >= 0.0 ? 1.0 : -1.0;
  return inst;
}

inline Matrix random_spd(Index d, std::uint64_t seed, double shift = 1.0) {
  const Matrix G = gaussian(d, d, seed);
  Matrix M = G.transpose() * G;
  M.diagonal().array() += shift;
  return M;
}

inline double rel(const Vector& a, const Vector& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

inline svrn::SyntheticProblem lsq_synthetic(Index n, Index d, double kappa, std::uint64_t seed,
                                            svrn::Coherence c = svrn::Coherence::Gaussian) {
  svrn::SyntheticSpec spec;
  spec.n = n;
  spec.d = d;
  spec.kappa_A = kappa;
  spec.coherence = c;
  spec.task = svrn::Task::LeastSquares;
  spec.seed = seed;
  return svrn::gen_synthetic(spec);
}

}  // namespace testutil
