#ifndef SVRN_SVRN_HPP
#define SVRN_SVRN_HPP

#include "svrn/errors.hpp"
#include "svrn/harness.hpp"
#include "svrn/linalg.hpp"
#include "svrn/lsq_solver.hpp"
#include "svrn/optimizers.hpp"
#include "svrn/problem.hpp"
#include "svrn/sampling.hpp"
#include "svrn/trace.hpp"

#endif  // SVRN_SVRN_HPP
