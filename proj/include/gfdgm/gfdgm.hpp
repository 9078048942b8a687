#ifndef GFDGM_GFDGM_HPP
#define GFDGM_GFDGM_HPP

#include "gfdgm/admm.hpp"
#include "gfdgm/bench.hpp"
#include "gfdgm/closed_loop.hpp"
#include "gfdgm/curvature.hpp"
#include "gfdgm/dual.hpp"
#include "gfdgm/error.hpp"
#include "gfdgm/metric.hpp"
#include "gfdgm/mpc.hpp"
#include "gfdgm/numkern.hpp"
#include "gfdgm/problem.hpp"
#include "gfdgm/problem_io.hpp"
#include "gfdgm/prox.hpp"
#include "gfdgm/reference.hpp"
#include "gfdgm/sdp.hpp"
#include "gfdgm/solver.hpp"

#endif  // GFDGM_GFDGM_HPP
