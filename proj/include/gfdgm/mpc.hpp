#ifndef GFDGM_MPC_HPP
#define GFDGM_MPC_HPP

/**
 * @file
 * @brief Linear MPC condensed into a ComposedProblem.
 *
 * Stacked variable y = (x_0, ..., x_N, u_0, ..., u_{N-1}, slacks). Dynamics
 * and x_0 = xbar form A y = b(xbar). Outputs C x_t (t = 1..N) are softened with
 * one slack per finite bound and stage. Two forms are produced:
 *
 *  - condense_eqdual: the dynamics are dualized and h is the (soft) box,
 *  - condense_ineqdual: h is the dynamics indicator and g is a box over B y,
 *    with B stacking inputs, softened outputs and slack nonnegativity.
 */

#include <cmath>
#include <string>
#include <vector>

#include "gfdgm/error.hpp"
#include "gfdgm/numkern.hpp"
#include "gfdgm/problem.hpp"

namespace gfdgm {

/// x+ = Phi x + Gamma u, y = C x.
struct Plant
{
  Mat Phi;
  Mat Gamma;
  Mat C;

  Eigen::Index nx() const { return Phi.rows(); }
  Eigen::Index nu() const { return Gamma.cols(); }
  Eigen::Index ny() const { return C.rows(); }
};

/// Stage cost 1/2 ((x - x_r)^T Q (x - x_r) + u^T R u + s^T S s), terminal weight Qf.
struct MpcWeights
{
  Mat Q, R, Qf;
  Vec s_lo, s_hi;  ///< slack weights per output, lower and upper side
};

struct MpcInstance
{
  Plant plant;
  MpcWeights weights;
  int N = 1;
  Vec u_lo, u_hi;
  Vec y_lo, y_hi;  ///< soft output bounds (infinite entries are not constrained)
  Vec x0;          ///< initial state xbar
  Vec y_ref;       ///< output reference, held over the horizon

  void check() const
  {
    const auto nx = plant.nx(), nu = plant.nu(), ny = plant.ny();
    require(N >= 1, "MpcInstance: horizon must be at least 1");
    require(plant.Phi.cols() == nx && plant.Gamma.rows() == nx && plant.C.cols() == nx,
            "MpcInstance: plant dimensions are inconsistent");
    require(weights.Q.rows() == nx && weights.Q.cols() == nx && weights.Qf.rows() == nx && weights.Qf.cols() == nx,
            "MpcInstance: Q and Qf must be nx x nx");
    require(weights.R.rows() == nu && weights.R.cols() == nu, "MpcInstance: R must be nu x nu");
    require(weights.s_lo.size() == ny && weights.s_hi.size() == ny, "MpcInstance: slack weights need ny entries");
    require(u_lo.size() == nu && u_hi.size() == nu, "MpcInstance: input bounds need nu entries");
    require(u_lo.allFinite() && u_hi.allFinite(), "MpcInstance: input bounds must be finite");
    require(y_lo.size() == ny && y_hi.size() == ny, "MpcInstance: output bounds need ny entries");
    require(x0.size() == nx && y_ref.size() == ny, "MpcInstance: x0 / y_ref dimension mismatch");
  }
};

/// Positions inside the stacked vector y.
struct MpcLayout
{
  Eigen::Index nx = 0, nu = 0, ny = 0;
  int N = 0;
  /// slack index per (stage t = 1..N, output j, side): -1 when the bound is infinite
  std::vector<Eigen::Index> slack_lo, slack_hi;
  Eigen::Index n_slack = 0;

  Eigen::Index x(int t) const { return t * nx; }
  Eigen::Index u(int t) const { return (N + 1) * nx + t * nu; }
  Eigen::Index slack_begin() const { return (N + 1) * nx + N * nu; }
  Eigen::Index n() const { return slack_begin() + n_slack; }
  std::size_t key(int t, Eigen::Index j) const { return static_cast<std::size_t>((t - 1) * ny + j); }
};

inline MpcLayout mpc_layout(const MpcInstance& inst)
{
  MpcLayout l;
  l.nx = inst.plant.nx();
  l.nu = inst.plant.nu();
  l.ny = inst.plant.ny();
  l.N  = inst.N;
  l.slack_lo.assign(static_cast<std::size_t>(inst.N * l.ny), -1);
  l.slack_hi.assign(static_cast<std::size_t>(inst.N * l.ny), -1);
  Eigen::Index next = l.slack_begin();
  for (int t = 1; t <= inst.N; ++t)
    for (Eigen::Index j = 0; j < l.ny; ++j) {
      if (std::isfinite(inst.y_lo(j))) l.slack_lo[l.key(t, j)] = next++;
      if (std::isfinite(inst.y_hi(j))) l.slack_hi[l.key(t, j)] = next++;
    }
  l.n_slack = next - l.slack_begin();
  return l;
}

/// State target with C x_r = y_r of least norm.
inline Vec state_target(const Plant& plant, const Vec& y_ref)
{
  return plant.C.completeOrthogonalDecomposition().solve(y_ref);
}

/// Stacked cost blkdiag(Q, ..., Q, Qf, R, ..., R, S) and its linear term.
inline QuadCost mpc_cost(const MpcInstance& inst, const MpcLayout& l)
{
  const auto n = l.n();
  Mat h        = Mat::Zero(n, n);
  Vec zeta     = Vec::Zero(n);
  const Vec xr = state_target(inst.plant, inst.y_ref);
  for (int t = 0; t <= inst.N; ++t) {
    const Mat& q = t == inst.N ? inst.weights.Qf : inst.weights.Q;
    h.block(l.x(t), l.x(t), l.nx, l.nx) = q;
    zeta.segment(l.x(t), l.nx)         = -q * xr;
  }
  for (int t = 0; t < inst.N; ++t) h.block(l.u(t), l.u(t), l.nu, l.nu) = inst.weights.R;
  for (int t = 1; t <= inst.N; ++t)
    for (Eigen::Index j = 0; j < l.ny; ++j) {
      const auto lo = l.slack_lo[l.key(t, j)];
      const auto hi = l.slack_hi[l.key(t, j)];
      if (lo >= 0) h(lo, lo) = inst.weights.s_lo(j);
      if (hi >= 0) h(hi, hi) = inst.weights.s_hi(j);
    }
  return {SymMatrix(h), zeta};
}

/// Rows x_0 = xbar and x_{t+1} - Phi x_t - Gamma u_t = 0.
inline AffineEq mpc_dynamics(const MpcInstance& inst, const MpcLayout& l)
{
  const auto m = (inst.N + 1) * l.nx;
  AffineEq eq{Mat::Zero(m, l.n()), Vec::Zero(m)};
  eq.A.block(0, l.x(0), l.nx, l.nx).setIdentity();
  eq.b.head(l.nx) = inst.x0;
  for (int t = 0; t < inst.N; ++t) {
    const auto r = (t + 1) * l.nx;
    eq.A.block(r, l.x(t + 1), l.nx, l.nx).setIdentity();
    eq.A.block(r, l.x(t), l.nx, l.nx)  = -inst.plant.Phi;
    eq.A.block(r, l.u(t), l.nx, l.nu)  = -inst.plant.Gamma;
  }
  return eq;
}

/// Right-hand side b(xbar) of mpc_dynamics.
inline Vec mpc_rhs(const MpcInstance& inst, const Vec& xbar)
{
  Vec b = Vec::Zero((inst.N + 1) * inst.plant.nx());
  b.head(inst.plant.nx()) = xbar;
  return b;
}

/**
 * @brief Equality-dualized form: h is a box on inputs plus softened outputs.
 *
 * Each output row of C must select a single state so that the soft bound is
 * a bound on one coordinate of y.
 */
inline ComposedProblem condense_eqdual(const MpcInstance& inst)
{
  inst.check();
  const auto l = mpc_layout(inst);
  std::vector<Eigen::Index> out_state(static_cast<std::size_t>(l.ny), -1);
  for (Eigen::Index j = 0; j < l.ny; ++j) {
    Eigen::Index idx = -1, nnz = 0;
    for (Eigen::Index i = 0; i < l.nx; ++i)
      if (inst.plant.C(j, i) != 0.0) {
        ++nnz;
        idx = i;
      }
    if (nnz != 1 || inst.plant.C(j, idx) != 1.0)
      fail(ErrorKind::InvalidArgument, "condense_eqdual: output " + std::to_string(j) +
                                           " must select a single state for the soft-box form");
    out_state[static_cast<std::size_t>(j)] = idx;
  }

  ComposedProblem p;
  p.cost = mpc_cost(inst, l);
  p.eq   = mpc_dynamics(inst, l);
  hterm::SoftBoxCoupled h{Vec::Constant(l.n(), -kInf), Vec::Constant(l.n(), kInf), {}};
  for (int t = 0; t < inst.N; ++t) {
    h.lo.segment(l.u(t), l.nu) = inst.u_lo;
    h.hi.segment(l.u(t), l.nu) = inst.u_hi;
  }
  h.lo.tail(l.n_slack).setZero();
  for (int t = 1; t <= inst.N; ++t)
    for (Eigen::Index j = 0; j < l.ny; ++j) {
      const auto lo = l.slack_lo[l.key(t, j)];
      const auto hi = l.slack_hi[l.key(t, j)];
      if (lo < 0 && hi < 0) continue;
      h.soft.push_back({l.x(t) + out_state[static_cast<std::size_t>(j)], lo, hi, inst.y_lo(j), inst.y_hi(j)});
    }
  p.h = std::move(h);
  return p;
}

/// Inequality-dualized form: h = I{A y = b}, g = box over B y.
inline ComposedProblem condense_ineqdual(const MpcInstance& inst)
{
  inst.check();
  const auto l = mpc_layout(inst);
  const auto n = l.n();
  const auto rows = inst.N * l.nu + 2 * l.n_slack;
  Mat b  = Mat::Zero(rows, n);
  Vec lo = Vec::Constant(rows, -kInf);
  Vec hi = Vec::Constant(rows, kInf);
  Eigen::Index r = 0;
  for (int t = 0; t < inst.N; ++t)
    for (Eigen::Index i = 0; i < l.nu; ++i, ++r) {
      b(r, l.u(t) + i) = 1.0;
      lo(r) = inst.u_lo(i);
      hi(r) = inst.u_hi(i);
    }
  for (int t = 1; t <= inst.N; ++t)
    for (Eigen::Index j = 0; j < l.ny; ++j) {
      const auto slo = l.slack_lo[l.key(t, j)];
      const auto shi = l.slack_hi[l.key(t, j)];
      if (shi >= 0) {  // C_j x_t - s_hi <= ub
        b.row(r).segment(l.x(t), l.nx) = inst.plant.C.row(j);
        b(r, shi) = -1.0;
        hi(r++)   = inst.y_hi(j);
      }
      if (slo >= 0) {  // C_j x_t + s_lo >= lb
        b.row(r).segment(l.x(t), l.nx) = inst.plant.C.row(j);
        b(r, slo) = 1.0;
        lo(r++)   = inst.y_lo(j);
      }
    }
  for (Eigen::Index s = 0; s < l.n_slack; ++s, ++r) {
    b(r, l.slack_begin() + s) = 1.0;
    lo(r) = 0.0;
  }

  ComposedProblem p;
  p.cost = mpc_cost(inst, l);
  p.h    = hterm::Equality{mpc_dynamics(inst, l)};
  p.g    = GTerm{b, GKind::Box, lo, hi};
  return p;
}

/**
 * @brief AFTI-16 pitch-control model, horizon 10.
 *
 * Outputs are attack angle and pitch angle; inputs are elevator and flaperon
 * angles limited to +-25 degrees. Attack angle is soft-bounded by 0.5 and
 * pitch angle by 100.
 */
inline MpcInstance afti16_model()
{
  MpcInstance m;
  m.plant.Phi.resize(4, 4);
  m.plant.Phi << 0.999, -3.008, -0.113, -1.608,
                 -0.000, 0.986, 0.048, 0.000,
                 0.000, 2.083, 1.009, -0.000,
                 0.000, 0.053, 0.050, 1.000;
  m.plant.Gamma.resize(4, 2);
  m.plant.Gamma << -0.080, -0.635,
                   -0.029, -0.014,
                   -0.868, -0.092,
                   -0.022, -0.002;
  m.plant.C.resize(2, 4);
  m.plant.C << 0, 1, 0, 0,
               0, 0, 0, 1;

  const Mat qy = 100.0 * Mat::Identity(2, 2);
  Vec qx(4);
  qx << 1e-4, 0.0, 1e-3, 0.0;
  m.weights.Q  = m.plant.C.transpose() * qy * m.plant.C + Mat(qx.asDiagonal());
  m.weights.Qf = m.weights.Q;
  m.weights.R  = 1e-2 * Mat::Identity(2, 2);
  m.weights.s_lo = Vec::Constant(2, 1e6);
  m.weights.s_hi = Vec::Constant(2, 1e6);

  m.N    = 10;
  m.u_lo = Vec::Constant(2, -25.0);
  m.u_hi = Vec::Constant(2, 25.0);
  m.y_lo.resize(2);
  m.y_hi.resize(2);
  m.y_lo << -0.5, -100.0;
  m.y_hi << 0.5, 100.0;
  m.x0    = Vec::Zero(4);
  m.y_ref = Vec::Zero(2);
  return m;
}

}  // namespace gfdgm

#endif  // GFDGM_MPC_HPP
