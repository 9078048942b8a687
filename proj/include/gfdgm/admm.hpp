#ifndef GFDGM_ADMM_HPP
#define GFDGM_ADMM_HPP

// Scaled-form ADMM on the splitting used by the inequality-dual method:
//   min f(y) + I{Ay = b}(y) + g(w)  s.t.  By = w,
// with updates y -> w -> u and unit relaxation. The y-step matrix
// [[H + rho B^T B, A^T], [A, 0]] is factored once per rho.

#include <cmath>
#include <limits>
#include <optional>
#include <variant>

#include "gfdgm/error.hpp"
#include "gfdgm/numkern.hpp"
#include "gfdgm/problem.hpp"
#include "gfdgm/solver.hpp"

namespace gfdgm {

struct AdmmStop
{
  int max_iter   = 100000;
  double abs_tol = 1e-6;  ///< on ||By - w||_inf and rho ||B^T (w - w_prev)||_inf
  std::optional<Vec> y_ref;
  double rel_tol = 0.005;
  bool rel_stop  = true;  ///< false logs rel_err but keeps the residual rule
};

struct AdmmResult
{
  Vec y, w, u;  ///< u is the scaled multiplier; mu = rho u
  SolveLog log;
  SolveStatus status = SolveStatus::CapReached;
  int iterations     = 0;
  double primal_res = 0.0, dual_res = 0.0;
  double rel_err = std::numeric_limits<double>::quiet_NaN();

  bool converged() const { return status == SolveStatus::Converged; }
};

class AdmmSolver
{
public:
  AdmmSolver(const ComposedProblem& p, double rho) : p_(p), rho_(rho)
  {
    if (!(rho > 0.0)) fail(ErrorKind::InvalidArgument, "admm: rho must be positive");
    validate_or_throw(p_);
    if (std::holds_alternative<hterm::Box>(p_.h) || std::holds_alternative<hterm::SoftBoxCoupled>(p_.h))
      fail(ErrorKind::InvalidArgument, "admm: h must be zero or an equality indicator");
    const AffineEq* heq = p_.h_equality();
    if (heq && p_.eq) fail(ErrorKind::InvalidArgument, "admm: both an h equality and a dualized equality");
    a_ = heq ? heq->A : (p_.eq ? p_.eq->A : Mat(0, p_.n()));
    const Mat hr = p_.cost.H.mat() + rho_ * p_.g.B.transpose() * p_.g.B;
    kkt_ = KktFactor(SymMatrix(Mat(0.5 * (hr + hr.transpose()))), a_);
    lo_ = Vec::Constant(p_.p(), -kInf);
    hi_ = Vec::Constant(p_.p(), kInf);
    if (p_.g.kind == GKind::Box) {
      lo_ = p_.g.d_lo;
      hi_ = p_.g.d_hi;
    }
  }

  double rho() const { return rho_; }
  const KktFactor& kkt() const { return kkt_; }

  void update(const Vec& zeta, const Vec& b)
  {
    require(zeta.size() == p_.n(), "AdmmSolver::update: zeta dimension mismatch");
    p_.cost.zeta = zeta;
    if (auto* e = std::get_if<hterm::Equality>(&p_.h)) e->eq.b = b;
    else if (p_.eq) p_.eq->b = b;
  }

  AdmmResult run(const AdmmStop& stop = {}, const Vec* w0 = nullptr, const Vec* u0 = nullptr) const
  {
    const Mat& bm = p_.g.B;
    const auto pp = p_.p();
    const Vec& b  = p_.h_equality() ? p_.h_equality()->b : (p_.eq ? p_.eq->b : Vec(Vec::Zero(0)));
    AdmmResult r;
    r.w = w0 ? *w0 : Vec(Vec::Zero(pp));
    r.u = u0 ? *u0 : Vec(Vec::Zero(pp));
    for (int k = 1; k <= stop.max_iter; ++k) {
      const Vec top = -p_.cost.zeta + rho_ * bm.transpose() * (r.w - r.u);
      r.y           = kkt_.solve_primal(top, b);
      const Vec by  = bm * r.y;
      const Vec w_prev = r.w;
      r.w = Vec(by + r.u).cwiseMax(lo_).cwiseMin(hi_);
      r.u += by - r.w;

      r.primal_res = pp ? (by - r.w).cwiseAbs().maxCoeff() : 0.0;
      r.dual_res   = pp ? rho_ * (bm.transpose() * (r.w - w_prev)).cwiseAbs().maxCoeff() : 0.0;
      LogEntry e;
      e.k        = k;
      e.eq_res   = a_.rows() ? (a_ * r.y - b).cwiseAbs().maxCoeff() : 0.0;
      e.ineq_res = pp ? detail::bound_violation(by, lo_, hi_) : 0.0;
      if (stop.y_ref) e.rel_err = detail::relative_error(r.y, *stop.y_ref);
      r.log.push_back(e);
      r.rel_err    = e.rel_err;
      r.iterations = k;
      const bool done = stop.y_ref && stop.rel_stop ? e.rel_err <= stop.rel_tol
                                   : (r.primal_res <= stop.abs_tol && r.dual_res <= stop.abs_tol);
      if (done) {
        r.status = SolveStatus::Converged;
        break;
      }
    }
    return r;
  }

private:
  ComposedProblem p_;
  double rho_;
  Mat a_;
  KktFactor kkt_;
  Vec lo_, hi_;
};

inline AdmmResult admm_run(const ComposedProblem& p, double rho, const AdmmStop& stop = {})
{
  return AdmmSolver(p, rho).run(stop);
}

}  // namespace gfdgm

#endif  // GFDGM_ADMM_HPP
