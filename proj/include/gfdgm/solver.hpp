#ifndef GFDGM_SOLVER_HPP
#define GFDGM_SOLVER_HPP

/**
 * @file
 * @brief Accelerated proximal gradient in a metric, primal and dual.
 *
 * fgm_run minimizes l(x) + psi(x) given l with the quadratic upper model
 * l(y) <= l(x) + <grad l(x), y - x> + 1/2 ||y - x||_L^2:
 *
 *     x^k     = prox_psi^L(y^k - L^{-1} grad l(y^k))
 *     t^{k+1} = (1 + sqrt(1 + 4 (t^k)^2)) / 2
 *     y^{k+1} = x^k + ((t^k - 1) / t^{k+1}) (x^k - x^{k-1})
 *
 * fdgm_run applies the same scheme to the dual of a ComposedProblem with
 * L = blkdiag(L_lambda, L_mu):
 *
 *     y^k       = x*(z^k, v^k)
 *     lambda^k  = z^k + L_lambda^{-1}(A y^k - b)
 *     mu^k      = prox_{g*}^{L_mu}(v^k + L_mu^{-1} B y^k)
 *
 * followed by the same momentum step on (lambda, mu).
 */

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gfdgm/curvature.hpp"
#include "gfdgm/dual.hpp"
#include "gfdgm/error.hpp"
#include "gfdgm/metric.hpp"
#include "gfdgm/prox.hpp"

namespace gfdgm {

/// t^1 = 1, t^{k+1} = (1 + sqrt(1 + 4 t^2)) / 2.
struct MomentumState
{
  double t = 1.0;
  int k    = 1;

  /// Advances t and returns the extrapolation weight (t^k - 1) / t^{k+1}.
  double advance()
  {
    const double next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double beta = (t - 1.0) / next;
    t = next;
    ++k;
    return beta;
  }
};

struct DualIterate
{
  Vec lambda, mu;  ///< nu^k
  Vec z, v;        ///< extrapolated point
  double t = 1.0;
  int k    = 0;

  Vec nu() const
  {
    Vec n(lambda.size() + mu.size());
    n << lambda, mu;
    return n;
  }
};

struct LogEntry
{
  int k          = 0;
  double D       = std::numeric_limits<double>::quiet_NaN();
  double eq_res  = 0.0;
  double ineq_res = 0.0;
  double rel_err = std::numeric_limits<double>::quiet_NaN();
};

using SolveLog = std::vector<LogEntry>;

enum class SolveStatus { Converged, CapReached };

inline const char* to_string(SolveStatus s) { return s == SolveStatus::Converged ? "converged" : "cap_reached"; }

/**
 * @brief Termination settings.
 *
 * Library mode stops when the equality residual, the bound violation and the
 * fixed-point residual are all below their tolerances. When y_ref is set the
 * relative error ||y - y_ref|| / ||y_ref|| is logged and, unless rel_stop is
 * false, the rule rel_err <= rel_tol is used instead.
 */
struct StopRule
{
  int max_iter      = 100000;
  double eq_tol     = 1e-6;
  double ineq_tol   = 1e-6;
  double fp_tol     = 1e-9;
  std::optional<Vec> y_ref;
  double rel_tol    = 0.005;
  bool rel_stop     = true;
  bool log_dual     = false;  ///< evaluate D(nu^k) every iteration (one extra inner solve)
  bool keep_trace   = false;  ///< store nu^k for every k
};

struct FdgmResult
{
  Vec y;
  DualIterate state;
  SolveLog log;
  std::vector<Vec> trace;
  SolveStatus status = SolveStatus::CapReached;
  int iterations     = 0;
  double eq_res = 0.0, ineq_res = 0.0, fp_res = 0.0;
  double rel_err = std::numeric_limits<double>::quiet_NaN();

  bool converged() const { return status == SolveStatus::Converged; }
};

/// Options for fdgm_run beyond the stop rule.
struct FdgmOptions
{
  std::optional<Vec> nu0;         ///< defaults to 0
  bool allow_uncertified = false;
  /// Curvature to certify against; computed from the problem when absent.
  std::optional<SymMatrix> curvature;
};

namespace detail {

inline double relative_error(const Vec& y, const Vec& ref)
{
  const double den = ref.norm();
  const double num = (y - ref).norm();
  return den > 1e-12 ? num / den : num;
}

inline double bound_violation(const Vec& v, const Vec& lo, const Vec& hi)
{
  double r = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) r = std::max({r, lo(i) - v(i), v(i) - hi(i)});
  return r;
}

/// Violation of the h constraints at x (zero for closed-form iterates, kept for diagnostics).
inline double h_violation(const ComposedProblem& p, const Vec& x)
{
  return std::visit(
      [&](const auto& h) -> double {
        using T = std::decay_t<decltype(h)>;
        if constexpr (std::is_same_v<T, hterm::Box>) return bound_violation(x, h.lo, h.hi);
        else if constexpr (std::is_same_v<T, hterm::Equality>)
          return h.eq.A.rows() ? (h.eq.A * x - h.eq.b).cwiseAbs().maxCoeff() : 0.0;
        else if constexpr (std::is_same_v<T, hterm::SoftBoxCoupled>) {
          double r = bound_violation(x, h.lo, h.hi);
          for (const auto& e : h.soft) {
            const double slo = e.slack_lo >= 0 ? x(e.slack_lo) : 0.0;
            const double shi = e.slack_hi >= 0 ? x(e.slack_hi) : 0.0;
            r = std::max({r, e.lb - slo - x(e.var), x(e.var) - e.ub - shi});
          }
          return r;
        } else
          return 0.0;
      },
      p.h);
}

/// The curvature matrix that certifies the dual bound for p (the tightest applicable one).
inline SymMatrix certifying_curvature(const ComposedProblem& p)
{
  const auto rep = validate(p);
  if (rep.kkt_path) return curvature_kkt(p).value;
  return curvature_general(p).value;
}

inline SymMatrix block_diag(const SymMatrix& a, const SymMatrix& b)
{
  Mat m = Mat::Zero(a.dim() + b.dim(), a.dim() + b.dim());
  m.topLeftCorner(a.dim(), a.dim())     = a.mat();
  m.bottomRightCorner(b.dim(), b.dim()) = b.mat();
  return SymMatrix(m);
}

}  // namespace detail

/**
 * @brief Checks that the metric dominates the dual curvature of p.
 *
 * Throws RefusedUncertifiedMetric when min eig(L - W) < -1e-8 ||W||.
 */
inline double check_certificate(const SymMatrix& l, const SymMatrix& w)
{
  require(l.dim() == w.dim(), "metric dimension " + std::to_string(l.dim()) + " does not match dual dimension " +
                                  std::to_string(w.dim()));
  if (w.dim() == 0) return 0.0;
  const double margin = min_eig(SymMatrix(Mat(l.mat() - w.mat())));
  if (margin < -1e-8 * sym_norm2(w))
    fail(ErrorKind::RefusedUncertifiedMetric,
         "metric does not dominate the dual curvature (min eig(L - CPC^T) = " + std::to_string(margin) + ")");
  return margin;
}

/**
 * @brief Runs the fast dual gradient method on a prepared oracle.
 *
 * L is the metric on nu = (lambda, mu); it must be block diagonal across
 * the two parts. A diagonal mu block uses the closed-form support prox,
 * otherwise the conjugate prox goes through the Moreau identity.
 */
inline FdgmResult fdgm_run(const DualOracle& oracle, const Metric& l, const StopRule& stop = {},
                           const FdgmOptions& opt = {})
{
  const auto& p = oracle.problem();
  const auto m  = p.m();
  const auto pp = p.p();
  require(l.dim() == m + pp, "fdgm_run: metric dimension " + std::to_string(l.dim()) + " != m + p = " +
                                 std::to_string(m + pp));
  if (m > 0 && pp > 0 && max_abs(Mat(l.L.mat().topRightCorner(m, pp))) != 0.0)
    fail(ErrorKind::InvalidArgument, "fdgm_run: metric must be block diagonal across (lambda, mu)");
  if (!opt.allow_uncertified)
    check_certificate(l.L, opt.curvature ? *opt.curvature : detail::certifying_curvature(p));

  const SymMatrix l_mu(Mat(l.L.mat().bottomRightCorner(pp, pp)));
  const bool mu_diag = l_mu.is_diagonal();
  const Vec lmu_diag = l_mu.mat().diagonal();
  const Eigen::LLT<Mat> llam(l.L.mat().topLeftCorner(m, m));
  const Eigen::LLT<Mat> lmu(l_mu.mat());
  const ProxFunction gbox = ProxFunction::box(oracle.g_lo(), oracle.g_hi());
  const Mat& c = oracle.C();
  const Vec b  = m > 0 ? p.eq->b : Vec();

  FdgmResult res;
  DualIterate& s = res.state;
  s.lambda = Vec::Zero(m);
  s.mu     = Vec::Zero(pp);
  if (opt.nu0) {
    require(opt.nu0->size() == m + pp, "fdgm_run: nu0 dimension mismatch");
    s.lambda = opt.nu0->head(m);
    s.mu     = opt.nu0->tail(pp);
  }
  s.z = s.lambda;
  s.v = s.mu;
  MomentumState mom;
  Vec nu_prev = s.nu();
  Vec nu(m + pp);

  for (int k = 1; k <= stop.max_iter; ++k) {
    nu << s.z, s.v;
    const Vec y  = oracle.inner(nu);
    const Vec cy = c * y;

    Vec lam_new = s.z;
    if (m > 0) lam_new += llam.solve(Vec(cy.head(m) - b));
    Vec mu_new;
    if (pp > 0) {
      if (mu_diag) {
        mu_new = support_prox_box(oracle.g_lo(), oracle.g_hi(), lmu_diag, s.v, cy.tail(pp));
      } else {
        const Vec w = s.v + lmu.solve(Vec(cy.tail(pp)));
        mu_new      = conjugate_prox_via_moreau(gbox, l_mu, w);
      }
    } else {
      mu_new = Vec::Zero(0);
    }

    LogEntry e;
    e.k        = k;
    e.eq_res   = m > 0 ? (cy.head(m) - b).cwiseAbs().maxCoeff() : 0.0;
    e.ineq_res = std::max(pp > 0 ? detail::bound_violation(cy.tail(pp), oracle.g_lo(), oracle.g_hi()) : 0.0,
                          detail::h_violation(p, y));
    res.y = y;
    s.lambda = lam_new;
    s.mu     = mu_new;
    s.k      = k;
    const Vec cur = s.nu();
    res.fp_res    = (cur - nu_prev).size() ? (cur - nu_prev).cwiseAbs().maxCoeff() : 0.0;
    if (stop.log_dual) e.D = oracle.dual_objective(cur);
    if (stop.y_ref) e.rel_err = detail::relative_error(y, *stop.y_ref);
    res.log.push_back(e);
    if (stop.keep_trace) res.trace.push_back(cur);
    res.eq_res     = e.eq_res;
    res.ineq_res   = e.ineq_res;
    res.rel_err    = e.rel_err;
    res.iterations = k;

    const bool done = stop.y_ref && stop.rel_stop ? e.rel_err <= stop.rel_tol
                                 : (e.eq_res <= stop.eq_tol && e.ineq_res <= stop.ineq_tol && res.fp_res <= stop.fp_tol);
    if (done) {
      res.status = SolveStatus::Converged;
      break;
    }

    const double beta = mom.advance();
    s.t = mom.t;
    s.z = lam_new + beta * (lam_new - nu_prev.head(m));
    s.v = mu_new + beta * (mu_new - nu_prev.tail(pp));
    nu_prev = cur;
  }
  return res;
}

/// Convenience overload that prepares the oracle.
inline FdgmResult fdgm_run(const ComposedProblem& p, const Metric& l, const StopRule& stop = {},
                           const FdgmOptions& opt = {})
{
  return fdgm_run(DualOracle(p), l, stop, opt);
}

/// blkdiag(L_lambda, L_mu) as one metric.
inline Metric block_metric(const Metric& l_lambda, const Metric& l_mu, const SymMatrix& w)
{
  std::vector<Eigen::Index> blocks = l_lambda.pattern.block_sizes();
  const auto& mb = l_mu.pattern.block_sizes();
  blocks.insert(blocks.end(), mb.begin(), mb.end());
  const auto pat = blocks.empty() ? SymPattern::diagonal(0) : SymPattern::block_diagonal(blocks);
  CaseInfo info{MetricCase::C1, rank_of(w.mat())};
  if (info.rank < w.dim()) info.kase = MetricCase::C3;
  return make_metric(detail::block_diag(l_lambda.L, l_mu.L), pat, w, info);
}

/// Smooth part l and its gradient for fgm_run.
struct SmoothOracle
{
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> grad;
};

struct FgmResult
{
  Vec x;
  std::vector<double> objective;  ///< (l + psi)(x^k), k = 1, 2, ...
  std::vector<Vec> trace;
  SolveStatus status = SolveStatus::CapReached;
  int iterations     = 0;
};

struct FgmStop
{
  int max_iter    = 10000;
  double fp_tol   = 0.0;  ///< stop when ||x^k - x^{k-1}||_inf <= fp_tol (0 disables)
  bool keep_trace = false;
};

/// Generalized fast gradient method; psi must be an indicator or zero so that (l + psi)(x^k) = l(x^k).
inline FgmResult fgm_run(const SmoothOracle& ell, const ProxFunction& psi, const Metric& l, const Vec& x0,
                         const FgmStop& stop = {})
{
  require(x0.size() == l.dim(), "fgm_run: x0 dimension mismatch");
  FgmResult res;
  MomentumState mom;
  Vec x_prev = x0;
  Vec y      = x0;
  for (int k = 1; k <= stop.max_iter; ++k) {
    const Vec x = prox(psi, l.L, Vec(y - l.apply_inverse(ell.grad(y))));
    res.objective.push_back(ell.value(x));
    if (stop.keep_trace) res.trace.push_back(x);
    res.iterations = k;
    res.x          = x;
    const double step = (x - x_prev).size() ? (x - x_prev).cwiseAbs().maxCoeff() : 0.0;
    if (stop.fp_tol > 0.0 && step <= stop.fp_tol) {
      res.status = SolveStatus::Converged;
      break;
    }
    const double beta = mom.advance();
    y      = x + beta * (x - x_prev);
    x_prev = x;
  }
  if (stop.fp_tol <= 0.0) res.status = SolveStatus::Converged;
  return res;
}

struct RateCheck
{
  std::vector<int> violations;  ///< iteration numbers breaking the bound
  double d_star    = 0.0;
  double radius_sq = 0.0;  ///< ||nu* - nu0||_L^2

  bool pass() const { return violations.empty(); }
};

/**
 * @brief Checks D(nu*) - D(nu^k) <= 2 ||nu* - nu0||_L^2 / (k + 1)^2 on a log.
 *
 * d_star should be the best known dual value; it is raised to the largest
 * logged value, which is a valid lower bound on the optimum. An absolute
 * slack of 1e-12 (1 + |D*|) absorbs rounding in the dual values.
 */
inline RateCheck certify_rate(const SolveLog& log, const Metric& l, const Vec& nu_star, const Vec& nu0,
                              double d_star)
{
  RateCheck rc;
  rc.d_star = d_star;
  for (const auto& e : log)
    if (std::isfinite(e.D)) rc.d_star = std::max(rc.d_star, e.D);
  rc.radius_sq = l.norm_sq(Vec(nu_star - nu0));
  for (const auto& e : log) {
    const double bound = 2.0 * rc.radius_sq / ((e.k + 1.0) * (e.k + 1.0)) * (1.0 + 1e-6) +
                         1e-12 * (1.0 + std::abs(rc.d_star));
    if (!(rc.d_star - e.D <= bound)) rc.violations.push_back(e.k);
  }
  return rc;
}

}  // namespace gfdgm

#endif  // GFDGM_SOLVER_HPP
