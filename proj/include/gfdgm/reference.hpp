#ifndef GFDGM_REFERENCE_HPP
#define GFDGM_REFERENCE_HPP

/**
 * @file
 * @brief High-accuracy reference solutions for ComposedProblem instances.
 *
 * The problem is rewritten as a plain QP
 *     min 1/2 x^T H x + zeta^T x  s.t.  E x = e,  G x <= f
 * and solved with a dense Mehrotra predictor-corrector interior-point method.
 * The active set read off the interior-point solution is then solved as an
 * equality-constrained QP; the polished point replaces the interior-point one
 * when it is feasible, dual feasible and has smaller KKT residuals.
 */

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "gfdgm/error.hpp"
#include "gfdgm/numkern.hpp"
#include "gfdgm/problem.hpp"

namespace gfdgm {

struct PlainQp
{
  Mat H;
  Vec zeta;
  Mat E;
  Vec e;
  Mat G;
  Vec f;
};

struct ReferenceSolution
{
  Vec x;
  Vec y_eq;    ///< equality multipliers
  Vec z_ineq;  ///< inequality multipliers (>= 0)
  double kkt_residual = 0.0;  ///< relative, max of stationarity, feasibility and complementarity
  int ip_iterations   = 0;
  bool polished       = false;
};

namespace detail {

struct RowBuilder
{
  std::vector<Vec> rows;
  std::vector<double> rhs;

  void add(const Vec& row, double r)
  {
    if (!std::isfinite(r)) return;
    rows.push_back(row);
    rhs.push_back(r);
  }

  void finish(Eigen::Index n, Mat& g, Vec& f) const
  {
    g.resize(static_cast<Eigen::Index>(rows.size()), n);
    f.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      g.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
      f(static_cast<Eigen::Index>(i))     = rhs[i];
    }
  }
};

inline double kkt_residual(const PlainQp& q, const Vec& x, const Vec& y, const Vec& z)
{
  Vec grad = q.H * x + q.zeta;
  double scale = 1.0 + std::max((q.H * x).cwiseAbs().maxCoeff(), max_abs(q.zeta));
  if (q.E.rows()) grad += q.E.transpose() * y;
  if (q.G.rows()) grad += q.G.transpose() * z;
  double r = max_abs(grad) / scale;
  if (q.E.rows()) r = std::max(r, max_abs(Vec(q.E * x - q.e)) / (1.0 + max_abs(q.e)));
  if (q.G.rows()) {
    const Vec s = q.f - q.G * x;
    const double fs = 1.0 + max_abs(q.f) + max_abs(Vec(q.G * x));
    r = std::max(r, std::max(0.0, -s.minCoeff()) / fs);
    r = std::max(r, std::max(0.0, -z.minCoeff()) / (1.0 + max_abs(z)));
    double comp = 0.0;
    for (Eigen::Index i = 0; i < s.size(); ++i) comp = std::max(comp, std::abs(s(i) * z(i)));
    r = std::max(r, comp / (fs * (1.0 + max_abs(z))));
  }
  return r;
}

}  // namespace detail

/// Flattens a ComposedProblem into equality and inequality rows.
inline PlainQp to_plain_qp(const ComposedProblem& p)
{
  const auto n = p.n();
  PlainQp q;
  q.H    = p.cost.H.mat();
  q.zeta = p.cost.zeta;
  const AffineEq* heq = p.h_equality();
  const auto me = (p.eq ? p.eq->A.rows() : 0) + (heq ? heq->A.rows() : 0);
  q.E.resize(me, n);
  q.e.resize(me);
  Eigen::Index r = 0;
  for (const AffineEq* eq : {p.eq ? &*p.eq : nullptr, heq}) {
    if (!eq) continue;
    q.E.middleRows(r, eq->A.rows()) = eq->A;
    q.e.segment(r, eq->A.rows())    = eq->b;
    r += eq->A.rows();
  }

  detail::RowBuilder rb;
  auto unit = [&](Eigen::Index i, double sgn) {
    Vec v = Vec::Zero(n);
    v(i)  = sgn;
    return v;
  };
  auto add_box = [&](const Vec& lo, const Vec& hi) {
    for (Eigen::Index i = 0; i < n; ++i) {
      rb.add(unit(i, 1.0), hi(i));
      rb.add(unit(i, -1.0), -lo(i));
    }
  };
  if (const auto* b = std::get_if<hterm::Box>(&p.h)) add_box(b->lo, b->hi);
  if (const auto* s = std::get_if<hterm::SoftBoxCoupled>(&p.h)) {
    add_box(s->lo, s->hi);
    for (const auto& e : s->soft) {
      Vec up = unit(e.var, 1.0);
      if (e.slack_hi >= 0) up(e.slack_hi) = -1.0;
      rb.add(up, e.ub);
      Vec dn = unit(e.var, -1.0);
      if (e.slack_lo >= 0) dn(e.slack_lo) = -1.0;
      rb.add(dn, -e.lb);
    }
  }
  if (p.g.kind == GKind::Box) {
    for (Eigen::Index i = 0; i < p.p(); ++i) {
      rb.add(p.g.B.row(i).transpose(), p.g.d_hi(i));
      rb.add(Vec(-p.g.B.row(i).transpose()), -p.g.d_lo(i));
    }
  }
  rb.finish(n, q.G, q.f);
  return q;
}

struct ReferenceOptions
{
  int max_iter   = 200;
  double tol     = 1e-10;  ///< required relative KKT residual
};

/// Interior-point solve followed by an active-set polish.
inline ReferenceSolution reference_solution(const PlainQp& q, const ReferenceOptions& opt = {})
{
  const auto n  = q.H.rows();
  const auto me = q.E.rows();
  const auto mi = q.G.rows();
  ReferenceSolution out;

  auto factor = [&](const Vec& wdiag) {
    Mat k = Mat::Zero(n + me, n + me);
    k.topLeftCorner(n, n) = q.H;
    if (mi) k.topLeftCorner(n, n) += q.G.transpose() * wdiag.asDiagonal() * q.G;
    if (me) {
      k.topRightCorner(n, me)   = q.E.transpose();
      k.bottomLeftCorner(me, n) = q.E;
    }
    return std::make_pair(k, Eigen::PartialPivLU<Mat>(k));
  };
  auto solve = [](const std::pair<Mat, Eigen::PartialPivLU<Mat>>& f, const Vec& rhs) {
    Vec s = f.second.solve(rhs);
    s += f.second.solve(Vec(rhs - f.first * s));
    return s;
  };

  Vec x, y = Vec::Zero(me), z = Vec::Ones(mi), s = Vec::Ones(mi);
  {
    Vec rhs(n + me);
    rhs << -q.zeta, q.e;
    const auto f0 = factor(Vec::Ones(mi));
    const Vec sol = solve(f0, rhs);
    x = sol.head(n);
    if (mi) s = (q.f - q.G * x).cwiseMax(1.0);
  }

  int it = 0;
  for (; it < opt.max_iter; ++it) {
    const Vec rd = q.H * x + q.zeta + (me ? Vec(q.E.transpose() * y) : Vec(Vec::Zero(n))) +
                   (mi ? Vec(q.G.transpose() * z) : Vec(Vec::Zero(n)));
    const Vec rp = me ? Vec(q.E * x - q.e) : Vec();
    const Vec rg = mi ? Vec(q.G * x + s - q.f) : Vec();
    const double mu = mi ? s.dot(z) / static_cast<double>(mi) : 0.0;
    if (detail::kkt_residual(q, x, y, z) <= 0.1 * opt.tol && mu <= 1e-14 * (1.0 + std::abs(q.zeta.dot(x)))) break;

    const Vec wdiag = mi ? Vec(z.cwiseQuotient(s)) : Vec();
    const auto fac  = factor(wdiag);
    // direction for complementarity target s.z = -rc
    auto direction = [&](const Vec& rc, Vec& dx, Vec& dy, Vec& dz, Vec& ds) {
      Vec top = -rd;
      if (mi) top -= q.G.transpose() * Vec((-rc + z.cwiseProduct(rg)).cwiseQuotient(s));
      Vec rhs(n + me);
      if (me) rhs << top, -rp;
      else rhs = top;
      const Vec sol = solve(fac, rhs);
      dx = sol.head(n);
      dy = sol.tail(me);
      if (mi) {
        ds = -rg - q.G * dx;
        dz = (-rc - z.cwiseProduct(ds)).cwiseQuotient(s);
      }
    };
    auto max_step = [](const Vec& v, const Vec& dv) {
      double a = 1.0;
      for (Eigen::Index i = 0; i < v.size(); ++i)
        if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
      return a;
    };

    Vec dx, dy, dz, ds;
    if (mi) {
      direction(s.cwiseProduct(z), dx, dy, dz, ds);
      const double ap  = max_step(s, ds);
      const double ad  = max_step(z, dz);
      const double mua = (s + ap * ds).dot(z + ad * dz) / static_cast<double>(mi);
      const double sigma = std::pow(mua / std::max(mu, 1e-300), 3.0);
      const Vec rc = s.cwiseProduct(z) + ds.cwiseProduct(dz) - Vec::Constant(mi, sigma * mu);
      direction(rc, dx, dy, dz, ds);
      const double eta = std::max(0.9, 1.0 - mu);
      const double a   = std::min(1.0, eta * std::min(max_step(s, ds), max_step(z, dz)));
      // past the rounding floor the scaling z/s degenerates; keep the last finite iterate
      if (!(a * dx).allFinite() || !(a * dz).allFinite() || !(a * ds).allFinite() || !(a * dy).allFinite()) break;
      x += a * dx;
      y += a * dy;
      z += a * dz;
      s += a * ds;
    } else {
      direction(Vec(), dx, dy, dz, ds);
      x += dx;
      y += dy;
    }
  }
  out.ip_iterations = it;
  out.x      = x;
  out.y_eq   = y;
  out.z_ineq = z;
  out.kkt_residual = detail::kkt_residual(q, x, y, z);

  // polish on the active set {i : s_i < z_i}
  if (mi) {
    std::vector<Eigen::Index> act;
    for (Eigen::Index i = 0; i < mi; ++i)
      if (s(i) < z(i)) act.push_back(i);
    const auto na = static_cast<Eigen::Index>(act.size());
    Mat ga(na, n);
    Vec fa(na);
    for (Eigen::Index i = 0; i < na; ++i) {
      ga.row(i) = q.G.row(act[static_cast<std::size_t>(i)]);
      fa(i)     = q.f(act[static_cast<std::size_t>(i)]);
    }
    const auto nc = me + na;
    Mat k = Mat::Zero(n + nc, n + nc);
    k.topLeftCorner(n, n) = q.H;
    if (me) {
      k.block(0, n, n, me) = q.E.transpose();
      k.block(n, 0, me, n) = q.E;
    }
    if (na) {
      k.block(0, n + me, n, na) = ga.transpose();
      k.block(n + me, 0, na, n) = ga;
    }
    Vec rhs(n + nc);
    rhs << -q.zeta, q.e, fa;
    Eigen::FullPivLU<Mat> lu(k);
    if (lu.isInvertible()) {
      Vec sol = lu.solve(rhs);
      sol += lu.solve(Vec(rhs - k * sol));
      Vec zp = Vec::Zero(mi);
      for (Eigen::Index i = 0; i < na; ++i) zp(act[static_cast<std::size_t>(i)]) = sol(n + me + i);
      const Vec xp = sol.head(n);
      const Vec yp = sol.segment(n, me);
      const double rp = detail::kkt_residual(q, xp, yp, zp);
      if (sol.allFinite() && (rp <= out.kkt_residual || !std::isfinite(out.kkt_residual))) {
        out.x        = xp;
        out.y_eq     = yp;
        out.z_ineq   = zp;
        out.kkt_residual = rp;
        out.polished = true;
      }
    }
  }

  if (!(out.kkt_residual <= opt.tol)) {
    std::ostringstream os;
    os << "reference_solution: KKT residual " << out.kkt_residual << " after " << it << " interior-point iterations";
    fail(ErrorKind::NonConvergence, os.str());
  }
  return out;
}

inline ReferenceSolution reference_solution(const ComposedProblem& p, const ReferenceOptions& opt = {})
{
  validate_or_throw(p);
  return reference_solution(to_plain_qp(p), opt);
}

}  // namespace gfdgm

#endif  // GFDGM_REFERENCE_HPP
