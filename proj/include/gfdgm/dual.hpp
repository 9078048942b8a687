#ifndef GFDGM_DUAL_HPP
#define GFDGM_DUAL_HPP

/**
 * @file
 * @brief Dual function of a ComposedProblem.
 *
 * d(nu) = min_x f(x) + h(x) + nu^T (C x - c), with gradient C x*(nu) - c.
 * The inner minimizer is available in closed form for the supported h:
 * a linear solve (h = 0), a clip (box, diagonal H), the two-region soft-box
 * rule (slack-coupled box, diagonal H) or a cached KKT solve (equality h).
 */

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <variant>
#include <vector>

#include "gfdgm/error.hpp"
#include "gfdgm/numkern.hpp"
#include "gfdgm/problem.hpp"
#include "gfdgm/prox.hpp"

namespace gfdgm {

struct DualEval
{
  double d = 0.0;
  Vec x;     ///< x*(nu)
  Vec grad;  ///< C x*(nu) - c
};

/**
 * @brief Offline-prepared evaluator of x*(nu) and d(nu).
 *
 * All factorizations happen in the constructor. update() swaps the linear
 * data (zeta and the equality right-hand side) without refactoring, which is
 * what a receding-horizon loop needs between samples.
 */
class DualOracle
{
public:
  explicit DualOracle(ComposedProblem p) : p_(std::move(p))
  {
    const bool boxlike = std::holds_alternative<hterm::Box>(p_.h) || std::holds_alternative<hterm::SoftBoxCoupled>(p_.h);
    if (boxlike && !p_.cost.H.is_diagonal())
      fail(ErrorKind::UnsupportedInner, "no closed-form inner minimizer for a " + h_kind_name(p_.h) +
                                            " h with non-diagonal H");
    const auto report = validate_or_throw(p_);
    c_ = p_.C();
    const auto n = p_.n();
    std::visit(
        [&](const auto& h) {
          using T = std::decay_t<decltype(h)>;
          if constexpr (std::is_same_v<T, hterm::Zero>) {
            llt_ = std::make_shared<Eigen::LLT<Mat>>(p_.cost.H.mat());
            ++factorizations_;
          } else if constexpr (std::is_same_v<T, hterm::Equality>) {
            kkt_ = std::make_shared<KktFactor>(p_.cost.H, h.eq.A);
            ++factorizations_;
          } else {
            hdiag_ = p_.cost.H.mat().diagonal();
          }
        },
        p_.h);
    (void)report;
    lo_ = Vec::Constant(p_.p(), -kInf);
    hi_ = Vec::Constant(p_.p(), kInf);
    if (p_.g.kind == GKind::Box) {
      lo_ = p_.g.d_lo;
      hi_ = p_.g.d_hi;
    }
    if (const auto* s = std::get_if<hterm::SoftBoxCoupled>(&p_.h)) {
      soft_role_.assign(static_cast<std::size_t>(n), false);
      for (const auto& e : s->soft) {
        soft_role_[static_cast<std::size_t>(e.var)] = true;
        if (e.slack_lo >= 0) soft_role_[static_cast<std::size_t>(e.slack_lo)] = true;
        if (e.slack_hi >= 0) soft_role_[static_cast<std::size_t>(e.slack_hi)] = true;
      }
    }
  }

  const ComposedProblem& problem() const { return p_; }
  Eigen::Index m() const { return p_.m(); }
  Eigen::Index p() const { return p_.p(); }
  const Mat& C() const { return c_; }
  /// Bounds of g over Bx; (-inf, inf) when g = 0.
  const Vec& g_lo() const { return lo_; }
  const Vec& g_hi() const { return hi_; }
  const KktFactor* kkt() const { return kkt_.get(); }
  /// Number of matrix factorizations performed since construction.
  int factorizations() const { return factorizations_; }

  /// Replaces zeta and the right-hand side of whichever equality the problem carries.
  void update(const Vec& zeta, const Vec& b)
  {
    require(zeta.size() == p_.n(), "DualOracle::update: zeta dimension mismatch");
    p_.cost.zeta = zeta;
    if (auto* e = std::get_if<hterm::Equality>(&p_.h)) {
      require(b.size() == e->eq.b.size(), "DualOracle::update: b dimension mismatch");
      e->eq.b = b;
    } else if (p_.eq) {
      require(b.size() == p_.eq->b.size(), "DualOracle::update: b dimension mismatch");
      p_.eq->b = b;
    } else {
      require(b.size() == 0, "DualOracle::update: problem has no equality constraints");
    }
  }

  /// x*(nu) for nu = (lambda, mu).
  Vec inner(const Vec& nu) const
  {
    require(nu.size() == p_.dual_dim(), "DualOracle::inner: nu dimension mismatch");
    Vec w = p_.cost.zeta;
    if (nu.size()) w.noalias() += c_.transpose() * nu;
    return minimize_linear(w);
  }

  /// argmin_x 1/2 x^T H x + w^T x + h(x).
  Vec minimize_linear(const Vec& w) const
  {
    return std::visit(
        [&](const auto& h) -> Vec {
          using T = std::decay_t<decltype(h)>;
          if constexpr (std::is_same_v<T, hterm::Zero>) {
            return llt_->solve(Vec(-w));
          } else if constexpr (std::is_same_v<T, hterm::Box>) {
            return Vec((-w).cwiseQuotient(hdiag_)).cwiseMax(h.lo).cwiseMin(h.hi);
          } else if constexpr (std::is_same_v<T, hterm::Equality>) {
            return kkt_->solve_primal(Vec(-w), h.eq.b);
          } else {
            return soft_minimize(h, w);
          }
        },
        p_.h);
  }

  /// g*(mu) = sum_i max(lo_i mu_i, hi_i mu_i); +inf outside the domain.
  double g_conj(const Vec& mu) const
  {
    double s = 0.0;
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
      if (mu(i) > 0.0) s += hi_(i) * mu(i);
      else if (mu(i) < 0.0) s += lo_(i) * mu(i);
    }
    return s;
  }

  DualEval eval(const Vec& nu) const
  {
    DualEval e;
    e.x    = inner(nu);
    e.grad = c_ * e.x;
    if (p_.m() > 0) e.grad.head(p_.m()) -= p_.eq->b;
    e.d = p_.cost.value(e.x) + nu.dot(e.grad);
    return e;
  }

  /// D(nu) = d(nu) - g*(mu).
  double dual_objective(const Vec& nu) const { return eval(nu).d - g_conj(nu.tail(p_.p())); }

private:
  Vec soft_minimize(const hterm::SoftBoxCoupled& h, const Vec& w) const
  {
    const auto n = p_.n();
    Vec x(n);
    for (Eigen::Index i = 0; i < n; ++i)
      if (!soft_role_[static_cast<std::size_t>(i)]) x(i) = std::clamp(-w(i) / hdiag_(i), h.lo(i), h.hi(i));
    for (const auto& e : h.soft) {
      SoftTriple t;
      t.q_y = hdiag_(e.var);
      t.a   = w(e.var);
      t.lb  = e.lb;
      t.ub  = e.ub;
      if (e.slack_lo >= 0) {
        t.has_lo = true;
        t.q_lo   = hdiag_(e.slack_lo);
        t.c_lo   = w(e.slack_lo);
      }
      if (e.slack_hi >= 0) {
        t.has_hi = true;
        t.q_hi   = hdiag_(e.slack_hi);
        t.c_hi   = w(e.slack_hi);
      }
      const auto s = soft_box_inner_min(t);
      x(e.var)     = s.y;
      if (e.slack_lo >= 0) x(e.slack_lo) = s.s_lo;
      if (e.slack_hi >= 0) x(e.slack_hi) = s.s_hi;
    }
    return x;
  }

  ComposedProblem p_;
  Mat c_;
  Vec lo_, hi_;
  Vec hdiag_;
  std::vector<bool> soft_role_;
  std::shared_ptr<Eigen::LLT<Mat>> llt_;
  std::shared_ptr<KktFactor> kkt_;
  int factorizations_ = 0;
};

/// One-shot evaluation of d(nu), x*(nu) and the gradient.
inline DualEval eval_dual(const ComposedProblem& p, const Vec& nu) { return DualOracle(p).eval(nu); }

}  // namespace gfdgm

#endif  // GFDGM_DUAL_HPP
