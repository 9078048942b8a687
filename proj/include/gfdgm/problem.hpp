#ifndef GFDGM_PROBLEM_HPP
#define GFDGM_PROBLEM_HPP

/**
 * @file
 * @brief Composite QP model and its validation.
 *
 * A ComposedProblem is
 * \f[
 *   \min_x \tfrac12 x^T H x + \zeta^T x + h(x) + g(Bx) \quad \text{s.t. } Ax = b,
 * \f]
 * where the equality Ax = b is dualized (multiplier lambda) and g(Bx) is split
 * off with multiplier mu. Dual variables are nu = (lambda, mu), the stacked
 * constraint matrix is C = [A; B] and c = (b, 0).
 */

#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "gfdgm/error.hpp"
#include "gfdgm/numkern.hpp"

namespace gfdgm {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// f(x) = 1/2 x^T H x + zeta^T x.
struct QuadCost
{
  SymMatrix H;
  Vec zeta;

  /// Strong-convexity modulus (smallest eigenvalue of H, clamped at 0).
  double sigma() const { return std::max(min_eig(H), 0.0); }
  double value(const Vec& x) const { return 0.5 * x.dot(H.mat() * x) + zeta.dot(x); }

  friend bool operator==(const QuadCost&, const QuadCost&) = default;
};

struct AffineEq
{
  Mat A;
  Vec b;

  friend bool operator==(const AffineEq&, const AffineEq&) = default;
};

/// One softened scalar bound pair lb - s_lo <= x[var] <= ub + s_hi with s >= 0.
struct SoftEntry
{
  Eigen::Index var      = 0;
  Eigen::Index slack_lo = -1;  ///< -1 when there is no lower softened bound
  Eigen::Index slack_hi = -1;  ///< -1 when there is no upper softened bound
  double lb             = -kInf;
  double ub             = kInf;

  friend bool operator==(const SoftEntry&, const SoftEntry&) = default;
};

namespace hterm {
struct Zero
{
  friend bool operator==(const Zero&, const Zero&) = default;
};
/// Indicator of lo <= x <= hi.
struct Box
{
  Vec lo, hi;
  friend bool operator==(const Box&, const Box&) = default;
};
/// Indicator of {x : Ax = b}; not dualized.
struct Equality
{
  AffineEq eq;
  friend bool operator==(const Equality&, const Equality&) = default;
};
/// Hard box on every coordinate plus softened bounds coupling variables to slacks.
struct SoftBoxCoupled
{
  Vec lo, hi;
  std::vector<SoftEntry> soft;
  friend bool operator==(const SoftBoxCoupled&, const SoftBoxCoupled&) = default;
};
}  // namespace hterm

using HTerm = std::variant<hterm::Zero, hterm::Box, hterm::Equality, hterm::SoftBoxCoupled>;

enum class GKind { Zero, Box };

/// g(Bx) with g either zero or the indicator of d_lo <= Bx <= d_hi.
struct GTerm
{
  Mat B;
  GKind kind = GKind::Zero;
  Vec d_lo, d_hi;

  friend bool operator==(const GTerm&, const GTerm&) = default;
};

struct ComposedProblem
{
  QuadCost cost;
  HTerm h = hterm::Zero{};
  std::optional<AffineEq> eq;  ///< dualized equality constraints
  GTerm g;

  Eigen::Index n() const { return cost.H.dim(); }
  Eigen::Index m() const { return eq ? eq->A.rows() : 0; }
  Eigen::Index p() const { return g.B.rows(); }
  Eigen::Index dual_dim() const { return m() + p(); }

  /// Stacked C = [A; B].
  Mat C() const
  {
    Mat c(m() + p(), n());
    if (m() > 0) c.topRows(m()) = eq->A;
    if (p() > 0) c.bottomRows(p()) = g.B;
    return c;
  }

  /// Stacked c = (b, 0).
  Vec c() const
  {
    Vec v = Vec::Zero(m() + p());
    if (m() > 0) v.head(m()) = eq->b;
    return v;
  }

  /// Equality held by h, if any.
  const AffineEq* h_equality() const
  {
    const auto* e = std::get_if<hterm::Equality>(&h);
    return e ? &e->eq : nullptr;
  }

  friend bool operator==(const ComposedProblem&, const ComposedProblem&) = default;
};

inline std::string h_kind_name(const HTerm& h)
{
  switch (h.index()) {
    case 0: return "zero";
    case 1: return "box";
    case 2: return "equality";
    default: return "soft_box";
  }
}

/// Outcome of validate(); solvers refuse problems whose report is not ok().
struct ValidationReport
{
  std::vector<std::string> issues;

  bool h_pd                = false;
  double sigma             = 0.0;
  bool h_pd_on_nullspace   = false;
  bool a_full_row_rank     = true;
  bool inner_closed_form   = false;

  /// P = H^{-1} applies (H PD).
  bool general_path = false;
  /// P = H^{-1/2}(I - M)H^{-1/2} applies (H PD, h is an equality indicator).
  bool projected_path = false;
  /// P = K11 applies (h is an equality indicator, H PD on its null space).
  bool kkt_path = false;

  bool ok() const { return issues.empty() && (general_path || kkt_path) && inner_closed_form; }
};

namespace detail {

inline void check_bounds(const Vec& lo, const Vec& hi, const std::string& lo_name, const std::string& hi_name,
                         std::vector<std::string>& issues)
{
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    if (std::isnan(lo(i)) || std::isnan(hi(i)) || lo(i) > hi(i)) {
      std::ostringstream os;
      os << lo_name << "[" << i << "] > " << hi_name << "[" << i << "] (" << lo(i) << " > " << hi(i) << ")";
      issues.push_back(os.str());
    }
  }
}

inline bool full_row_rank(const Mat& a, const std::string& name, std::vector<std::string>& issues)
{
  if (a.rows() == 0) return true;
  const auto r = rank_of(a);
  if (r < a.rows()) {
    std::ostringstream os;
    os << name << " has rank " << r << " < " << a.rows()
       << " rows; redundant equality rows must be removed before solving";
    issues.push_back(os.str());
    return false;
  }
  return true;
}

}  // namespace detail

/**
 * @brief Checks dimensions, bounds, rank and definiteness assumptions.
 *
 * The report lists which curvature results apply: the general bound needs H
 * positive definite, the K11 bound needs h to be an equality indicator with H
 * positive definite on the null space of its matrix.
 */
inline ValidationReport validate(const ComposedProblem& p)
{
  ValidationReport r;
  auto& issues = r.issues;
  const auto n = p.n();

  auto dim = [&](bool ok, const std::string& what) {
    if (!ok) issues.push_back("dimension mismatch: " + what);
    return ok;
  };

  bool dims = dim(p.cost.zeta.size() == n, "zeta");
  if (p.eq) dims &= dim(p.eq->A.cols() == n && p.eq->b.size() == p.eq->A.rows(), "A/b");
  dims &= dim(p.g.B.cols() == n || p.g.B.rows() == 0, "B");
  if (p.g.kind == GKind::Box) {
    dims &= dim(p.g.d_lo.size() == p.p() && p.g.d_hi.size() == p.p(), "d_lo/d_hi");
    if (dims) detail::check_bounds(p.g.d_lo, p.g.d_hi, "d_lo", "d_hi", issues);
  }
  if (!p.cost.zeta.allFinite()) issues.push_back("zeta has non-finite entries");
  if (p.eq && !(p.eq->A.allFinite() && p.eq->b.allFinite())) issues.push_back("A/b have non-finite entries");
  if (!p.g.B.allFinite()) issues.push_back("B has non-finite entries");

  std::visit(
      [&](const auto& h) {
        using T = std::decay_t<decltype(h)>;
        if constexpr (std::is_same_v<T, hterm::Box> || std::is_same_v<T, hterm::SoftBoxCoupled>) {
          if (dim(h.lo.size() == n && h.hi.size() == n, "y_min/y_max"))
            detail::check_bounds(h.lo, h.hi, "y_min", "y_max", issues);
        }
        if constexpr (std::is_same_v<T, hterm::Equality>) {
          dims &= dim(h.eq.A.cols() == n && h.eq.b.size() == h.eq.A.rows(), "h equality A/b");
        }
        if constexpr (std::is_same_v<T, hterm::SoftBoxCoupled>) {
          std::vector<int> role(static_cast<std::size_t>(n), 0);
          auto claim = [&](Eigen::Index i, int what, const std::string& label) {
            if (i < 0) return;
            if (i >= n) {
              issues.push_back("soft entry " + label + " index out of range");
              return;
            }
            if (role[static_cast<std::size_t>(i)] != 0) issues.push_back("soft entry index reused: " + std::to_string(i));
            role[static_cast<std::size_t>(i)] = what;
          };
          for (const auto& s : h.soft) {
            claim(s.var, 1, "var");
            claim(s.slack_lo, 2, "slack_lo");
            claim(s.slack_hi, 2, "slack_hi");
            if (!(s.lb <= s.ub)) issues.push_back("soft entry with lb > ub at var " + std::to_string(s.var));
            if (s.slack_lo < 0 && s.slack_hi < 0) issues.push_back("soft entry without slacks at var " + std::to_string(s.var));
          }
          if (h.lo.size() == n && h.hi.size() == n) {
            for (Eigen::Index i = 0; i < n; ++i) {
              const int ro = role[static_cast<std::size_t>(i)];
              if (ro == 1 && (std::isfinite(h.lo(i)) || std::isfinite(h.hi(i))))
                issues.push_back("softened variable " + std::to_string(i) + " must not carry a hard bound");
              if (ro == 2 && (h.lo(i) != 0.0 || h.hi(i) != kInf))
                issues.push_back("slack " + std::to_string(i) + " must have bounds [0, inf)");
            }
          }
        }
      },
      p.h);

  if (!dims) return r;

  const auto eh = sym_eig(p.cost.H);
  const double hscale = std::max(max_abs(p.cost.H.mat()), 1e-300);
  r.sigma = std::max(eh.min(), 0.0);
  r.h_pd  = eh.min() > 1e-12 * hscale;

  if (p.eq) r.a_full_row_rank &= detail::full_row_rank(p.eq->A, "A", issues);
  const AffineEq* heq = p.h_equality();
  if (heq) r.a_full_row_rank &= detail::full_row_rank(heq->A, "A (h equality)", issues);

  if (heq && heq->A.rows() > 0) {
    const Mat z = null_basis(heq->A);
    r.h_pd_on_nullspace = z.cols() == 0 || min_eig(SymMatrix(Mat(z.transpose() * p.cost.H.mat() * z))) > 1e-12 * hscale;
  } else {
    r.h_pd_on_nullspace = r.h_pd;
  }

  r.general_path   = r.h_pd && r.a_full_row_rank;
  r.projected_path = r.general_path && heq != nullptr;
  r.kkt_path       = heq != nullptr && r.h_pd_on_nullspace && r.a_full_row_rank;

  const bool diag_h = p.cost.H.is_diagonal();
  r.inner_closed_form = std::visit(
      [&](const auto& h) {
        using T = std::decay_t<decltype(h)>;
        if constexpr (std::is_same_v<T, hterm::Zero>) return r.h_pd;
        else if constexpr (std::is_same_v<T, hterm::Equality>) return r.kkt_path;
        else return diag_h && r.h_pd;
      },
      p.h);
  if (!r.inner_closed_form) {
    if (!r.h_pd && !r.kkt_path)
      issues.push_back("H is not positive definite (nor positive definite on the null space of an equality h)");
    else
      issues.push_back("box-type h requires a diagonal positive definite H for the closed-form inner minimizer");
  }
  return r;
}

/// Throws a Validation error listing every issue when the problem is unusable.
inline ValidationReport validate_or_throw(const ComposedProblem& p)
{
  auto r = validate(p);
  if (!r.ok()) {
    std::string msg;
    for (const auto& s : r.issues) msg += (msg.empty() ? "" : "; ") + s;
    fail(ErrorKind::Validation, msg.empty() ? "problem does not satisfy solver assumptions" : msg);
  }
  return r;
}

}  // namespace gfdgm

#endif  // GFDGM_PROBLEM_HPP
