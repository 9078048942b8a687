#ifndef GFDGM_PROX_HPP
#define GFDGM_PROX_HPP

// Prox operators in a metric:
//   prox_psi^L(x) = argmin_y psi(y) + 1/2 ||y - x||_L^2
// and the conjugate route prox_{g*}^L(x) = x - L^{-1} prox_g^{L^{-1}}(L x).

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "gfdgm/error.hpp"
#include "gfdgm/numkern.hpp"
#include "gfdgm/problem.hpp"

namespace gfdgm {

enum class PsiKind { Zero, BoxIndicator, NonnegOrthant, SupportOfBox, SoftBoxCoupled };

inline const char* to_string(PsiKind k)
{
  switch (k) {
    case PsiKind::Zero: return "zero";
    case PsiKind::BoxIndicator: return "box";
    case PsiKind::NonnegOrthant: return "nonneg";
    case PsiKind::SupportOfBox: return "support_of_box";
    case PsiKind::SoftBoxCoupled: return "soft_box";
  }
  return "unknown";
}

struct ProxFunction
{
  PsiKind kind = PsiKind::Zero;
  Vec lo, hi;

  static ProxFunction zero() { return {}; }
  static ProxFunction box(Vec lo, Vec hi) { return {PsiKind::BoxIndicator, std::move(lo), std::move(hi)}; }
  static ProxFunction nonneg() { return {PsiKind::NonnegOrthant, {}, {}}; }
  /// sigma(y) = sum_i max(lo_i y_i, hi_i y_i), the conjugate of the box indicator.
  static ProxFunction support_of_box(Vec lo, Vec hi) { return {PsiKind::SupportOfBox, std::move(lo), std::move(hi)}; }
};

/// Largest dimension accepted by the enumeration used for non-diagonal metrics.
inline constexpr Eigen::Index kMaxEnumerationDim = 12;

namespace detail {

inline Vec clip(const Vec& x, const Vec& lo, const Vec& hi) { return x.cwiseMax(lo).cwiseMin(hi); }

/// argmin over lo <= y <= hi of 1/2 (y - x)^T L (y - x), by enumerating
/// free / at-lower / at-upper labels for every coordinate.
inline Vec box_prox_enumerate(const Mat& l, const Vec& x, const Vec& lo, const Vec& hi)
{
  const auto n = x.size();
  if (n > kMaxEnumerationDim)
    fail(ErrorKind::UnsupportedProx, "box prox with a non-diagonal metric is limited to n <= " +
                                         std::to_string(kMaxEnumerationDim));
  long long total = 1;
  for (Eigen::Index i = 0; i < n; ++i) total *= 3;

  Vec best;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<int> label(static_cast<std::size_t>(n));
  for (long long code = 0; code < total; ++code) {
    long long c = code;
    bool ok     = true;
    Vec y(n);
    std::vector<Eigen::Index> free_idx;
    for (Eigen::Index i = 0; i < n; ++i) {
      label[static_cast<std::size_t>(i)] = static_cast<int>(c % 3);
      c /= 3;
      const int lab = label[static_cast<std::size_t>(i)];
      if (lab == 0) {
        free_idx.push_back(i);
        y(i) = 0.0;
      } else {
        y(i) = lab == 1 ? lo(i) : hi(i);
        if (!std::isfinite(y(i))) ok = false;
      }
    }
    if (!ok) continue;
    const auto nf = static_cast<Eigen::Index>(free_idx.size());
    if (nf > 0) {
      // stationarity on free coordinates: L_ff y_f = L_f: x - L_fb y_b
      Mat lff(nf, nf);
      Vec rhs(nf);
      for (Eigen::Index a = 0; a < nf; ++a) {
        const auto i = free_idx[static_cast<std::size_t>(a)];
        double r     = l.row(i).dot(x);
        for (Eigen::Index j = 0; j < n; ++j)
          if (label[static_cast<std::size_t>(j)] != 0) r -= l(i, j) * y(j);
        rhs(a) = r;
        for (Eigen::Index b = 0; b < nf; ++b) lff(a, b) = l(i, free_idx[static_cast<std::size_t>(b)]);
      }
      const Vec yf = Eigen::LLT<Mat>(lff).solve(rhs);
      for (Eigen::Index a = 0; a < nf; ++a) {
        const auto i = free_idx[static_cast<std::size_t>(a)];
        y(i)         = yf(a);
        if (y(i) < lo(i) || y(i) > hi(i)) ok = false;
      }
    }
    if (!ok) continue;
    const Vec d      = y - x;
    const double val = 0.5 * d.dot(l * d);
    if (val < best_val) {
      best_val = val;
      best     = y;
    }
  }
  if (best.size() == 0) fail(ErrorKind::UnsupportedProx, "box prox enumeration found no candidate");
  return best;
}

}  // namespace detail

/**
 * @brief prox_psi^L(x).
 *
 * Separable closed forms need a diagonal L; the box indicator also accepts a
 * full L through enumeration for n <= kMaxEnumerationDim.
 */
inline Vec prox(const ProxFunction& psi, const SymMatrix& l, const Vec& x)
{
  require(l.dim() == x.size(), "prox: metric and vector dimensions differ");
  const bool diag = l.is_diagonal();
  switch (psi.kind) {
    case PsiKind::Zero: return x;
    case PsiKind::NonnegOrthant:
      if (!diag) fail(ErrorKind::UnsupportedProx, "nonnegative-orthant prox needs a diagonal metric");
      return x.cwiseMax(0.0);
    case PsiKind::BoxIndicator:
      require(psi.lo.size() == x.size() && psi.hi.size() == x.size(), "prox: box dimension mismatch");
      if (diag) return detail::clip(x, psi.lo, psi.hi);
      return detail::box_prox_enumerate(l.mat(), x, psi.lo, psi.hi);
    case PsiKind::SupportOfBox: {
      if (!diag) fail(ErrorKind::UnsupportedProx, "support-function prox needs a diagonal metric");
      // y = x - L^{-1} clip(L x, lo, hi), componentwise
      const Vec d = l.mat().diagonal();
      return x - detail::clip(Vec(d.cwiseProduct(x)), psi.lo, psi.hi).cwiseQuotient(d);
    }
    case PsiKind::SoftBoxCoupled: break;
  }
  fail(ErrorKind::UnsupportedProx, std::string("no prox for ") + to_string(psi.kind));
}

/// x - L^{-1} prox_g^{L^{-1}}(L x).
inline Vec conjugate_prox_via_moreau(const ProxFunction& g, const SymMatrix& l, const Vec& x)
{
  require(l.dim() == x.size(), "conjugate_prox_via_moreau: dimension mismatch");
  const Eigen::LLT<Mat> llt(l.mat());
  if (llt.info() != Eigen::Success) fail(ErrorKind::NotPositiveSemidefinite, "metric is not positive definite");
  const Mat l_inv = llt.solve(Mat::Identity(l.dim(), l.dim()));
  const Vec inner = prox(g, SymMatrix(Mat(0.5 * (l_inv + l_inv.transpose()))), Vec(l.mat() * x));
  return x - llt.solve(inner);
}

/// min(v + Lmu^{-1}(By - d_lo), max(v + Lmu^{-1}(By - d_hi), 0)), componentwise.
inline Vec support_prox_box(const Vec& d_lo, const Vec& d_hi, const Vec& lmu_diag, const Vec& v, const Vec& by)
{
  const auto p = v.size();
  require(d_lo.size() == p && d_hi.size() == p && lmu_diag.size() == p && by.size() == p,
          "support_prox_box: dimension mismatch");
  Vec mu(p);
  for (Eigen::Index i = 0; i < p; ++i) {
    const double up = v(i) + (by(i) - d_hi(i)) / lmu_diag(i);
    const double dn = v(i) + (by(i) - d_lo(i)) / lmu_diag(i);
    mu(i)           = std::min(dn, std::max(up, 0.0));
  }
  return mu;
}

/// min 1/2 q_y y^2 + a y + 1/2 q_s s^2 + c s  s.t.  y <= ub + s, s >= 0.
struct SoftPair
{
  double q_y = 1.0, a = 0.0;
  double q_s = 1.0, c = 0.0;
  double ub  = 0.0;
};

struct SoftPairSolution
{
  double y = 0.0, s = 0.0;
};

inline SoftPairSolution soft_box_inner_min(const SoftPair& d)
{
  if (!(d.q_y > 0.0) || !(d.q_s > 0.0)) fail(ErrorKind::InvalidArgument, "soft_box_inner_min: curvature must be positive");
  const double y0 = -d.a / d.q_y;
  const double s0 = std::max(0.0, -d.c / d.q_s);
  if (y0 <= d.ub + s0) return {y0, s0};
  // active: y = ub + s, minimize over s >= 0
  const double s = std::max(0.0, -(d.q_y * d.ub + d.a + d.c) / (d.q_y + d.q_s));
  return {d.ub + s, s};
}

/// One softened variable with optional slacks on either side:
/// lb - s_lo <= y <= ub + s_hi, s_lo, s_hi >= 0.
struct SoftTriple
{
  double q_y = 1.0, a = 0.0;
  bool has_lo = false, has_hi = false;
  double q_lo = 1.0, c_lo = 0.0;
  double q_hi = 1.0, c_hi = 0.0;
  double lb = -kInf, ub = kInf;
};

struct SoftTripleSolution
{
  double y = 0.0, s_lo = 0.0, s_hi = 0.0;
};

/// Global minimizer of the two-sided soft bound problem; at most one side is active.
inline SoftTripleSolution soft_box_inner_min(const SoftTriple& d)
{
  if (!(d.q_y > 0.0) || (d.has_lo && !(d.q_lo > 0.0)) || (d.has_hi && !(d.q_hi > 0.0)))
    fail(ErrorKind::InvalidArgument, "soft_box_inner_min: curvature must be positive");
  SoftTripleSolution sol;
  sol.s_lo = d.has_lo ? std::max(0.0, -d.c_lo / d.q_lo) : 0.0;
  sol.s_hi = d.has_hi ? std::max(0.0, -d.c_hi / d.q_hi) : 0.0;
  sol.y    = -d.a / d.q_y;
  const double hi = d.has_hi ? d.ub + sol.s_hi : d.ub;
  const double lo = d.has_lo ? d.lb - sol.s_lo : d.lb;
  if (sol.y > hi) {
    if (d.has_hi) {
      const auto r = soft_box_inner_min(SoftPair{d.q_y, d.a, d.q_hi, d.c_hi, d.ub});
      sol.y    = r.y;
      sol.s_hi = r.s;
    } else {
      sol.y = d.ub;
    }
  } else if (sol.y < lo) {
    if (d.has_lo) {
      // mirror y -> -y
      const auto r = soft_box_inner_min(SoftPair{d.q_y, -d.a, d.q_lo, d.c_lo, -d.lb});
      sol.y    = -r.y;
      sol.s_lo = r.s;
    } else {
      sol.y = d.lb;
    }
  }
  return sol;
}

}  // namespace gfdgm

#endif  // GFDGM_PROX_HPP
