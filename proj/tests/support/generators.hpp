#ifndef GFDGM_TESTS_GENERATORS_HPP
#define GFDGM_TESTS_GENERATORS_HPP

// Seeded random problem instances shared by the unit tests and the acceptance binary.

#include <random>

#include "gfdgm/gfdgm.hpp"

namespace gfdgm::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

inline Vec random_vec(Rng& rng, Eigen::Index n, double lo = -1.0, double hi = 1.0)
{
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = uniform(rng, lo, hi);
  return v;
}

inline Mat random_mat(Rng& rng, Eigen::Index r, Eigen::Index c)
{
  Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = uniform(rng, -1.0, 1.0);
  return m;
}

inline Mat random_orthogonal(Rng& rng, Eigen::Index n)
{
  Eigen::HouseholderQR<Mat> qr(random_mat(rng, n, n));
  return qr.householderQ();
}

/// Symmetric positive definite with eigenvalues log-uniform in [1, cond].
inline Mat random_pd(Rng& rng, Eigen::Index n, double cond = 100.0)
{
  const Mat q = random_orthogonal(rng, n);
  Vec ev(n);
  for (Eigen::Index i = 0; i < n; ++i) ev(i) = std::pow(cond, uniform(rng, 0.0, 1.0));
  const Mat m = q * ev.asDiagonal() * q.transpose();
  return 0.5 * (m + m.transpose());
}

inline Vec random_pd_diag(Rng& rng, Eigen::Index n, double lo = 0.5, double hi = 5.0) { return random_vec(rng, n, lo, hi); }

enum class Family {
  Smooth,         ///< h = 0, H dense PD, dualized equality, box g
  Box,            ///< h = box, H diagonal, dualized equality, box or zero g
  Soft,           ///< h = soft box with slacks, H diagonal, dualized equality
  Equality,       ///< h = equality indicator, H dense PD, box g
  EqualitySingular,  ///< as Equality with H singular but PD on null(A)
};

inline const char* to_string(Family f)
{
  switch (f) {
    case Family::Smooth: return "smooth";
    case Family::Box: return "box";
    case Family::Soft: return "soft";
    case Family::Equality: return "equality";
    case Family::EqualitySingular: return "equality-singular";
  }
  return "?";
}

/// Sizes respect n <= 10 and m + p <= 8.
struct Sizes
{
  Eigen::Index n = 4, m = 1, p = 2;
};

inline Sizes random_sizes(Rng& rng, Family f)
{
  Sizes s;
  s.n = uniform_int(rng, 2, f == Family::Soft ? 6 : 8);
  s.m = uniform_int(rng, f == Family::Equality || f == Family::EqualitySingular ? 1 : 0,
                    static_cast<int>(std::min<Eigen::Index>(3, s.n - 1)));
  s.p = uniform_int(rng, f == Family::Smooth || f == Family::Equality || f == Family::EqualitySingular ? 1 : 0,
                    static_cast<int>(8 - s.m));
  return s;
}

/// Strictly feasible instance of the given family around a random point.
inline ComposedProblem random_problem(Rng& rng, Family f, Sizes s)
{
  ComposedProblem p;
  const auto n = s.n;
  const Vec x0 = random_vec(rng, n, -0.5, 0.5);

  if (f == Family::Soft) {
    // s.n main variables, one upper-side and one lower-side slack for the first k of them
    const auto k  = std::min<Eigen::Index>(2, n);
    const auto nt = n + 2 * k;
    p.cost.H    = SymMatrix::diagonal(random_pd_diag(rng, nt));
    p.cost.zeta = random_vec(rng, nt, -2.0, 2.0);
    hterm::SoftBoxCoupled h;
    h.lo = Vec::Constant(nt, -kInf);
    h.hi = Vec::Constant(nt, kInf);
    h.lo.head(n) = x0.array() - uniform(rng, 0.5, 2.0);
    h.hi.head(n) = x0.array() + uniform(rng, 0.5, 2.0);
    h.lo.head(k).setConstant(-kInf);
    h.hi.head(k).setConstant(kInf);
    h.lo.tail(2 * k).setZero();
    for (Eigen::Index i = 0; i < k; ++i) {
      SoftEntry e;
      e.var      = i;
      e.slack_hi = n + 2 * i;
      e.slack_lo = n + 2 * i + 1;
      e.lb       = x0(i) - uniform(rng, 0.05, 0.3);
      e.ub       = x0(i) + uniform(rng, 0.05, 0.3);
      h.soft.push_back(e);
    }
    p.h = h;
    if (s.m > 0) {
      Mat a     = Mat::Zero(s.m, nt);
      a.leftCols(n) = random_mat(rng, s.m, n);
      Vec xf    = Vec::Zero(nt);
      xf.head(n) = x0;
      p.eq      = AffineEq{a, a * xf};
    }
    p.g.B = Mat(0, nt);
    return p;
  }

  switch (f) {
    case Family::Smooth:
    case Family::Equality: p.cost.H = SymMatrix(random_pd(rng, n, 50.0)); break;
    case Family::Box: p.cost.H = SymMatrix::diagonal(random_pd_diag(rng, n)); break;
    case Family::EqualitySingular: break;
    case Family::Soft: break;
  }
  p.cost.zeta = random_vec(rng, n, -2.0, 2.0);
  const Mat a = random_mat(rng, s.m, n);
  const Vec b = a * x0;

  if (f == Family::EqualitySingular) {
    // H = Z G Z^T: PD on null(A), zero on range(A^T)
    const Mat z = null_basis(a);
    const Mat g = random_pd(rng, z.cols(), 20.0);
    p.cost.H    = SymMatrix(Mat(z * g * z.transpose()));
  }

  if (f == Family::Equality || f == Family::EqualitySingular) {
    p.h = hterm::Equality{AffineEq{a, b}};
  } else {
    if (s.m > 0) p.eq = AffineEq{a, b};
    if (f == Family::Box)
      p.h = hterm::Box{Vec(x0.array() - uniform(rng, 0.2, 1.0)), Vec(x0.array() + uniform(rng, 0.2, 1.0))};
  }

  p.g.B = random_mat(rng, s.p, n);
  if (s.p > 0) {
    p.g.kind = GKind::Box;
    const Vec bx = p.g.B * x0;
    p.g.d_lo = bx - random_vec(rng, s.p, 0.05, 0.5);
    p.g.d_hi = bx + random_vec(rng, s.p, 0.05, 0.5);
  }
  return p;
}

inline ComposedProblem random_problem(Rng& rng, Family f) { return random_problem(rng, f, random_sizes(rng, f)); }

/// The curvature that certifies the dual bound for p.
inline CurvatureMatrix applicable_curvature(const ComposedProblem& p)
{
  return validate(p).kkt_path ? curvature_kkt(p) : curvature_general(p);
}

}  // namespace gfdgm::testing

#endif  // GFDGM_TESTS_GENERATORS_HPP
