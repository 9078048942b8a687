#ifndef GFDGM_CURVATURE_HPP
#define GFDGM_CURVATURE_HPP

/**
 * @file
 * @brief Dual curvature matrices C P C^T.
 *
 * The negative dual -d has a quadratic upper model with matrix L for every
 * L >= C P C^T, where P depends on the problem structure:
 *  - P = H^{-1} when H is positive definite (any closed convex h),
 *  - P = H^{-1/2}(I - M)H^{-1/2} when additionally h is an equality indicator,
 *  - P = K11, the upper-left block of the inverse KKT matrix, when h is an
 *    equality indicator and H is only positive definite on its null space.
 */

#include <optional>
#include <string>

#include "gfdgm/numkern.hpp"
#include "gfdgm/problem.hpp"

namespace gfdgm {

enum class PSource { InverseH, ProjectedInverseH, KktBlock };

inline const char* to_string(PSource s)
{
  switch (s) {
    case PSource::InverseH: return "inverse_h";
    case PSource::ProjectedInverseH: return "projected_inverse_h";
    case PSource::KktBlock: return "kkt_block";
  }
  return "unknown";
}

/// Symmetric PSD value = C P C^T together with a full-row-rank factor P = Q^T Q.
struct CurvatureMatrix
{
  SymMatrix value;
  PSource source = PSource::InverseH;
  Mat q_factor;                 ///< Q, q x n with rank q
  Mat C;                        ///< stacked constraint matrix used to build value
  std::optional<SymMatrix> k11; ///< only for PSource::KktBlock

  Eigen::Index q() const { return q_factor.rows(); }
  Eigen::Index dim() const { return value.dim(); }
  /// P = Q^T Q.
  Mat P() const { return q_factor.transpose() * q_factor; }
};

namespace detail {

/// scale bounds the size of the factors, so a result that cancels to rounding noise is not rejected.
inline SymMatrix checked_psd(const Mat& m, const char* who, double scale = 0.0)
{
  SymMatrix s(Mat(0.5 * (m + m.transpose())));
  if (s.dim() > 0) {
    const double lo = min_eig(s);
    const double nm = std::max({sym_norm2(s), scale, 1e-300});
    if (lo < -1e-9 * nm) fail(ErrorKind::NotPositiveSemidefinite, std::string(who) + ": curvature is not PSD");
  }
  return s;
}

/// Full-row-rank factor Q with Q^T Q = P for a PSD P.
inline Mat psd_factor(const SymMatrix& p, double tol = 1e-12)
{
  const auto e   = sym_eig(p);
  const double top = std::max(e.max(), 0.0);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < e.values.size(); ++i)
    if (e.values(i) > tol * top && e.values(i) > 0.0) keep.push_back(i);
  Mat q(static_cast<Eigen::Index>(keep.size()), p.dim());
  for (std::size_t r = 0; r < keep.size(); ++r) {
    const auto i = keep[r];
    q.row(static_cast<Eigen::Index>(r)) = std::sqrt(e.values(i)) * e.vectors.col(i).transpose();
  }
  return q;
}

inline Mat solve_pd(const SymMatrix& h, const Mat& rhs)
{
  Eigen::LLT<Mat> llt(h.mat());
  if (llt.info() != Eigen::Success)
    fail(ErrorKind::NotPositiveSemidefinite, "H is singular; use the KKT-block curvature instead");
  return llt.solve(rhs);
}

}  // namespace detail

/// C H^{-1} C^T with Q = H^{-1/2}.
inline CurvatureMatrix curvature_general(const ComposedProblem& p)
{
  const double hscale = std::max(max_abs(p.cost.H.mat()), 1e-300);
  if (!(min_eig(p.cost.H) > 1e-12 * hscale))
    fail(ErrorKind::NotPositiveSemidefinite, "curvature_general: H is singular; use curvature_kkt (P = K11) instead");
  CurvatureMatrix cm;
  cm.C        = p.C();
  cm.source   = PSource::InverseH;
  cm.value    = detail::checked_psd(cm.C * detail::solve_pd(p.cost.H, cm.C.transpose()), "curvature_general");
  cm.q_factor = sym_inv_sqrt(p.cost.H).mat();
  return cm;
}

/**
 * @brief C H^{-1/2} (I - M) H^{-1/2} C^T for h = indicator of {Ax = b}.
 *
 * M = H^{-1/2} A^T (A H^{-1} A^T)^{-1} A H^{-1/2} is the orthogonal projector
 * onto range(H^{-1/2} A^T); Q = Z^T H^{-1/2} where Z spans range(I - M).
 */
inline CurvatureMatrix curvature_projected(const ComposedProblem& p)
{
  const AffineEq* eq = p.h_equality();
  if (!eq) fail(ErrorKind::InvalidArgument, "curvature_projected: h is not an equality indicator");
  if (rank_of(eq->A) < eq->A.rows()) fail(ErrorKind::InvalidArgument, "curvature_projected: A lacks full row rank");
  const double hscale = std::max(max_abs(p.cost.H.mat()), 1e-300);
  if (!(min_eig(p.cost.H) > 1e-12 * hscale))
    fail(ErrorKind::NotPositiveSemidefinite, "curvature_projected: H is singular; use curvature_kkt");

  const auto n    = p.n();
  const Mat hm    = sym_inv_sqrt(p.cost.H).mat();
  const Mat ahm   = eq->A * hm;
  const Mat ha    = ahm * ahm.transpose();
  const Mat m     = ahm.transpose() * Eigen::LLT<Mat>(ha).solve(ahm);
  const Mat proj  = Mat::Identity(n, n) - m;
  const Mat z     = range_basis(proj).basis;

  CurvatureMatrix cm;
  cm.C        = p.C();
  cm.source   = PSource::ProjectedInverseH;
  cm.q_factor = z.transpose() * hm;
  const Mat cq = cm.C * hm;
  cm.value    = detail::checked_psd(cq * proj * cq.transpose(), "curvature_projected", cq.squaredNorm());
  return cm;
}

/// C K11 C^T with K11 the upper-left block of [[H, A^T], [A, 0]]^{-1}.
inline CurvatureMatrix curvature_kkt(const ComposedProblem& p)
{
  const AffineEq* eq = p.h_equality();
  if (!eq) fail(ErrorKind::InvalidArgument, "curvature_kkt: h is not an equality indicator");
  const KktFactor kkt(p.cost.H, eq->A);
  const Mat k11 = kkt.inverse_block11();

  CurvatureMatrix cm;
  cm.C        = p.C();
  cm.source   = PSource::KktBlock;
  cm.k11      = SymMatrix(Mat(0.5 * (k11 + k11.transpose())));
  cm.q_factor = detail::psd_factor(*cm.k11);
  cm.value    = detail::checked_psd(cm.C * cm.k11->mat() * cm.C.transpose(), "curvature_kkt");
  return cm;
}

/// Curvature for a given source, dispatching to the matching routine.
inline CurvatureMatrix curvature(const ComposedProblem& p, PSource source)
{
  switch (source) {
    case PSource::InverseH: return curvature_general(p);
    case PSource::ProjectedInverseH: return curvature_projected(p);
    case PSource::KktBlock: return curvature_kkt(p);
  }
  fail(ErrorKind::InvalidArgument, "unknown curvature source");
}

enum class LipschitzVariant {
  NormOverSigma,  ///< ||C||_2^2 / sigma
  QuadTight,      ///< ||C H^{-1} C^T||_2
  KktTight,       ///< ||C K11 C^T||_2
};

/// Scalar Lipschitz constants of grad d used by the classical baselines.
inline double scalar_lipschitz(const ComposedProblem& p, LipschitzVariant variant)
{
  switch (variant) {
    case LipschitzVariant::NormOverSigma: {
      const double sigma = p.cost.sigma();
      const double hscale = std::max(max_abs(p.cost.H.mat()), 1e-300);
      if (!(sigma > 1e-12 * hscale)) fail(ErrorKind::InvalidArgument, "scalar_lipschitz: sigma = 0");
      const double cn = norm2(p.C());
      return cn * cn / sigma;
    }
    case LipschitzVariant::QuadTight: return sym_norm2(curvature_general(p).value);
    case LipschitzVariant::KktTight: return sym_norm2(curvature_kkt(p).value);
  }
  fail(ErrorKind::InvalidArgument, "unknown Lipschitz variant");
}

}  // namespace gfdgm

#endif  // GFDGM_CURVATURE_HPP
