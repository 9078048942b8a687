#ifndef GFDGM_NUMKERN_HPP
#define GFDGM_NUMKERN_HPP

/**
 * @file
 * @brief Dense symmetric linear-algebra kernels.
 *
 * Everything in the library is desk-scale (a few hundred unknowns at most),
 * so all matrices are dense Eigen objects. Factorizations are computed once
 * and are read-only afterwards.
 */

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "gfdgm/error.hpp"

namespace gfdgm {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Largest absolute entry, 0 for empty matrices.
inline double max_abs(const Mat& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }
inline double max_abs(const Vec& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

/**
 * @brief Dense symmetric matrix.
 *
 * Construction checks that the input is symmetric up to 1e-12 relative to its
 * largest entry and stores the exact symmetrization (M + M^T) / 2.
 */
class SymMatrix
{
public:
  SymMatrix() = default;

  explicit SymMatrix(const Mat& m)
  {
    require(m.rows() == m.cols(), "SymMatrix: matrix is not square");
    require(m.allFinite(), "SymMatrix: non-finite entry");
    const double scale = std::max(max_abs(m), 1.0);
    const double asym  = m.size() == 0 ? 0.0 : max_abs(Mat(m - m.transpose()));
    if (asym > 1e-12 * scale) {
      std::ostringstream os;
      os << "SymMatrix: asymmetry " << asym << " exceeds tolerance";
      fail(ErrorKind::InvalidArgument, os.str());
    }
    m_ = 0.5 * (m + m.transpose());
  }

  static SymMatrix identity(Eigen::Index n) { return SymMatrix(Mat::Identity(n, n)); }
  static SymMatrix zero(Eigen::Index n) { return SymMatrix(Mat::Zero(n, n)); }
  static SymMatrix diagonal(const Vec& d) { return SymMatrix(Mat(d.asDiagonal())); }

  Eigen::Index dim() const { return m_.rows(); }
  const Mat& mat() const { return m_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

  bool is_diagonal(double tol = 0.0) const
  {
    for (Eigen::Index j = 0; j < m_.cols(); ++j)
      for (Eigen::Index i = 0; i < m_.rows(); ++i)
        if (i != j && std::abs(m_(i, j)) > tol) return false;
    return true;
  }

  friend bool operator==(const SymMatrix& a, const SymMatrix& b) { return a.m_ == b.m_; }

private:
  Mat m_;
};

/// Eigenvalues ascending, orthonormal eigenvectors as columns.
struct EigenDecomp
{
  Vec values;
  Mat vectors;

  double min() const { return values.size() ? values(0) : 0.0; }
  double max() const { return values.size() ? values(values.size() - 1) : 0.0; }
};

/**
 * @brief Symmetric eigendecomposition.
 *
 * Backed by Eigen's tridiagonal QR solver. The accuracy contract
 * (orthonormality to 1e-10, reconstruction to 1e-9 relative) is enforced here.
 */
inline EigenDecomp sym_eig(const SymMatrix& m)
{
  if (m.dim() == 0) return {};
  Eigen::SelfAdjointEigenSolver<Mat> es(m.mat());
  if (es.info() != Eigen::Success) fail(ErrorKind::NonConvergence, "sym_eig: eigensolver did not converge");
  EigenDecomp out{es.eigenvalues(), es.eigenvectors()};

  const auto n       = m.dim();
  const double ortho = max_abs(Mat(out.vectors.transpose() * out.vectors - Mat::Identity(n, n)));
  const double recon = max_abs(Mat(out.vectors * out.values.asDiagonal() * out.vectors.transpose() - m.mat()));
  if (ortho > 1e-10 || recon > 1e-9 * std::max(max_abs(m.mat()), 1e-300)) {
    std::ostringstream os;
    os << "sym_eig: accuracy check failed (orthogonality " << ortho << ", reconstruction " << recon << ")";
    fail(ErrorKind::NonConvergence, os.str());
  }
  return out;
}

inline double min_eig(const SymMatrix& m) { return sym_eig(m).min(); }
inline double max_eig(const SymMatrix& m) { return sym_eig(m).max(); }

/// Spectral norm of a symmetric matrix.
inline double sym_norm2(const SymMatrix& m)
{
  const auto e = sym_eig(m);
  return std::max(std::abs(e.min()), std::abs(e.max()));
}

/// Spectral norm of a general matrix.
inline double norm2(const Mat& m)
{
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues()(0);
}

/// Applies a scalar function to the spectrum: V f(Lambda) V^T.
template<typename F>
SymMatrix spectral_map(const SymMatrix& m, F&& f)
{
  const auto e = sym_eig(m);
  Vec fv(e.values.size());
  for (Eigen::Index i = 0; i < fv.size(); ++i) fv(i) = f(e.values(i));
  return SymMatrix(Mat(e.vectors * fv.asDiagonal() * e.vectors.transpose()));
}

/// Symmetric square root of a PSD matrix (negative round-off clamped to zero).
inline SymMatrix sym_sqrt(const SymMatrix& m)
{
  return spectral_map(m, [](double v) { return std::sqrt(std::max(v, 0.0)); });
}

/// Symmetric inverse square root of a PD matrix.
inline SymMatrix sym_inv_sqrt(const SymMatrix& m)
{
  const double lo = min_eig(m);
  if (!(lo > 0.0)) fail(ErrorKind::NotPositiveSemidefinite, "sym_inv_sqrt: matrix is not positive definite");
  return spectral_map(m, [](double v) { return 1.0 / std::sqrt(v); });
}

/// Regularization policy for chol_psd.
struct ShiftPolicy
{
  /// Largest admissible shift, relative to max |M_ij|.
  double cap = 1e-8;
};

/// Lower-triangular Cholesky factor of M + delta I.
struct CholFactor
{
  Mat lower;
  double shift = 0.0;

  Vec solve(const Vec& rhs) const
  {
    Vec y = lower.triangularView<Eigen::Lower>().solve(rhs);
    return lower.transpose().triangularView<Eigen::Upper>().solve(y);
  }
};

/**
 * @brief Cholesky factorization with a minimal diagonal shift.
 *
 * The shift is zero when the smallest eigenvalue exceeds 1e-10 ||M||; otherwise
 * the smallest shift making M + delta I numerically PD is used, up to the cap.
 */
inline CholFactor chol_psd(const SymMatrix& m, ShiftPolicy policy = {})
{
  const auto n       = m.dim();
  const double scale = std::max(max_abs(m.mat()), 1e-300);
  const auto e       = sym_eig(m);
  double delta       = 0.0;
  if (n > 0 && e.min() <= 1e-10 * scale) delta = 1e-10 * scale - e.min();
  if (delta > policy.cap * scale) {
    std::ostringstream os;
    os << "chol_psd: minimum eigenvalue " << e.min() << " requires shift beyond cap";
    fail(ErrorKind::NotPositiveSemidefinite, os.str());
  }
  Eigen::LLT<Mat> llt(m.mat() + delta * Mat::Identity(n, n));
  if (llt.info() != Eigen::Success) fail(ErrorKind::NotPositiveSemidefinite, "chol_psd: factorization failed");
  return {llt.matrixL(), delta};
}

/// Orthonormal basis of range(M) and its rank.
struct RangeBasis
{
  Mat basis;
  Eigen::Index rank = 0;
};

/**
 * @brief Orthonormal range basis from the SVD.
 *
 * Rank counts singular values above tol times the largest one.
 */
inline RangeBasis range_basis(const Mat& m, double tol = 1e-9)
{
  require(m.allFinite(), "range_basis: non-finite entry");
  if (m.size() == 0) return {Mat(m.rows(), 0), 0};
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU);
  const Vec& s = svd.singularValues();
  if (s(0) <= 0.0) return {Mat(m.rows(), 0), 0};
  Eigen::Index r = 0;
  while (r < s.size() && s(r) > tol * s(0)) ++r;
  return {svd.matrixU().leftCols(r), r};
}

inline Eigen::Index rank_of(const Mat& m, double tol = 1e-9) { return range_basis(m, tol).rank; }

/// Orthonormal basis of the null space of A (n x (n - rank)).
inline Mat null_basis(const Mat& a, double tol = 1e-9)
{
  const auto n = a.cols();
  if (a.rows() == 0) return Mat::Identity(n, n);
  Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeFullV);
  const Vec& s = svd.singularValues();
  Eigen::Index r = 0;
  if (s.size() && s(0) > 0.0)
    while (r < s.size() && s(r) > tol * s(0)) ++r;
  return svd.matrixV().rightCols(n - r);
}

/**
 * @brief Cached factorization of the KKT matrix [[H, A^T], [A, 0]].
 *
 * Requires A of full row rank and H positive definite on null(A). Each solve
 * applies one step of iterative refinement and checks the residual bound
 * ||K sol - rhs|| <= 1e-9 ||rhs||.
 */
class KktFactor
{
public:
  KktFactor() = default;

  KktFactor(const SymMatrix& h, const Mat& a) : n_(h.dim()), m_(a.rows())
  {
    require(a.rows() == 0 || a.cols() == n_, "kkt_factor: dimension mismatch between H and A");
    const auto rank = rank_of(a);
    if (rank < m_) {
      std::ostringstream os;
      os << "kkt_factor: A has rank " << rank << " < " << m_ << " rows";
      fail(ErrorKind::SingularKkt, os.str());
    }
    const Mat z = null_basis(a);
    if (z.cols() > 0) {
      const double lo    = min_eig(SymMatrix(Mat(z.transpose() * h.mat() * z)));
      const double scale = std::max(max_abs(h.mat()), 1e-300);
      if (lo <= 1e-12 * scale) {
        std::ostringstream os;
        os << "kkt_factor: H not positive definite on null(A); min reduced eigenvalue " << lo << ", null dim "
           << z.cols();
        fail(ErrorKind::SingularKkt, os.str());
      }
    }
    k_.setZero(n_ + m_, n_ + m_);
    k_.topLeftCorner(n_, n_) = h.mat();
    if (m_ > 0) {
      k_.topRightCorner(n_, m_)    = a.transpose();
      k_.bottomLeftCorner(m_, n_)  = a;
    }
    lu_.compute(k_);
  }

  Eigen::Index n() const { return n_; }
  Eigen::Index m() const { return m_; }
  const Mat& matrix() const { return k_; }

  /// Solves K sol = rhs for a stacked right-hand side of length n + m.
  Vec solve(const Vec& rhs) const
  {
    require(rhs.size() == n_ + m_, "KktFactor::solve: rhs dimension mismatch");
    Vec sol = lu_.solve(rhs);
    sol += lu_.solve(Vec(rhs - k_ * sol));
    const double res = (k_ * sol - rhs).norm();
    if (res > 1e-9 * std::max(rhs.norm(), 1e-300) && res > 1e-14) {
      std::ostringstream os;
      os << "KktFactor::solve: residual " << res << " exceeds bound";
      fail(ErrorKind::SingularKkt, os.str());
    }
    return sol;
  }

  /// Primal part of the solution to [[H, A^T], [A, 0]] [x; xi] = [top; bottom].
  Vec solve_primal(const Vec& top, const Vec& bottom) const
  {
    Vec rhs(n_ + m_);
    rhs << top, bottom;
    return solve(rhs).head(n_);
  }

  /// Upper-left n x n block of the inverse KKT matrix.
  Mat inverse_block11() const
  {
    Mat rhs = Mat::Zero(n_ + m_, n_);
    rhs.topRows(n_).setIdentity();
    Mat sol = lu_.solve(rhs);
    sol += lu_.solve(Mat(rhs - k_ * sol));
    return sol.topRows(n_);
  }

private:
  Eigen::Index n_ = 0;
  Eigen::Index m_ = 0;
  Mat k_;
  Eigen::PartialPivLU<Mat> lu_;
};

inline KktFactor kkt_factor(const SymMatrix& h, const Mat& a) { return KktFactor(h, a); }

}  // namespace gfdgm

#endif  // GFDGM_NUMKERN_HPP
