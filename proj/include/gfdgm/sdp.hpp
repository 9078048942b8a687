#ifndef GFDGM_SDP_HPP
#define GFDGM_SDP_HPP

/**
 * @file
 * @brief Small dense LMI solver over structured symmetric matrices.
 *
 * Solves
 * \f[
 *   \min_{x, y} c_x^T x + c_y^T y \quad \text{s.t.} \quad
 *   F_j(x, y) = F_{0,j} + s_j U_j X(x) U_j^T + \sum_l y_l T_{j,l} \succeq 0,
 * \f]
 * where X(x) is a symmetric matrix restricted to a sparsity pattern and y is a
 * short vector of free scalars. Every constraint is a congruence of X, which
 * is what the metric-selection programs need and keeps the Newton system
 * cheap: with G_j = U_j^T F_j^{-1} U_j all derivatives are traces against G_j.
 *
 * The method is a primal log-barrier path-following scheme with damped
 * Newton steps, preceded by a phase-I search for a strictly feasible point
 * when no start is given.
 */

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gfdgm/error.hpp"
#include "gfdgm/numkern.hpp"

namespace gfdgm {

/// Allowed nonzeros (i <= j) of a symmetric matrix.
class SymPattern
{
public:
  enum class Kind { Diagonal, BlockDiagonal, Full };

  static SymPattern diagonal(Eigen::Index n) { return block_diagonal(std::vector<Eigen::Index>(static_cast<std::size_t>(n), 1), Kind::Diagonal); }
  static SymPattern full(Eigen::Index n) { return block_diagonal({n}, Kind::Full); }
  static SymPattern block_diagonal(const std::vector<Eigen::Index>& sizes) { return block_diagonal(sizes, Kind::BlockDiagonal); }

  Kind kind() const { return kind_; }
  Eigen::Index dim() const { return dim_; }
  const std::vector<Eigen::Index>& block_sizes() const { return blocks_; }
  const std::vector<std::pair<Eigen::Index, Eigen::Index>>& entries() const { return entries_; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(entries_.size()); }

  /// X(x) = sum_k x_k E_k with E_k = e_i e_j^T + e_j e_i^T (i != j) or e_i e_i^T.
  Mat assemble(const Vec& x) const
  {
    Mat m = Mat::Zero(dim_, dim_);
    for (Eigen::Index k = 0; k < size(); ++k) {
      const auto [i, j] = entries_[static_cast<std::size_t>(k)];
      m(i, j) = x(k);
      m(j, i) = x(k);
    }
    return m;
  }

  Vec extract(const Mat& m) const
  {
    Vec x(size());
    for (Eigen::Index k = 0; k < size(); ++k) {
      const auto [i, j] = entries_[static_cast<std::size_t>(k)];
      x(k) = m(i, j);
    }
    return x;
  }

  bool contains(Eigen::Index i, Eigen::Index j) const { return block_of_[static_cast<std::size_t>(i)] == block_of_[static_cast<std::size_t>(j)]; }

  /// True when every entry outside the pattern is at most tol in magnitude.
  bool respects(const Mat& m, double tol = 0.0) const
  {
    for (Eigen::Index i = 0; i < dim_; ++i)
      for (Eigen::Index j = 0; j < dim_; ++j)
        if (!contains(i, j) && std::abs(m(i, j)) > tol) return false;
    return true;
  }

  std::string describe() const
  {
    switch (kind_) {
      case Kind::Diagonal: return "diagonal";
      case Kind::Full: return "full";
      case Kind::BlockDiagonal: {
        std::string s = "block:";
        for (std::size_t b = 0; b < blocks_.size(); ++b) s += (b ? "," : "") + std::to_string(blocks_[b]);
        return s;
      }
    }
    return "unknown";
  }

private:
  static SymPattern block_diagonal(const std::vector<Eigen::Index>& sizes, Kind kind)
  {
    SymPattern p;
    p.kind_   = kind;
    p.blocks_ = sizes;
    Eigen::Index off = 0;
    for (std::size_t b = 0; b < sizes.size(); ++b) {
      require(sizes[b] > 0, "SymPattern: block sizes must be positive");
      for (Eigen::Index j = 0; j < sizes[b]; ++j) {
        p.block_of_.push_back(static_cast<Eigen::Index>(b));
        for (Eigen::Index i = 0; i <= j; ++i) p.entries_.emplace_back(off + i, off + j);
      }
      off += sizes[b];
    }
    p.dim_ = off;
    return p;
  }

  Kind kind_ = Kind::Diagonal;
  Eigen::Index dim_ = 0;
  std::vector<Eigen::Index> blocks_;
  std::vector<Eigen::Index> block_of_;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> entries_;
};

/// F(x, y) = f0 + sign * U X(x) U^T + sum_l y_l t[l].
struct Lmi
{
  Mat f0;
  double sign = 1.0;
  Mat u;               ///< d x N; an empty matrix means X does not enter
  std::vector<Mat> t;  ///< one coefficient per scalar variable (empty matrix = 0)

  Eigen::Index size() const { return f0.rows(); }
};

struct SdpProblem
{
  SymPattern pattern;
  Eigen::Index n_scalars = 0;
  std::vector<Lmi> lmis;
  Vec c_x;  ///< empty means zero
  Vec c_y;
};

struct SdpOptions
{
  double gap_tol         = 1e-9;  ///< relative duality-gap bound at exit
  int max_newton         = 4000;  ///< total Newton steps across all centering phases
  int max_center         = 150;   ///< Newton steps per centering before declaring a stall
  Eigen::Index var_cap   = 512;
  double barrier_growth  = 12.0;
};

struct SdpResult
{
  Vec x;
  Vec y;
  double objective = 0.0;
  double gap_bound = 0.0;       ///< objective is within gap_bound of the optimum
  double min_slack = 0.0;       ///< smallest eigenvalue over all F_j at the returned point
  int newton_steps = 0;
  bool hit_cap     = false;     ///< best iterate returned after exhausting max_newton
  bool stalled     = false;     ///< centering stopped at the rounding floor before gap_tol
};

namespace detail {

struct SdpEval
{
  std::vector<Eigen::LLT<Mat>> chol;
  bool feasible = false;
};

class BarrierSolver
{
public:
  BarrierSolver(const SdpProblem& prob, const SdpOptions& opt) : p_(prob), opt_(opt)
  {
    nx_ = p_.pattern.size();
    ny_ = p_.n_scalars;
    if (nx_ + ny_ > opt_.var_cap)
      fail(ErrorKind::InvalidArgument, "sdp_solve: " + std::to_string(nx_ + ny_) + " variables exceed the cap of " +
                                           std::to_string(opt_.var_cap));
    c_ = Vec::Zero(nx_ + ny_);
    if (p_.c_x.size()) c_.head(nx_) = p_.c_x;
    if (p_.c_y.size()) c_.tail(ny_) = p_.c_y;
    total_dim_ = 0;
    for (const auto& l : p_.lmis) total_dim_ += static_cast<double>(l.size());
  }

  Mat value(const Lmi& l, const Vec& z) const
  {
    Mat f = l.f0;
    if (l.u.size()) {
      const Mat x = p_.pattern.assemble(z.head(nx_));
      f.noalias() += l.sign * (l.u * x * l.u.transpose());
    }
    for (Eigen::Index k = 0; k < ny_; ++k)
      if (static_cast<std::size_t>(k) < l.t.size() && l.t[static_cast<std::size_t>(k)].size())
        f += z(nx_ + k) * l.t[static_cast<std::size_t>(k)];
    return f;
  }

  /// Barrier value, or +inf when some F_j is not positive definite.
  double barrier(const Vec& z, double tau, std::vector<Mat>* f_out = nullptr,
                 std::vector<Eigen::LLT<Mat>>* chol_out = nullptr) const
  {
    double phi = tau * c_.dot(z);
    for (const auto& l : p_.lmis) {
      Mat f = value(l, z);
      Eigen::LLT<Mat> llt(f);
      if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
      const Vec d = Mat(llt.matrixL()).diagonal();
      if ((d.array() <= 0.0).any()) return std::numeric_limits<double>::infinity();
      phi -= 2.0 * d.array().log().sum();
      if (f_out) f_out->push_back(std::move(f));
      if (chol_out) chol_out->push_back(std::move(llt));
    }
    return phi;
  }

  double min_slack(const Vec& z) const
  {
    double s = std::numeric_limits<double>::infinity();
    for (const auto& l : p_.lmis) s = std::min(s, min_eig(SymMatrix(Mat(0.5 * (value(l, z) + value(l, z).transpose())))));
    return s;
  }

  /// Gradient and Hessian of the barrier at z.
  void derivatives(const Vec& z, double tau, Vec& g, Mat& hess) const
  {
    const auto nz = nx_ + ny_;
    g = tau * c_;
    hess.setZero(nz, nz);
    const auto& ent = p_.pattern.entries();
    for (const auto& l : p_.lmis) {
      Eigen::LLT<Mat> llt(value(l, z));
      const Mat finv = llt.solve(Mat::Identity(l.size(), l.size()));
      Mat gmat;
      if (l.u.size()) {
        gmat = l.u.transpose() * finv * l.u;
        for (Eigen::Index k = 0; k < nx_; ++k) {
          const auto [a, b] = ent[static_cast<std::size_t>(k)];
          g(k) -= l.sign * (a == b ? gmat(a, a) : 2.0 * gmat(a, b));
        }
        const double s2 = l.sign * l.sign;
        for (Eigen::Index k = 0; k < nx_; ++k) {
          const auto [a, b] = ent[static_cast<std::size_t>(k)];
          for (Eigen::Index kk = k; kk < nx_; ++kk) {
            const auto [c, d] = ent[static_cast<std::size_t>(kk)];
            double v;
            if (a == b && c == d) {
              v = gmat(a, c) * gmat(c, a);
            } else if (a == b) {
              v = 2.0 * gmat(a, c) * gmat(d, a);
            } else if (c == d) {
              v = 2.0 * gmat(b, c) * gmat(c, a);
            } else {
              v = 2.0 * (gmat(b, c) * gmat(d, a) + gmat(b, d) * gmat(c, a));
            }
            hess(k, kk) += s2 * v;
          }
        }
      }
      for (Eigen::Index j = 0; j < ny_; ++j) {
        if (static_cast<std::size_t>(j) >= l.t.size() || l.t[static_cast<std::size_t>(j)].size() == 0) continue;
        const Mat& tj = l.t[static_cast<std::size_t>(j)];
        const Mat ft  = finv * tj;
        g(nx_ + j) -= ft.trace();
        if (l.u.size()) {
          const Mat y = l.u.transpose() * ft * finv * l.u;
          for (Eigen::Index k = 0; k < nx_; ++k) {
            const auto [a, b] = ent[static_cast<std::size_t>(k)];
            hess(k, nx_ + j) += l.sign * (a == b ? y(a, a) : y(a, b) + y(b, a));
          }
        }
        for (Eigen::Index jj = j; jj < ny_; ++jj) {
          if (static_cast<std::size_t>(jj) >= l.t.size() || l.t[static_cast<std::size_t>(jj)].size() == 0) continue;
          hess(nx_ + j, nx_ + jj) += (ft * finv * l.t[static_cast<std::size_t>(jj)]).trace();
        }
      }
    }
    hess = hess.selfadjointView<Eigen::Upper>();
  }

  enum class Centering { Done, Cap, Stall };

  /// Damped Newton centering at fixed tau.
  Centering center(Vec& z, double tau, int& steps, const std::function<bool(const Vec&)>& early_exit = {}) const
  {
    for (int local = 0;; ++local) {
      if (early_exit && early_exit(z)) return Centering::Done;
      if (steps >= opt_.max_newton) return Centering::Cap;
      if (local >= opt_.max_center) return Centering::Stall;
      Vec g;
      Mat hess;
      derivatives(z, tau, g, hess);
      Eigen::LDLT<Mat> ldlt(hess);
      Vec dz = -ldlt.solve(g);
      if (ldlt.info() != Eigen::Success || !dz.allFinite()) {
        const double reg = 1e-12 * std::max(hess.diagonal().cwiseAbs().maxCoeff(), 1.0);
        dz = -(hess + reg * Mat::Identity(hess.rows(), hess.cols())).ldlt().solve(g);
      }
      const double dec = -g.dot(dz);
      ++steps;
      if (!(dec > 1e-13)) return Centering::Done;
      const double phi0 = barrier(z, tau);
      double alpha      = 1.0;
      bool moved        = false;
      for (int ls = 0; ls < 80; ++ls) {
        const Vec zn    = z + alpha * dz;
        const double ph = barrier(zn, tau);
        if (ph <= phi0 - 0.25 * alpha * dec) {
          z     = zn;
          moved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!moved) return Centering::Done;
      if (dec < 1e-10) return Centering::Done;
    }
  }

  SdpResult solve(Vec z) const
  {
    SdpResult res;
    if (!std::isfinite(barrier(z, 0.0)))
      fail(ErrorKind::InvalidArgument, "sdp_solve: starting point is not strictly feasible");
    double tau = 1.0;
    const double cz = std::abs(c_.dot(z));
    if (cz > 0.0) tau = std::max(1.0, total_dim_ / cz) * 1e-2;
    int steps = 0;
    Centering st = Centering::Done;
    double gap   = total_dim_ / tau;
    for (;;) {
      // a stalled centering keeps the previous gap bound; its steps only lower the objective
      st = center(z, tau, steps);
      if (st == Centering::Stall) break;
      gap = total_dim_ / tau;
      if (st == Centering::Cap || gap <= opt_.gap_tol * std::max(1.0, std::abs(c_.dot(z)))) break;
      tau *= opt_.barrier_growth;
    }
    res.x            = z.head(nx_);
    res.y            = z.tail(ny_);
    res.objective    = c_.dot(z);
    res.gap_bound    = gap;
    res.newton_steps = steps;
    res.hit_cap      = st == Centering::Cap;
    res.stalled      = st == Centering::Stall;
    res.min_slack    = min_slack(z);
    return res;
  }

  Eigen::Index nx() const { return nx_; }
  Eigen::Index ny() const { return ny_; }

private:
  const SdpProblem& p_;
  SdpOptions opt_;
  Eigen::Index nx_ = 0, ny_ = 0;
  Vec c_;
  double total_dim_ = 0.0;
};

}  // namespace detail

/**
 * @brief Finds a strictly feasible point or proves (numerically) that none exists.
 *
 * Maximizes s subject to F_j(x, y) - s I >= 0 inside a large box; throws
 * ErrorKind::Infeasible when the optimal s is not positive.
 */
inline std::pair<Vec, Vec> sdp_phase_one(const SdpProblem& prob, const SdpOptions& opt = {})
{
  const auto nx = prob.pattern.size();
  const auto ny = prob.n_scalars;
  const auto big_n = prob.pattern.dim();

  double scale = 1.0;
  for (const auto& l : prob.lmis) {
    scale = std::max(scale, max_abs(l.f0));
    for (const auto& t : l.t) scale = std::max(scale, max_abs(t));
  }
  const double radius = 1e6 * scale;

  SdpProblem ph;
  ph.pattern   = prob.pattern;
  ph.n_scalars = ny + 1;
  for (const auto& l : prob.lmis) {
    Lmi a = l;
    a.t.resize(static_cast<std::size_t>(ny + 1));
    a.t[static_cast<std::size_t>(ny)] = -Mat::Identity(l.size(), l.size());
    ph.lmis.push_back(std::move(a));
  }
  // keep the search bounded: -R I <= X <= R I, |y_l| <= R, s <= scale
  for (double sgn : {1.0, -1.0}) {
    ph.lmis.push_back({radius * Mat::Identity(big_n, big_n), -sgn, Mat::Identity(big_n, big_n), {}});
    for (Eigen::Index l = 0; l < ny; ++l) {
      Lmi b{Mat::Constant(1, 1, radius), 1.0, Mat(), std::vector<Mat>(static_cast<std::size_t>(ny + 1))};
      b.t[static_cast<std::size_t>(l)] = Mat::Constant(1, 1, -sgn);
      ph.lmis.push_back(std::move(b));
    }
  }
  {
    Lmi b{Mat::Constant(1, 1, scale), 1.0, Mat(), std::vector<Mat>(static_cast<std::size_t>(ny + 1))};
    b.t[static_cast<std::size_t>(ny)] = Mat::Constant(1, 1, -1.0);
    ph.lmis.push_back(std::move(b));
  }
  ph.c_y = Vec::Zero(ny + 1);
  ph.c_y(ny) = -1.0;

  SdpOptions o = opt;
  o.var_cap    = opt.var_cap + 1;
  detail::BarrierSolver solver(ph, o);
  Vec z = Vec::Zero(nx + ny + 1);
  double s0 = std::numeric_limits<double>::infinity();
  for (const auto& l : prob.lmis) s0 = std::min(s0, min_eig(SymMatrix(Mat(0.5 * (l.f0 + l.f0.transpose())))));
  z(nx + ny) = s0 - 1.0;

  auto feasible = [&](const Vec& v) { return v(nx + ny) > 1e-9 * scale; };
  double tau = 1.0;
  int steps  = 0;
  for (int outer = 0; outer < 200; ++outer) {
    const auto st = solver.center(z, tau, steps, feasible);
    if (feasible(z)) return {z.head(nx), z.segment(nx, ny)};
    const double gap = (static_cast<double>(ph.lmis.size()) + 4.0 * big_n) / tau;
    if (st == detail::BarrierSolver::Centering::Cap || gap <= 1e-10 * scale) break;
    tau *= opt.barrier_growth;
  }
  fail(ErrorKind::Infeasible, "sdp_solve: no strictly feasible point (best margin " + std::to_string(z(nx + ny)) + ")");
}

/**
 * @brief Solves an LMI problem; start must be strictly feasible when given.
 *
 * Returns the best iterate with hit_cap set when the Newton budget runs out.
 */
inline SdpResult sdp_solve(const SdpProblem& prob, const SdpOptions& opt = {},
                           std::optional<std::pair<Vec, Vec>> start = std::nullopt)
{
  for (const auto& l : prob.lmis) {
    require(l.f0.rows() == l.f0.cols(), "sdp_solve: f0 must be square");
    require(l.u.size() == 0 || (l.u.rows() == l.size() && l.u.cols() == prob.pattern.dim()),
            "sdp_solve: U has the wrong shape");
  }
  detail::BarrierSolver solver(prob, opt);
  if (!start) start = sdp_phase_one(prob, opt);
  Vec z(solver.nx() + solver.ny());
  z << start->first, start->second;
  return solver.solve(z);
}

}  // namespace gfdgm

#endif  // GFDGM_SDP_HPP
