#ifndef GFDGM_METRIC_HPP
#define GFDGM_METRIC_HPP

/**
 * @file
 * @brief Offline selection of a structured dual metric L >= C P C^T.
 *
 * With L = (D^T D)^{-1} the preconditioned curvature is D C P C^T D^T, and the
 * selection minimizes the ratio of its largest to smallest nonzero eigenvalue
 * over matrices sharing a fixed inverse-closed sparsity pattern:
 *
 *  - C1, C P C^T positive definite:   min t  s.t.  t W >= L >= W,
 *  - C2, Q C^T C Q^T positive definite: max t  s.t.  U M U^T <= I, U M U^T >= t I,
 *  - C3, otherwise:                   as C2 with the second LMI compressed by an
 *                                     orthonormal basis Phi of range(U),
 *
 * where W = C P C^T, U = Q C^T and M = L^{-1}. The programs are solved on a
 * Jacobi-scaled copy of W; diagonal scaling maps every supported pattern to
 * itself, so the result is transformed back without leaving the pattern.
 */

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gfdgm/curvature.hpp"
#include "gfdgm/numkern.hpp"
#include "gfdgm/sdp.hpp"

namespace gfdgm {

enum class MetricCase { C1, C2, C3 };

inline const char* to_string(MetricCase c)
{
  switch (c) {
    case MetricCase::C1: return "C1";
    case MetricCase::C2: return "C2";
    case MetricCase::C3: return "C3";
  }
  return "unknown";
}

struct CaseInfo
{
  MetricCase kase = MetricCase::C1;
  Eigen::Index rank = 0;  ///< rank of C P C^T
};

/// Structured positive definite metric with a cached factorization of L.
struct Metric
{
  SymMatrix L;
  SymPattern pattern = SymPattern::diagonal(0);
  CholFactor inv_apply;
  double achieved_ratio     = 1.0;
  double certificate_margin = 0.0;  ///< min eig(L - C P C^T)
  MetricCase kase           = MetricCase::C1;
  bool warning              = false;
  std::string note;

  Eigen::Index dim() const { return L.dim(); }
  Vec apply_inverse(const Vec& x) const { return inv_apply.solve(x); }
  double norm_sq(const Vec& x) const { return x.dot(L.mat() * x); }
  bool is_diagonal() const { return L.is_diagonal(); }
};

struct MetricOptions
{
  SdpOptions sdp;
  double rank_tol  = 1e-9;
  /// Bounds (kappa w)^{-1} I <= M <= (kappa / w) I on the scaled M in C2/C3, with w the
  /// largest eigenvalue of the scaled curvature. With dependent dual rows the ratio alone
  /// pushes some entries of M toward 0, which freezes those multipliers.
  double kappa     = 1e2;
  double inflation = 1e-9;  ///< L is scaled by (1 + inflation) after the solve
  std::optional<MetricCase> force_case;  ///< C3 may be forced on a C2 instance
  std::optional<Mat> phi;                ///< basis of range(U) to use in C3
};

namespace detail {

struct Scaled
{
  Vec s;        ///< Jacobi scaling, W~ = S W S
  SymMatrix w;  ///< scaled curvature
  Mat u;        ///< Q C^T S
};

inline Scaled jacobi_scale(const CurvatureMatrix& cm)
{
  const Mat& w  = cm.value.mat();
  const auto n  = w.rows();
  const double top = n ? std::max(w.diagonal().maxCoeff(), 0.0) : 0.0;
  Scaled sc;
  sc.s.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = w(i, i);
    sc.s(i) = d > 1e-12 * top && d > 0.0 ? 1.0 / std::sqrt(d) : (top > 0.0 ? 1.0 / std::sqrt(top) : 1.0);
  }
  sc.w = SymMatrix(Mat(sc.s.asDiagonal() * w * sc.s.asDiagonal()));
  sc.u = cm.q_factor * cm.C.transpose() * sc.s.asDiagonal();
  return sc;
}

/// Nonzero eigenvalues (descending) of D W D^T where L = (D^T D)^{-1}.
inline Vec preconditioned_spectrum(const SymMatrix& l, const SymMatrix& w)
{
  const CholFactor f = chol_psd(l);
  const auto lo      = f.lower.triangularView<Eigen::Lower>();
  Mat x              = lo.solve(w.mat());
  x                  = lo.solve(Mat(x.transpose()));
  return sym_eig(SymMatrix(Mat(0.5 * (x + x.transpose())))).values.reverse();
}

}  // namespace detail

/// lambda_1 / lambda_r of D W D^T, r = rank(W).
inline double eigenvalue_ratio(const SymMatrix& l, const SymMatrix& w, Eigen::Index rank)
{
  if (rank == 0) return 1.0;
  const Vec ev = detail::preconditioned_spectrum(l, w);
  return ev(0) / ev(rank - 1);
}

inline CaseInfo classify_case(const CurvatureMatrix& cm, double tol = 1e-9)
{
  const auto sc = detail::jacobi_scale(cm);
  CaseInfo info;
  info.rank = rank_of(sc.u, tol);
  if (info.rank == cm.dim())
    info.kase = MetricCase::C1;
  else if (info.rank == cm.q())
    info.kase = MetricCase::C2;
  else
    info.kase = MetricCase::C3;
  return info;
}

/// Builds a Metric from a given L and fills ratio and certificate against W.
inline Metric make_metric(const SymMatrix& l, const SymPattern& pattern, const SymMatrix& w, const CaseInfo& info)
{
  require(l.dim() == w.dim() && pattern.dim() == l.dim(), "make_metric: dimension mismatch");
  const double scale = std::max(max_abs(l.mat()), 1e-300);
  if (!pattern.respects(l.mat(), 1e-14 * scale))
    fail(ErrorKind::InvalidArgument, "make_metric: L violates the " + pattern.describe() + " pattern");
  Metric m;
  m.L       = l;
  m.pattern = pattern;
  m.kase    = info.kase;
  m.inv_apply = chol_psd(l, ShiftPolicy{0.0});
  m.achieved_ratio     = eigenvalue_ratio(l, w, info.rank);
  m.certificate_margin = w.dim() ? min_eig(SymMatrix(Mat(l.mat() - w.mat()))) : 0.0;
  const double wn      = w.dim() ? sym_norm2(w) : 0.0;
  if (m.certificate_margin < -1e-8 * wn) {
    m.warning = true;
    m.note    = "L does not dominate the curvature";
  }
  return m;
}

/// L = ||W||_2 I.
inline Metric scalar_metric(const CurvatureMatrix& cm)
{
  const auto n     = cm.dim();
  const double nrm = n ? sym_norm2(cm.value) : 0.0;
  const SymMatrix l(Mat((nrm > 0.0 ? nrm : 1.0) * Mat::Identity(n, n)));
  CaseInfo info = classify_case(cm);
  Metric m      = make_metric(l, SymPattern::diagonal(n), cm.value, info);
  m.certificate_margin = std::max(m.certificate_margin, 0.0);
  m.warning            = false;
  m.note.clear();
  return m;
}

/**
 * @brief Pattern-constrained metric minimizing the preconditioned eigenvalue ratio.
 *
 * Full patterns in C1 and curvature that already fits the pattern are handled
 * in closed form (L = W). Otherwise the applicable LMI program is solved and
 * the ratio and certificate are recomputed from the returned L.
 */
inline Metric select_metric(const CurvatureMatrix& cm, const SymPattern& pattern, const MetricOptions& opt = {})
{
  const auto n = cm.dim();
  require(pattern.dim() == n, "select_metric: pattern dimension " + std::to_string(pattern.dim()) +
                                  " does not match curvature dimension " + std::to_string(n));
  CaseInfo info = classify_case(cm, opt.rank_tol);
  const double grow = 1.0 + opt.inflation;

  if (n == 0) return make_metric(cm.value, pattern, cm.value, info);
  if (info.rank == 0) {
    Metric m = make_metric(SymMatrix::identity(n), pattern, cm.value, info);
    m.note   = "zero curvature";
    return m;
  }
  if (info.kase == MetricCase::C1 && !opt.force_case &&
      pattern.respects(cm.value.mat(), 1e-15 * max_abs(cm.value.mat()))) {
    const Mat l = pattern.assemble(pattern.extract(cm.value.mat()));
    return make_metric(SymMatrix(l), pattern, cm.value, info);
  }

  const auto sc = detail::jacobi_scale(cm);
  MetricCase kase = info.kase;
  if (opt.force_case) {
    if (*opt.force_case == MetricCase::C1 && info.kase != MetricCase::C1)
      fail(ErrorKind::InvalidArgument, "select_metric: C1 requires a positive definite curvature");
    if (*opt.force_case == MetricCase::C2 && info.kase == MetricCase::C3)
      fail(ErrorKind::InvalidArgument, "select_metric: C2 requires Q C^T C Q^T positive definite");
    kase = *opt.force_case;
  }

  const auto& pat = pattern;
  SdpProblem prob{pat, 1, {}, {}, {}};
  std::pair<Vec, Vec> start;
  Mat l_scaled;

  if (kase == MetricCase::C1) {
    const auto e        = sym_eig(sc.w);
    const double alpha  = 1.5 * e.max();
    const double t0     = 1.5 * alpha / e.min();
    const Mat eye       = Mat::Identity(n, n);
    prob.lmis.push_back({Mat::Zero(n, n), -1.0, eye, {sc.w.mat()}});
    prob.lmis.push_back({Mat(-sc.w.mat()), 1.0, eye, {Mat()}});
    prob.c_y   = Vec::Constant(1, 1.0);
    start      = {pat.extract(alpha * eye), Vec::Constant(1, t0)};
    const auto res = sdp_solve(prob, opt.sdp, start);
    l_scaled       = pat.assemble(res.x);
    Metric m = make_metric(SymMatrix(Mat(grow * sc.s.cwiseInverse().asDiagonal() * l_scaled *
                                         sc.s.cwiseInverse().asDiagonal())),
                           pattern, cm.value, info);
    if (res.hit_cap) {
      m.warning = true;
      m.note    = "SDP iteration cap reached; best iterate returned";
    }
    return m;
  }

  const Mat& u    = sc.u;
  const auto q    = u.rows();
  Mat phi;
  if (kase == MetricCase::C2)
    phi = Mat::Identity(q, q);
  else
    phi = opt.phi ? *opt.phi : range_basis(u, opt.rank_tol).basis;
  require(phi.rows() == q, "select_metric: Phi must have " + std::to_string(q) + " rows");
  const auto r     = phi.cols();
  const Mat pu     = phi.transpose() * u;
  const Mat eye    = Mat::Identity(n, n);
  const auto e     = sym_eig(sc.w);
  const Vec ev     = e.values.reverse();
  const double a0  = 0.5 / ev(0);
  const double t0  = 0.5 * a0 * ev(info.rank - 1);

  prob.lmis.push_back({Mat::Identity(q, q), -1.0, u, {Mat()}});
  prob.lmis.push_back({Mat::Zero(r, r), 1.0, pu, {Mat(-Mat::Identity(r, r))}});
  prob.lmis.push_back({Mat(-eye / (opt.kappa * ev(0))), 1.0, eye, {Mat()}});
  prob.lmis.push_back({Mat(opt.kappa / ev(0) * eye), -1.0, eye, {Mat()}});
  prob.c_y = Vec::Constant(1, -1.0);
  start    = {pat.extract(a0 * eye), Vec::Constant(1, t0)};
  const auto res = sdp_solve(prob, opt.sdp, start);

  // M = S M~ S, so L = S^{-1} M~^{-1} S^{-1}
  const Mat m_scaled = pat.assemble(res.x);
  Mat l_inv          = Eigen::LLT<Mat>(m_scaled).solve(eye);
  l_inv              = pat.assemble(pat.extract(Mat(0.5 * (l_inv + l_inv.transpose()))));
  const Mat si       = sc.s.cwiseInverse().asDiagonal();
  Metric m           = make_metric(SymMatrix(Mat(grow * si * l_inv * si)), pattern, cm.value, info);
  if (kase != info.kase) m.kase = kase;
  if (res.hit_cap) {
    m.warning = true;
    m.note    = "SDP iteration cap reached; best iterate returned";
  }
  return m;
}

/// Pattern for nu = (lambda, mu): a full block for lambda, then mu either full or diagonal.
inline SymPattern dual_pattern(Eigen::Index m, Eigen::Index p, bool diagonal_lambda, bool diagonal_mu)
{
  std::vector<Eigen::Index> blocks;
  if (diagonal_lambda)
    blocks.insert(blocks.end(), static_cast<std::size_t>(m), 1);
  else if (m > 0)
    blocks.push_back(m);
  if (diagonal_mu)
    blocks.insert(blocks.end(), static_cast<std::size_t>(p), 1);
  else if (p > 0)
    blocks.push_back(p);
  if (blocks.size() == 1 && blocks[0] == m + p && m + p > 1) return SymPattern::full(m + p);
  if (std::all_of(blocks.begin(), blocks.end(), [](Eigen::Index b) { return b == 1; }))
    return SymPattern::diagonal(m + p);
  return SymPattern::block_diagonal(blocks);
}

/// Metric file contents.
inline nlohmann::json metric_to_json(const Metric& m, const std::string& source = "")
{
  nlohmann::json j;
  j["pattern"] = m.pattern.describe();
  j["dim"]     = m.dim();
  nlohmann::json l = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.dim(); ++i)
    for (Eigen::Index k = 0; k < m.dim(); ++k) l.push_back(m.L(i, k));
  j["L"]                 = l;
  j["achievedRatio"]     = m.achieved_ratio;
  j["certificateMargin"] = m.certificate_margin;
  j["case"]              = to_string(m.kase);
  j["warning"]           = m.warning;
  if (!source.empty()) j["curvatureSource"] = source;
  return j;
}

inline SymPattern parse_pattern(const std::string& s, Eigen::Index n)
{
  if (s == "diagonal") return SymPattern::diagonal(n);
  if (s == "full") return SymPattern::full(n);
  if (s.rfind("block:", 0) == 0) {
    std::vector<Eigen::Index> sizes;
    std::size_t pos = 6;
    while (pos < s.size()) {
      const auto comma = s.find(',', pos);
      const auto tok   = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      try {
        sizes.push_back(static_cast<Eigen::Index>(std::stoll(tok)));
      } catch (const std::exception&) {
        fail(ErrorKind::Parse, "bad block size \"" + tok + "\" in pattern " + s);
      }
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    Eigen::Index total = 0;
    for (auto b : sizes) total += b;
    if (total != n) fail(ErrorKind::Validation, "pattern " + s + " does not cover dimension " + std::to_string(n));
    return SymPattern::block_diagonal(sizes);
  }
  fail(ErrorKind::Parse, "unknown pattern \"" + s + "\" (expected diagonal, full or block:n1,n2,...)");
}

/// Reads L back; ratio and certificate are recomputed against w.
inline Metric metric_from_json(const nlohmann::json& j, const SymMatrix& w, const CaseInfo& info)
{
  if (!j.is_object() || !j.contains("L") || !j.contains("dim") || !j.contains("pattern"))
    fail(ErrorKind::Parse, "metric file needs fields pattern, dim and L");
  const auto n = j.at("dim").get<Eigen::Index>();
  const auto& arr = j.at("L");
  if (!arr.is_array() || static_cast<Eigen::Index>(arr.size()) != n * n)
    fail(ErrorKind::Validation, "metric file: L must hold dim*dim entries");
  if (n != w.dim())
    fail(ErrorKind::Validation, "metric dimension " + std::to_string(n) + " does not match the problem (" +
                                    std::to_string(w.dim()) + ")");
  Mat l(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < n; ++k) l(i, k) = arr[static_cast<std::size_t>(i * n + k)].get<double>();
  return make_metric(SymMatrix(l), parse_pattern(j.at("pattern").get<std::string>(), n), w, info);
}

}  // namespace gfdgm

#endif  // GFDGM_METRIC_HPP
