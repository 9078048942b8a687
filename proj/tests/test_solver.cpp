#include <gtest/gtest.h>

#include "gfdgm/gfdgm.hpp"
#include "support/generators.hpp"

using namespace gfdgm;
using namespace gfdgm::testing;

namespace {

CurvatureMatrix hessian_curvature(const Mat& h)
{
  CurvatureMatrix cm;
  cm.q_factor = sym_sqrt(SymMatrix(h)).mat();
  cm.C        = Mat::Identity(h.rows(), h.rows());
  cm.value    = SymMatrix(h);
  return cm;
}

SmoothOracle quadratic(const Mat& h, const Vec& zeta)
{
  return {[h, zeta](const Vec& x) { return 0.5 * x.dot(h * x) + zeta.dot(x); },
          [h, zeta](const Vec& x) { return Vec(h * x + zeta); }};
}

ComposedProblem one_dim_box_g(double h, double zeta, double lo, double hi)
{
  ComposedProblem p;
  p.cost.H    = SymMatrix(Mat::Constant(1, 1, h));
  p.cost.zeta = Vec::Constant(1, zeta);
  p.g.B       = Mat::Identity(1, 1);
  p.g.kind    = GKind::Box;
  p.g.d_lo    = Vec::Constant(1, lo);
  p.g.d_hi    = Vec::Constant(1, hi);
  return p;
}

StopRule tight()
{
  StopRule s;
  s.max_iter = 200000;
  s.eq_tol = s.ineq_tol = 1e-11;
  s.fp_tol = 1e-13;
  return s;
}

}  // namespace

TEST(Momentum, GrowsAtLeastLinearly)
{
  MomentumState m;
  for (int k = 1; k <= 1000; ++k) {
    EXPECT_GE(m.t, (k + 1) / 2.0 - 1e-12);
    const double t = m.t;
    const double beta = m.advance();
    EXPECT_NEAR(m.t * m.t - m.t, t * t, 1e-9 * t * t);
    EXPECT_GE(beta, 0.0);
    EXPECT_LT(beta, 1.0);
  }
}

TEST(Fgm, ExactMetricIsOneStep)
{
  Rng rng(31);
  const Mat h    = random_pd(rng, 4, 100.0);
  const Vec zeta = random_vec(rng, 4);
  const auto l   = select_metric(hessian_curvature(h), SymPattern::full(4));
  FgmStop stop;
  stop.max_iter = 1;
  const auto r  = fgm_run(quadratic(h, zeta), ProxFunction::zero(), l, Vec::Zero(4), stop);
  EXPECT_LT((r.x + h.inverse() * zeta).norm(), 1e-10);
}

TEST(Fgm, ProjectedMinimizer)
{
  const Mat h   = Mat::Identity(1, 1);
  const auto l  = select_metric(hessian_curvature(h), SymPattern::full(1));
  FgmStop stop;
  stop.fp_tol = 1e-14;
  const auto r  = fgm_run(quadratic(h, Vec::Zero(1)), ProxFunction::box(Vec::Constant(1, 1.0), Vec::Constant(1, 2.0)), l,
                          Vec::Constant(1, 5.0), stop);
  EXPECT_EQ(r.status, SolveStatus::Converged);
  EXPECT_DOUBLE_EQ(r.x(0), 1.0);
}

TEST(Fgm, RateBound)
{
  Rng rng(32);
  for (int inst = 0; inst < 10; ++inst) {
    const Eigen::Index n = uniform_int(rng, 2, 6);
    const Mat h    = random_pd(rng, n, 1e3);
    const Vec zeta = random_vec(rng, n, -5.0, 5.0);
    const Vec lo = Vec::Constant(n, -1.0), hi = Vec::Constant(n, 1.0);
    const auto psi  = ProxFunction::box(lo, hi);
    const auto ell  = quadratic(h, zeta);
    const auto cm   = hessian_curvature(h);
    for (const auto& l : {scalar_metric(cm), select_metric(cm, SymPattern::diagonal(n))}) {
      FgmStop ref_stop;
      ref_stop.max_iter = 100000;
      ref_stop.fp_tol   = 1e-15;
      const Vec x_star  = fgm_run(ell, psi, l, Vec::Zero(n), ref_stop).x;
      const double f_star = ell.value(x_star);
      FgmStop stop;
      stop.max_iter = 500;
      const auto r  = fgm_run(ell, psi, l, Vec::Zero(n), stop);
      const double r0 = l.norm_sq(x_star);
      for (std::size_t k = 0; k < r.objective.size(); ++k) {
        const double kk = static_cast<double>(k + 1);
        EXPECT_LE(r.objective[k] - f_star, 2.0 * r0 / ((kk + 1) * (kk + 1)) + 1e-10 * (1.0 + std::abs(f_star)));
      }
    }
  }
}

TEST(Fdgm, ExactMetricSolvesEqualityQpInOneStep)
{
  Rng rng(33);
  Sizes s;
  s.n = 6;
  s.m = 3;
  s.p = 0;
  const auto p  = random_problem(rng, Family::Smooth, s);
  const auto cm = curvature_general(p);
  StopRule stop;
  stop.max_iter = 1;
  const DualOracle o(p);
  const auto r  = fdgm_run(o, select_metric(cm, SymPattern::full(3)), stop);
  const Vec x   = o.inner(r.state.nu());
  EXPECT_LT((p.eq->A * x - p.eq->b).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Fdgm, AgreesWithReferenceAcrossFamilies)
{
  Rng rng(34);
  for (int k = 0; k < 20; ++k) {
    const auto fam = static_cast<Family>(k % 5);
    const auto p   = random_problem(rng, fam);
    const auto cm  = applicable_curvature(p);
    const auto r   = fdgm_run(p, select_metric(cm, dual_pattern(p.m(), p.p(), false, true)), tight());
    EXPECT_TRUE(r.converged()) << to_string(fam);
    EXPECT_LT(detail::relative_error(r.y, reference_solution(p).x), 1e-6) << to_string(fam);
  }
}

TEST(Fdgm, OracleRuleStopsAtRelativeError)
{
  Rng rng(35);
  const auto p   = random_problem(rng, Family::Box);
  const auto ref = reference_solution(p).x;
  StopRule s;
  s.y_ref   = ref;
  s.rel_tol = 0.005;
  const auto r = fdgm_run(p, scalar_metric(applicable_curvature(p)), s);
  ASSERT_TRUE(r.converged());
  EXPECT_LE(r.rel_err, 0.005);
  EXPECT_LE(detail::relative_error(r.y, ref), 0.005);
}

TEST(Fdgm, CapReachedIsReported)
{
  Rng rng(36);
  const auto p = random_problem(rng, Family::Box);
  StopRule s   = tight();
  s.max_iter   = 3;
  s.keep_trace = true;
  const auto r = fdgm_run(p, scalar_metric(applicable_curvature(p)), s);
  EXPECT_EQ(r.status, SolveStatus::CapReached);
  EXPECT_EQ(r.iterations, 3);
  EXPECT_EQ(r.trace.size(), 3u);
  EXPECT_EQ(r.log.size(), 3u);
}

TEST(Fdgm, RefusesUncertifiedMetric)
{
  Rng rng(37);
  const auto p  = random_problem(rng, Family::Smooth);
  const auto cm = applicable_curvature(p);
  const auto good = scalar_metric(cm);
  const auto bad  = make_metric(SymMatrix(Mat(0.5 * good.L.mat())), good.pattern, cm.value, classify_case(cm));
  EXPECT_GE(check_certificate(good.L, cm.value), -1e-12);
  EXPECT_THROW(check_certificate(bad.L, cm.value), Error);
  try {
    fdgm_run(p, bad);
    FAIL() << "expected a refusal";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::RefusedUncertifiedMetric);
  }
  FdgmOptions o;
  o.allow_uncertified = true;
  StopRule s;
  s.max_iter = 5;
  EXPECT_NO_THROW(fdgm_run(p, bad, s, o));
}

TEST(Fdgm, RateCertificateHolds)
{
  Rng rng(38);
  for (int k = 0; k < 8; ++k) {
    const auto p  = random_problem(rng, static_cast<Family>(k % 4));
    const auto cm = applicable_curvature(p);
    const DualOracle o(p);
    const auto sel = select_metric(cm, dual_pattern(p.m(), p.p(), false, true));
    const auto sca = scalar_metric(cm);
    const Vec nu_star = fdgm_run(o, sel, tight()).state.nu();
    for (const auto* l : {&sel, &sca}) {
      StopRule s;
      s.max_iter = 500;
      s.eq_tol = s.ineq_tol = s.fp_tol = -1.0;
      s.log_dual = true;
      const auto r  = fdgm_run(o, *l, s);
      const auto rc = certify_rate(r.log, *l, nu_star, Vec::Zero(p.dual_dim()), o.dual_objective(nu_star));
      EXPECT_TRUE(rc.pass()) << rc.violations.size() << " violations";
    }
  }
}

TEST(Fdgm, SelectedBeatsScalarOnSmallQp)
{
  ComposedProblem p;
  Mat h(3, 3);
  h << 50, 1, 0, 1, 2, 0.5, 0, 0.5, 0.2;
  p.cost.H    = SymMatrix(h);
  p.cost.zeta = Vec::LinSpaced(3, -4.0, 1.0);
  p.eq        = AffineEq{Mat::Ones(1, 3), Vec::Ones(1)};
  p.g.B       = Mat::Identity(3, 3);
  p.g.kind    = GKind::Box;
  p.g.d_lo    = Vec::Constant(3, -0.2);
  p.g.d_hi    = Vec::Constant(3, 0.6);
  const auto cm  = curvature_general(p);
  const auto sel = select_metric(cm, dual_pattern(1, 3, false, true));
  const auto sca = scalar_metric(cm);
  StopRule s;
  s.y_ref = reference_solution(p).x;
  const auto a = fdgm_run(p, sel, s);
  const auto b = fdgm_run(p, sca, s);
  ASSERT_TRUE(a.converged() && b.converged());
  EXPECT_LT(a.iterations, b.iterations);
  EXPECT_LT(sel.achieved_ratio, sca.achieved_ratio);
}

TEST(Fdgm, WarmStartFromSolutionStopsImmediately)
{
  Rng rng(39);
  const auto p  = random_problem(rng, Family::Equality);
  const auto l  = scalar_metric(applicable_curvature(p));
  const auto r1 = fdgm_run(p, l, tight());
  FdgmOptions o;
  o.nu0 = r1.state.nu();
  StopRule s;
  const auto r2 = fdgm_run(p, l, s, o);
  EXPECT_LE(r2.iterations, 2);
}

TEST(Admm, InactiveBoxConvergesLinearly)
{
  ComposedProblem p = one_dim_box_g(2.0, -1.0, -10.0, 10.0);
  AdmmStop s;
  s.abs_tol = 1e-8;
  const auto r = admm_run(p, 2.0, s);
  EXPECT_TRUE(r.converged());
  EXPECT_LE(r.iterations, 60);
  EXPECT_NEAR(r.y(0), 0.5, 1e-8);
}

TEST(Admm, OneDimensionalBoxMatchesReference)
{
  const auto p = one_dim_box_g(1.0, -3.0, -1.0, 1.0);
  AdmmStop s;
  s.abs_tol = 1e-10;
  const auto r = admm_run(p, 1.0, s);
  EXPECT_TRUE(r.converged());
  EXPECT_NEAR(r.y(0), reference_solution(p).x(0), 1e-8);
  EXPECT_NEAR(r.y(0), 1.0, 1e-8);
}

TEST(Admm, EqualityFamilyMatchesReference)
{
  Rng rng(40);
  for (int k = 0; k < 10; ++k) {
    const auto p = random_problem(rng, k % 2 ? Family::Equality : Family::EqualitySingular);
    AdmmStop s;
    s.abs_tol  = 1e-10;
    s.max_iter = 500000;
    const auto r = admm_run(p, 1.0, s);
    EXPECT_TRUE(r.converged());
    EXPECT_LT(detail::relative_error(r.y, reference_solution(p).x), 1e-6);
  }
}

TEST(Admm, RejectsBoxH)
{
  Rng rng(41);
  EXPECT_THROW(admm_run(random_problem(rng, Family::Box), 1.0), Error);
}

TEST(Reference, UnconstrainedIsNewtonPoint)
{
  Rng rng(42);
  ComposedProblem p;
  const Mat h  = random_pd(rng, 5);
  p.cost.H     = SymMatrix(h);
  p.cost.zeta  = random_vec(rng, 5);
  p.g.B        = Mat(0, 5);
  const auto r = reference_solution(p);
  EXPECT_LT((r.x + h.inverse() * p.cost.zeta).norm(), 1e-10);
}

TEST(Reference, OneDimensionalBoxAtBound)
{
  const auto r = reference_solution(one_dim_box_g(1.0, -3.0, -1.0, 1.0));
  EXPECT_NEAR(r.x(0), 1.0, 1e-10);
  EXPECT_LE(r.kkt_residual, 1e-10);
}

TEST(Reference, SatisfiesKktOnRandomFamilies)
{
  Rng rng(43);
  for (int k = 0; k < 25; ++k) {
    const auto p = random_problem(rng, static_cast<Family>(k % 5));
    const auto r = reference_solution(p);
    EXPECT_LE(r.kkt_residual, 1e-10);
    if (p.eq) EXPECT_LT((p.eq->A * r.x - p.eq->b).cwiseAbs().maxCoeff(), 1e-9);
    if (p.g.kind == GKind::Box) {
      const Vec bx = p.g.B * r.x;
      EXPECT_LE((p.g.d_lo - bx).maxCoeff(), 1e-9);
      EXPECT_LE((bx - p.g.d_hi).maxCoeff(), 1e-9);
    }
  }
}
