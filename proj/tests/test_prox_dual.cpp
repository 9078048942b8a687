#include <gtest/gtest.h>

#include "gfdgm/gfdgm.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace gfdgm;
using namespace gfdgm::testing;

namespace {

Vec v2(double a, double b)
{
  Vec v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST(Prox, ZeroIsIdentity)
{
  Rng rng(21);
  const Vec x = random_vec(rng, 4);
  EXPECT_EQ(prox(ProxFunction::zero(), SymMatrix(random_pd(rng, 4)), x), x);
}

TEST(Prox, BoxDiagonalClips)
{
  const auto box = ProxFunction::box(Vec::Constant(2, -1.0), Vec::Constant(2, 1.0));
  const Vec y    = prox(box, SymMatrix::diagonal(v2(3.0, 0.5)), v2(2.0, -3.0));
  EXPECT_EQ(y, v2(1.0, -1.0));
}

TEST(Prox, BoxFullMetricMatchesEnumeration)
{
  Mat l(2, 2);
  l << 2, 1, 1, 2;
  const Vec lo = Vec::Constant(2, -1.0), hi = Vec::Constant(2, 1.0);
  const Vec y  = prox(ProxFunction::box(lo, hi), SymMatrix(l), v2(2.0, 2.0));
  EXPECT_LT((y - box_qp_enumeration(l, v2(2.0, 2.0), lo, hi)).norm(), 1e-12);

  Rng rng(22);
  for (int k = 0; k < 100; ++k) {
    const Eigen::Index n = uniform_int(rng, 1, 6);
    const Mat lr  = random_pd(rng, n, 100.0);
    const Vec lo2 = random_vec(rng, n, -1.0, 0.0), hi2 = random_vec(rng, n, 0.0, 1.0);
    const Vec x   = random_vec(rng, n, -3.0, 3.0);
    EXPECT_LT((prox(ProxFunction::box(lo2, hi2), SymMatrix(lr), x) - box_qp_enumeration(lr, x, lo2, hi2)).norm(),
              1e-10);
  }
}

TEST(Prox, NonnegOrthantDiagonal)
{
  EXPECT_EQ(prox(ProxFunction::nonneg(), SymMatrix::identity(2), v2(-1.0, 2.0)), v2(0.0, 2.0));
}

TEST(Prox, UnsupportedPairing)
{
  try {
    prox(ProxFunction::box(Vec::Zero(13), Vec::Ones(13)), SymMatrix(Mat(Mat::Constant(13, 13, 0.1) + Mat::Identity(13, 13))),
         Vec::Zero(13));
    FAIL() << "expected UnsupportedProx";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UnsupportedProx);
  }
}

TEST(ConjugateProx, ZeroFunctionGivesOrigin)
{
  Rng rng(23);
  const Vec y = conjugate_prox_via_moreau(ProxFunction::zero(), SymMatrix(random_pd(rng, 3)), random_vec(rng, 3));
  EXPECT_LT(y.norm(), 1e-12);
}

TEST(ConjugateProx, MatchesSupportProxClosedForm)
{
  Rng rng(24);
  for (int k = 0; k < 100; ++k) {
    const Eigen::Index n = uniform_int(rng, 1, 6);
    const Vec ld = random_pd_diag(rng, n, 0.1, 10.0);
    const Vec lo = random_vec(rng, n, -2.0, 0.0), hi = random_vec(rng, n, 0.0, 2.0);
    const Vec x  = random_vec(rng, n, -3.0, 3.0);
    const Vec a  = conjugate_prox_via_moreau(ProxFunction::box(lo, hi), SymMatrix::diagonal(ld), x);
    const Vec b  = prox(ProxFunction::support_of_box(lo, hi), SymMatrix::diagonal(ld), x);
    EXPECT_LT((a - b).norm(), 1e-10 * (1.0 + x.norm()));
  }
}

TEST(ConjugateProx, FullMetricMatchesEnumeration)
{
  Rng rng(25);
  for (int k = 0; k < 100; ++k) {
    const Eigen::Index n = uniform_int(rng, 1, 5);
    const Mat l  = random_pd(rng, n, 50.0);
    const Vec lo = random_vec(rng, n, -2.0, 0.0), hi = random_vec(rng, n, 0.0, 2.0);
    const Vec x  = random_vec(rng, n, -3.0, 3.0);
    const Vec a  = conjugate_prox_via_moreau(ProxFunction::box(lo, hi), SymMatrix(l), x);
    EXPECT_LT((a - support_prox_enumeration(l, x, lo, hi)).norm(), 1e-9 * (1.0 + x.norm()));
  }
}

TEST(SupportProxBox, InactiveGivesZero)
{
  const Vec mu = support_prox_box(Vec::Constant(2, -1.0), Vec::Constant(2, 1.0), Vec::Ones(2), Vec::Zero(2),
                                  v2(0.3, -0.5));
  EXPECT_EQ(mu, Vec::Zero(2));
}

TEST(SupportProxBox, UpperViolationOneDimensional)
{
  // By = 3 above d_hi = 1 with L = 4: (3 - 1) / 4
  const Vec mu = support_prox_box(Vec::Constant(1, -1.0), Vec::Constant(1, 1.0), Vec::Constant(1, 4.0), Vec::Zero(1),
                                  Vec::Constant(1, 3.0));
  EXPECT_DOUBLE_EQ(mu(0), 0.5);
  const Vec lo = support_prox_box(Vec::Constant(1, -1.0), Vec::Constant(1, 1.0), Vec::Constant(1, 4.0), Vec::Zero(1),
                                  Vec::Constant(1, -3.0));
  EXPECT_DOUBLE_EQ(lo(0), -0.5);
}

TEST(SupportProxBox, EqualsMoreauPath)
{
  Rng rng(26);
  for (int k = 0; k < 100; ++k) {
    const Eigen::Index p = uniform_int(rng, 1, 6);
    const Vec ld = random_pd_diag(rng, p, 0.1, 10.0);
    const Vec lo = random_vec(rng, p, -2.0, 0.0), hi = random_vec(rng, p, 0.0, 2.0);
    const Vec v = random_vec(rng, p), by = random_vec(rng, p, -3.0, 3.0);
    // the step is mu = prox_{g*}^{L}(v + L^{-1} By)
    const Vec via = conjugate_prox_via_moreau(ProxFunction::box(lo, hi), SymMatrix::diagonal(ld),
                                              Vec(v + by.cwiseQuotient(ld)));
    EXPECT_LT((support_prox_box(lo, hi, ld, v, by) - via).norm(), 1e-12 * (1.0 + by.norm()));
  }
}

TEST(SoftPair, UnconstrainedFeasible)
{
  const auto r = soft_box_inner_min(SoftPair{2.0, -1.0, 1.0, 1.0, 5.0});
  EXPECT_DOUBLE_EQ(r.y, 0.5);
  EXPECT_DOUBLE_EQ(r.s, 0.0);
}

TEST(SoftPair, ActiveByHand)
{
  const auto r = soft_box_inner_min(SoftPair{1.0, -4.0, 1.0, 0.0, 1.0});
  EXPECT_NEAR(r.y, 2.5, 1e-15);
  EXPECT_NEAR(r.s, 1.5, 1e-15);
}

TEST(SoftPair, MatchesGridOracle)
{
  Rng rng(27);
  for (int k = 0; k < 20; ++k) {
    const SoftPair d{uniform(rng, 0.5, 3.0), uniform(rng, -4.0, 4.0), uniform(rng, 0.5, 3.0), uniform(rng, -1.0, 2.0),
                     uniform(rng, -1.0, 1.0)};
    const auto r = soft_box_inner_min(d);
    const auto g = soft_pair_grid(d);
    EXPECT_NEAR(r.y, g.first, 1e-3);
    EXPECT_NEAR(r.s, g.second, 1e-3);
  }
}

TEST(SoftPair, NonpositiveCurvatureRejected)
{
  EXPECT_THROW(soft_box_inner_min(SoftPair{0.0, 1.0, 1.0, 0.0, 0.0}), Error);
}

TEST(SoftTriple, LowerSideMirrorsUpper)
{
  SoftTriple t;
  t.q_y = 1.0;
  t.a   = 4.0;
  t.has_lo = true;
  t.lb     = -1.0;
  const auto r = soft_box_inner_min(t);
  EXPECT_NEAR(r.y, -2.5, 1e-15);
  EXPECT_NEAR(r.s_lo, 1.5, 1e-15);
  EXPECT_EQ(r.s_hi, 0.0);
}

TEST(Dual, OriginOfUnconstrainedBox)
{
  ComposedProblem p;
  p.cost.H    = SymMatrix::identity(2);
  p.cost.zeta = Vec::Zero(2);
  p.h         = hterm::Box{Vec::Constant(2, -kInf), Vec::Constant(2, kInf)};
  p.eq        = AffineEq{Mat::Identity(2, 2), Vec::Zero(2)};
  p.g.B       = Mat(0, 2);
  const auto e = eval_dual(p, Vec::Zero(2));
  EXPECT_EQ(e.x, Vec::Zero(2));
  EXPECT_EQ(e.d, 0.0);
}

TEST(Dual, OneDimensionalByHand)
{
  // x*(l) = -l, d(l) = -l^2 / 2 - l, d'(l) = -l - 1
  ComposedProblem p;
  p.cost.H    = SymMatrix::identity(1);
  p.cost.zeta = Vec::Zero(1);
  p.h         = hterm::Box{Vec::Constant(1, -kInf), Vec::Constant(1, kInf)};
  p.eq        = AffineEq{Mat::Identity(1, 1), Vec::Ones(1)};
  p.g.B       = Mat(0, 1);
  const DualOracle o(p);
  for (double l : {-2.0, -0.5, 0.0, 1.5}) {
    const auto e = o.eval(Vec::Constant(1, l));
    EXPECT_NEAR(e.x(0), -l, 1e-15);
    EXPECT_NEAR(e.d, -0.5 * l * l - l, 1e-14);
    EXPECT_NEAR(e.grad(0), -l - 1.0, 1e-14);
  }
}

TEST(Dual, GradientMatchesFiniteDifferences)
{
  Rng rng(28);
  for (int f = 0; f < 5; ++f) {
    const auto fam = static_cast<Family>(f);
    int points = 0;
    for (int inst = 0; inst < 20 && points < 20; ++inst) {
      const auto p = random_problem(rng, fam);
      if (p.dual_dim() == 0) continue;
      const DualOracle o(p);
      for (int a = 0; a < 100 && points < 20; ++a) {
        const Vec nu = random_vec(rng, p.dual_dim(), -2.0, 2.0);
        const auto lab = active_labels(p, o.inner(nu));
        bool stable = true;
        for (Eigen::Index i = 0; i < nu.size() && stable; ++i)
          for (double s : {-1e-6, 1e-6}) {
            Vec w = nu;
            w(i) += s;
            stable = stable && active_labels(p, o.inner(w)) == lab;
          }
        if (!stable) continue;
        const Vec g = o.eval(nu).grad;
        EXPECT_LT((finite_difference_gradient(o, nu, 1e-6) - g).cwiseAbs().maxCoeff(), 1e-6 * (1.0 + max_abs(g)))
            << to_string(fam);
        ++points;
      }
    }
    EXPECT_EQ(points, 20) << to_string(fam);
  }
}

TEST(Dual, InnerMinimizerIsOptimal)
{
  // x*(nu) must beat feasible perturbations of itself on the Lagrangian
  Rng rng(29);
  for (int k = 0; k < 20; ++k) {
    const auto p = random_problem(rng, Family::Box);
    const DualOracle o(p);
    const Vec nu = random_vec(rng, p.dual_dim());
    const Vec x  = o.inner(nu);
    const Vec lin = p.cost.zeta + p.C().transpose() * nu;
    auto lag = [&](const Vec& y) { return 0.5 * y.dot(p.cost.H.mat() * y) + lin.dot(y); };
    const auto& box = std::get<hterm::Box>(p.h);
    for (int t = 0; t < 20; ++t) {
      const Vec y = (x + random_vec(rng, p.n(), -0.1, 0.1)).cwiseMax(box.lo).cwiseMin(box.hi);
      EXPECT_LE(lag(x), lag(y) + 1e-12);
    }
  }
}

TEST(Dual, UpdateSwapsLinearData)
{
  Rng rng(30);
  const auto p = random_problem(rng, Family::Equality);
  DualOracle o(p);
  auto q       = p;
  q.cost.zeta  = random_vec(rng, p.n());
  const Vec nu = random_vec(rng, p.dual_dim());
  o.update(q.cost.zeta, p.h_equality()->b);
  EXPECT_NEAR(o.eval(nu).d, DualOracle(q).eval(nu).d, 1e-12);
}

TEST(Dual, BoxWithDenseHRejected)
{
  ComposedProblem p;
  Mat h(2, 2);
  h << 2, 1, 1, 2;
  p.cost.H    = SymMatrix(h);
  p.cost.zeta = Vec::Zero(2);
  p.h         = hterm::Box{Vec::Constant(2, -1.0), Vec::Constant(2, 1.0)};
  p.g.B       = Mat(0, 2);
  try {
    DualOracle o(p);
    FAIL() << "expected UnsupportedInner";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UnsupportedInner);
  }
}
