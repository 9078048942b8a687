// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset; the exit code is nonzero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "gfdgm/gfdgm.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace gfdgm;
using namespace gfdgm::testing;

namespace {

struct Outcome
{
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

const Family kAll[] = {Family::Smooth, Family::Box, Family::Soft, Family::Equality, Family::EqualitySingular};

// 1. d(nu1) >= d(nu2) + <grad d(nu2), nu1 - nu2> - 1/2 ||nu1 - nu2||_L^2 with L = C P C^T.
Outcome dual_bound()
{
  Rng rng(101);
  int violations = 0, checks = 0;
  double worst = -1e300;
  for (int inst = 0; inst < 50; ++inst) {
    const auto p  = random_problem(rng, kAll[inst % 5]);
    const auto w  = applicable_curvature(p).value.mat();
    const DualOracle o(p);
    const auto nd = p.dual_dim();
    for (int k = 0; k < 200; ++k) {
      const Vec nu1 = random_vec(rng, nd, -3.0, 3.0);
      const Vec nu2 = random_vec(rng, nd, -3.0, 3.0);
      const auto e1 = o.eval(nu1), e2 = o.eval(nu2);
      const Vec dl  = nu1 - nu2;
      const double gap = e1.d - (e2.d + e2.grad.dot(dl) - 0.5 * dl.dot(w * dl));
      const double tol = 1e-8 * (1.0 + std::abs(e2.d));
      worst = std::max(worst, -gap / (1.0 + std::abs(e2.d)));
      ++checks;
      if (gap < -tol) ++violations;
    }
  }
  return {violations == 0, std::to_string(checks) + " pairs on 50 instances, " + std::to_string(violations) +
                               " violations, worst scaled shortfall " + fmt("%.2e", worst)};
}

// 2. Equality in the bound for L = C H^{-1} C^T when x*(nu) stays strictly inside the box.
Outcome tightness()
{
  Rng rng(202);
  double worst = 0.0;
  int pairs    = 0;
  for (int inst = 0; inst < 10; ++inst) {
    const Eigen::Index n = uniform_int(rng, 3, 6), m = uniform_int(rng, 1, 2), pp = uniform_int(rng, 0, 3);
    ComposedProblem p;
    p.cost.H    = SymMatrix::diagonal(random_pd_diag(rng, n));
    p.cost.zeta = random_vec(rng, n);
    p.h         = hterm::Box{Vec::Constant(n, -100.0), Vec::Constant(n, 100.0)};
    p.eq        = AffineEq{random_mat(rng, m, n), random_vec(rng, m)};
    p.g.B       = random_mat(rng, pp, n);
    if (pp > 0) {
      p.g.kind = GKind::Box;
      p.g.d_lo = Vec::Constant(pp, -1.0);
      p.g.d_hi = Vec::Constant(pp, 1.0);
    }
    const Mat c  = p.C();
    const Mat w  = c * p.cost.H.mat().inverse() * c.transpose();
    const DualOracle o(p);
    for (int k = 0; k < 20; ++k) {
      const Vec nu2 = random_vec(rng, m + pp);
      const Vec nu1 = nu2 + random_vec(rng, m + pp, -1e-2, 1e-2);
      const auto e1 = o.eval(nu1), e2 = o.eval(nu2);
      if ((e1.x.cwiseAbs().maxCoeff() >= 100.0) || (e2.x.cwiseAbs().maxCoeff() >= 100.0)) continue;
      const Vec dl = nu1 - nu2;
      const double res = std::abs(e1.d - (e2.d + e2.grad.dot(dl) - 0.5 * dl.dot(w * dl)));
      worst = std::max(worst, res);
      ++pairs;
    }
  }
  return {pairs > 0 && worst <= 1e-9, std::to_string(pairs) + " local pairs on 10 instances, max residual " +
                                          fmt("%.2e", worst)};
}

// 3. K11 H K11 = K11 and A K11 = 0.
Outcome k11_identities()
{
  Rng rng(303);
  double worst = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const auto p  = random_problem(rng, inst % 2 ? Family::Equality : Family::EqualitySingular);
    const auto cm = curvature_kkt(p);
    const Mat& k  = cm.k11->mat();
    const Mat& a  = p.h_equality()->A;
    worst = std::max({worst, max_abs(Mat(k * p.cost.H.mat() * k - k)), max_abs(Mat(a * k))});
  }
  return {worst <= 1e-9, "50 instances, max identity error " + fmt("%.2e", worst)};
}

// 4. prox_{g*}^L(x) + L^{-1} prox_g^{L^{-1}}(L x) = x, with prox_{g*} from an enumeration oracle.
Outcome moreau()
{
  Rng rng(404);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const bool diag = k % 2 == 0;
    const Eigen::Index n = uniform_int(rng, 1, diag ? 6 : 5);
    const Mat l = diag ? Mat(random_pd_diag(rng, n, 0.1, 10.0).asDiagonal()) : random_pd(rng, n, 50.0);
    const Vec lo = random_vec(rng, n, -2.0, 0.0);
    const Vec hi = lo + random_vec(rng, n, 0.0, 2.0);
    const Vec x  = random_vec(rng, n, -3.0, 3.0);
    const Mat l_inv = l.inverse();
    const Vec p  = support_prox_enumeration(l, x, lo, hi);
    const Vec q  = prox(ProxFunction::box(lo, hi), SymMatrix(Mat(0.5 * (l_inv + l_inv.transpose()))), Vec(l * x));
    const double res = (p + l_inv * q - x).norm() / (1.0 + x.norm());
    worst = std::max(worst, res);
  }
  return {worst <= 1e-10, "1000 triples (500 diagonal, 500 full L), max scaled residual " + fmt("%.2e", worst)};
}

// 5. D(nu*) - D(nu^k) <= 2 ||nu* - nu0||_L^2 / (k + 1)^2 over 500 iterations.
Outcome rate_certificate()
{
  Rng rng(505);
  const Family fams[] = {Family::Smooth, Family::Box, Family::Soft, Family::Equality};
  int violations = 0, logs = 0;
  for (int inst = 0; inst < 20; ++inst) {
    const auto p  = random_problem(rng, fams[inst % 4]);
    const auto cm = applicable_curvature(p);
    const DualOracle o(p);
    const auto selected = select_metric(cm, dual_pattern(p.m(), p.p(), false, true));
    const auto scalar   = scalar_metric(cm);

    StopRule tight;
    tight.max_iter = 200000;
    tight.eq_tol = tight.ineq_tol = 1e-12;
    tight.fp_tol = 1e-14;
    const auto ref   = fdgm_run(o, selected, tight);
    const Vec nu_star = ref.state.nu();
    const double d_star = o.dual_objective(nu_star);

    for (const Metric* m : {&scalar, &selected}) {
      StopRule s;
      s.max_iter = 500;
      s.eq_tol = s.ineq_tol = s.fp_tol = -1.0;
      s.log_dual = true;
      const auto r  = fdgm_run(o, *m, s);
      const auto rc = certify_rate(r.log, *m, nu_star, Vec::Zero(p.dual_dim()), d_star);
      violations += static_cast<int>(rc.violations.size());
      ++logs;
    }
  }
  return {violations == 0, std::to_string(logs) + " runs x 500 iterations (scalar and selected), " +
                               std::to_string(violations) + " violations"};
}

// 6. Full-pattern C1 metric solves an equality-constrained QP in one dual step.
Outcome one_step()
{
  Rng rng(606);
  double worst = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    Sizes s;
    s.n = uniform_int(rng, 2, 10);
    s.m = uniform_int(rng, 1, static_cast<int>(std::min<Eigen::Index>(8, s.n - 1)));
    s.p = 0;
    const auto p  = random_problem(rng, Family::Smooth, s);
    const auto cm = curvature_general(p);
    const auto l  = select_metric(cm, SymPattern::full(cm.dim()));
    StopRule stop;
    stop.max_iter = 1;
    const DualOracle o(p);
    const auto r  = fdgm_run(o, l, stop);
    const Vec x   = o.inner(r.state.nu());
    worst = std::max(worst, (p.eq->A * x - p.eq->b).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-10, "20 instances, max ||A x*(lambda^1) - b||_inf " + fmt("%.2e", worst)};
}

// 7. Diagonal metric within 5% of the grid oracle and never worse than the scalar metric.
Outcome metric_optimality()
{
  Rng rng(707);
  int fails = 0, count = 0;
  double worst_rel = 0.0;
  auto check = [&](const Mat& c, const Mat& p) {
    CurvatureMatrix cm;
    cm.q_factor = sym_sqrt(SymMatrix(p)).mat();
    cm.C        = c;
    cm.value    = SymMatrix(Mat(c * p * c.transpose()));
    const auto sel = select_metric(cm, SymPattern::diagonal(cm.dim()));
    const auto sca = scalar_metric(cm);
    const double oracle = grid_ratio_oracle(cm.value.mat());
    worst_rel = std::max(worst_rel, sel.achieved_ratio / oracle - 1.0);
    ++count;
    if (sel.achieved_ratio > 1.05 * oracle || sel.achieved_ratio > sca.achieved_ratio * (1.0 + 1e-9)) ++fails;
  };
  Mat ex(2, 2);
  ex << 2.0, 1.0, 1.0, 2.0;
  check(Mat::Identity(2, 2), ex);
  for (int k = 0; k < 20; ++k) check(random_mat(rng, 2, 2), random_pd(rng, 2, 1e3));
  for (int k = 0; k < 20; ++k) check(random_mat(rng, 3, 3), random_pd(rng, 3, 1e3));
  for (int k = 0; k < 10; ++k) check(random_mat(rng, 3, 2), random_pd(rng, 2, 1e2));
  return {fails == 0, std::to_string(count) + " instances (2x2, 3x3, rank-deficient 3x3), " + std::to_string(fails) +
                          " failures, worst ratio/oracle - 1 = " + fmt("%.3g", worst_rel)};
}

// 8. AFTI-16 table, qualitative.
Outcome afti16()
{
  const auto t0 = std::chrono::steady_clock::now();
  BenchOptions opt;
  opt.on_row = [](const BenchmarkRow& r) {
    std::printf("      %-22s avg %10.1f  max %8d%s\n", r.name.c_str(), r.avg_iterations, r.max_iterations,
                r.aborted ? "  (cap reached)" : "");
    std::fflush(stdout);
  };
  const auto rep = bench_afti16(opt);
  const auto* g1 = rep.find("ex1-generalized");
  const auto* s1 = rep.find("ex1-scalar");
  const auto* gk = rep.find("ex2-generalized-K11");
  const auto* gh = rep.find("ex2-generalized-Hinv");
  const auto* ad = rep.find("admm-rho=3");
  if (!g1 || !s1 || !gk || !gh || !ad) return {false, "benchmark rows missing"};

  const bool a = !g1->aborted && g1->avg_iterations <= 500.0 && g1->max_iterations <= 2000;
  // a capped scalar row still counts when the partial average already clears the threshold
  const double mult_b = s1->avg_iterations / g1->avg_iterations;
  const bool b = mult_b >= 100.0;
  const double ex2 = std::max(gk->avg_iterations, gh->avg_iterations);
  const double mult_c = ad->avg_iterations / ex2;
  const bool c = !gk->aborted && !gh->aborted && !ad->aborted && mult_c >= 10.0;
  const double ratio_d = gh->avg_iterations / gk->avg_iterations;
  const bool d = ratio_d >= 0.5 && ratio_d <= 2.0;
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::string det = std::string("(a) ") + (a ? "ok" : "FAIL") + " avg " + fmt("%.1f", g1->avg_iterations) + " max " +
                    std::to_string(g1->max_iterations) + "; (b) " + (b ? "ok" : "FAIL") + " scalar/generalized " +
                    fmt("%.0f", mult_b) + "x" + (s1->aborted ? " (scalar row capped)" : "") + "; (c) " +
                    (c ? "ok" : "FAIL") + " ADMM rho=3 / ex2 " + fmt("%.1f", mult_c) + "x; (d) " + (d ? "ok" : "FAIL") +
                    " Hinv/K11 " + fmt("%.2f", ratio_d) + "; " + fmt("%.0f", secs) + " s";
  return {a && b && c && d, det};
}

// 9. grad d against central differences at active-set-stable points.
Outcome gradient()
{
  Rng rng(909);
  double worst = 0.0;
  int points = 0;
  for (auto fam : kAll) {
    int found = 0;
    for (int inst = 0; inst < 50 && found < 20; ++inst) {
      const auto p = random_problem(rng, fam);
      const DualOracle o(p);
      const auto nd = p.dual_dim();
      if (nd == 0) continue;
      for (int attempt = 0, here = 0; attempt < 500 && here < 5 && found < 20; ++attempt) {
        const Vec nu  = random_vec(rng, nd, -2.0, 2.0);
        const double eps = 1e-6;
        const auto lab = active_labels(p, o.inner(nu));
        bool stable = true;
        for (Eigen::Index i = 0; i < nd && stable; ++i)
          for (double sg : {-1.0, 1.0}) {
            Vec v = nu;
            v(i) += sg * eps;
            if (active_labels(p, o.inner(v)) != lab) stable = false;
          }
        if (!stable) continue;
        const Vec fd = finite_difference_gradient(o, nu, eps);
        const Vec g  = o.eval(nu).grad;
        worst = std::max(worst, (fd - g).cwiseAbs().maxCoeff() / (1.0 + g.cwiseAbs().maxCoeff()));
        ++found;
        ++here;
        ++points;
      }
    }
  }
  return {points >= 5 * 20 && worst <= 1e-6,
          std::to_string(points) + " points (20 per class, 5 classes), max relative error " + fmt("%.2e", worst)};
}

// 10. fdgm at tight tolerance agrees with the reference solver.
Outcome cross_solver()
{
  Rng rng(1010);
  const Family fams[] = {Family::Box, Family::Soft, Family::Equality, Family::EqualitySingular};
  double worst = 0.0;
  int capped = 0;
  for (int inst = 0; inst < 50; ++inst) {
    const auto p  = random_problem(rng, fams[inst % 4]);
    const auto cm = applicable_curvature(p);
    const auto l  = select_metric(cm, dual_pattern(p.m(), p.p(), false, true));
    StopRule s;
    s.max_iter = 200000;
    s.eq_tol = s.ineq_tol = 1e-11;
    s.fp_tol = 1e-13;
    const auto r   = fdgm_run(p, l, s);
    const auto ref = reference_solution(p);
    if (!r.converged()) ++capped;
    worst = std::max(worst, detail::relative_error(r.y, ref.x));
  }
  return {worst <= 1e-6, "50 instances (box, soft, equality, equality with singular H), max relative error " +
                             fmt("%.2e", worst) + (capped ? ", " + std::to_string(capped) + " hit the cap" : "")};
}

}  // namespace

int main(int argc, char** argv)
{
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"dual bound property", dual_bound},
      {"tightness of the bound", tightness},
      {"K11 identities", k11_identities},
      {"generalized Moreau decomposition", moreau},
      {"rate certificate", rate_certificate},
      {"exact-metric one-step solve", one_step},
      {"metric optimality", metric_optimality},
      {"AFTI-16 qualitative reproduction", afti16},
      {"gradient correctness", gradient},
      {"cross-solver agreement", cross_solver},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("criterion %2d %s  %s: %s\n", id, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
