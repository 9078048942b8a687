// Small box-constrained QP solved in the dual with a scalar and a selected metric.

#include <iostream>

#include "gfdgm/gfdgm.hpp"

using namespace gfdgm;

int main()
{
  ComposedProblem p;
  Mat h(3, 3);
  h << 50.0, 1.0, 0.0,
       1.0,  2.0, 0.5,
       0.0,  0.5, 0.2;
  p.cost.H    = SymMatrix(h);
  p.cost.zeta = Vec::LinSpaced(3, -4.0, 1.0);
  p.eq        = AffineEq{Mat::Ones(1, 3), Vec::Ones(1)};
  p.g.B       = Mat::Identity(3, 3);
  p.g.kind    = GKind::Box;
  p.g.d_lo    = Vec::Constant(3, -0.2);
  p.g.d_hi    = Vec::Constant(3, 0.6);

  const auto cm      = curvature_general(p);
  const auto scalar  = scalar_metric(cm);
  const auto pattern = dual_pattern(p.m(), p.p(), false, true);
  const auto chosen  = select_metric(cm, pattern);

  StopRule stop;
  stop.eq_tol = stop.ineq_tol = 1e-8;
  const auto rs = fdgm_run(p, scalar, stop);
  const auto rc = fdgm_run(p, chosen, stop);
  const auto ref = reference_solution(p);

  std::cout << "case " << to_string(chosen.kase) << ", pattern " << chosen.pattern.describe() << "\n"
            << "scalar metric:   ratio " << scalar.achieved_ratio << ", " << rs.iterations << " iterations\n"
            << "selected metric: ratio " << chosen.achieved_ratio << ", " << rc.iterations << " iterations\n"
            << "y        = " << rc.y.transpose() << "\n"
            << "y (ref)  = " << ref.x.transpose() << "\n";
  return rc.converged() ? 0 : 1;
}
