#ifndef GFDGM_BENCH_HPP
#define GFDGM_BENCH_HPP

// AFTI-16 comparison of dual gradient variants and ADMM over one closed-loop
// scenario. Iteration columns are deterministic; timing columns are not.

#include <cstdio>
#include <functional>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gfdgm/closed_loop.hpp"
#include "gfdgm/curvature.hpp"
#include "gfdgm/metric.hpp"

namespace gfdgm {

struct BenchmarkRow
{
  std::string name;
  std::string params;
  double avg_iterations = 0.0;
  int max_iterations    = 0;
  double avg_ms = 0.0, max_ms = 0.0;
  int samples  = 0;
  bool aborted = false;
  std::string message;
  double metric_ratio = 0.0;  ///< eigenvalue ratio of the metric, 0 for ADMM
};

struct BenchmarkReport
{
  std::vector<BenchmarkRow> rows;

  const BenchmarkRow* find(const std::string& name) const
  {
    for (const auto& r : rows)
      if (r.name == name) return &r;
    return nullptr;
  }
  bool ok() const
  {
    for (const auto& r : rows)
      if (r.aborted) return false;
    return !rows.empty();
  }
};

struct BenchOptions
{
  int samples_per_segment = 30;
  int max_iter            = 100000;
  int max_iter_scalar_ex1 = 1000000;
  std::vector<double> rhos{0.3, 3.0, 30.0};
  unsigned seed   = 0;  ///< nonzero perturbs the initial state
  bool warm_start = false;
  bool include_scalar_ex1 = true;
  /// Progress callback, called after each row.
  std::function<void(const BenchmarkRow&)> on_row;
};

inline BenchmarkRow summarize(const std::string& name, const std::string& params, const ClosedLoopResult& r,
                              double ratio)
{
  BenchmarkRow row;
  row.name           = name;
  row.params         = params;
  row.avg_iterations = r.avg_iterations();
  row.max_iterations = r.max_iterations();
  row.samples        = static_cast<int>(r.samples.size());
  row.aborted        = r.aborted;
  row.message        = r.message;
  row.metric_ratio   = ratio;
  double sum = 0.0;
  for (const auto& s : r.samples) {
    sum += s.solve_ms;
    row.max_ms = std::max(row.max_ms, s.solve_ms);
  }
  row.avg_ms = r.samples.empty() ? 0.0 : sum / static_cast<double>(r.samples.size());
  return row;
}

inline std::string format_double(double v, int prec = 4)
{
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

/// Runs every row of the comparison on the AFTI-16 model.
inline BenchmarkReport bench_afti16(const BenchOptions& opt = {})
{
  const MpcInstance inst = afti16_model();
  Scenario sc = afti16_scenario(opt.samples_per_segment);
  if (opt.seed != 0) {
    std::mt19937 rng(opt.seed);
    std::normal_distribution<double> nd(0.0, 0.01);
    for (Eigen::Index i = 0; i < sc.x0.size(); ++i) sc.x0(i) += nd(rng);
  }

  BenchmarkReport rep;
  auto emit = [&](BenchmarkRow row) {
    if (opt.on_row) opt.on_row(row);
    rep.rows.push_back(std::move(row));
  };
  auto run_fdgm = [&](const std::string& name, const std::string& params, MpcForm form, const Metric& m,
                      const SymMatrix& curv, int cap) {
    LoopConfig cfg;
    cfg.name       = name;
    cfg.form       = form;
    cfg.metric     = m;
    cfg.curvature  = curv;
    cfg.max_iter   = cap;
    cfg.warm_start = opt.warm_start;
    emit(summarize(name, params, closed_loop_run(inst, cfg, sc), m.achieved_ratio));
  };

  // equality-dualized form: L_lambda = A H^{-1} A^T or its norm times I
  {
    const auto p  = condense_eqdual(inst);
    const auto cm = curvature_general(p);
    const auto gen = select_metric(cm, SymPattern::full(cm.dim()));
    run_fdgm("ex1-generalized", "L=AH^-1A^T", MpcForm::EqDual, gen, cm.value, opt.max_iter);
    if (opt.include_scalar_ex1) {
      const auto sc_m = scalar_metric(cm);
      run_fdgm("ex1-scalar", "L=||AH^-1A^T||I", MpcForm::EqDual, sc_m, cm.value, opt.max_iter_scalar_ex1);
    }
  }

  // inequality-dualized form with diagonal L_mu
  {
    const auto p   = condense_ineqdual(inst);
    const auto cmk = curvature_kkt(p);
    const auto cmh = curvature_general(p);
    const auto pat = SymPattern::diagonal(cmk.dim());
    run_fdgm("ex2-generalized-K11", "diag L_mu, P=K11", MpcForm::IneqDual, select_metric(cmk, pat), cmk.value,
             opt.max_iter);
    run_fdgm("ex2-generalized-Hinv", "diag L_mu, P=H^-1", MpcForm::IneqDual, select_metric(cmh, pat), cmk.value,
             opt.max_iter);
    run_fdgm("ex2-scalar-K11", "L_mu=||BK11B^T||I", MpcForm::IneqDual, scalar_metric(cmk), cmk.value, opt.max_iter);
    run_fdgm("ex2-scalar-Hinv", "L_mu=||BH^-1B^T||I", MpcForm::IneqDual, scalar_metric(cmh), cmk.value,
             opt.max_iter);
  }

  for (double rho : opt.rhos) {
    LoopConfig cfg;
    cfg.name     = "admm-rho=" + format_double(rho);
    cfg.form     = MpcForm::IneqDual;
    cfg.method   = Method::Admm;
    cfg.rho      = rho;
    cfg.max_iter = opt.max_iter;
    emit(summarize(cfg.name, "rho=" + format_double(rho), closed_loop_run(inst, cfg, sc), 0.0));
  }
  return rep;
}

inline void write_report_csv(const BenchmarkReport& rep, std::ostream& os)
{
  os << "name,params,avg_iterations,max_iterations,avg_ms,max_ms,samples,aborted,metric_ratio\n";
  for (const auto& r : rep.rows)
    os << r.name << ",\"" << r.params << "\"," << std::setprecision(10) << r.avg_iterations << ","
       << r.max_iterations << "," << r.avg_ms << "," << r.max_ms << "," << r.samples << ","
       << (r.aborted ? 1 : 0) << "," << r.metric_ratio << "\n";
}

inline void write_report_console(const BenchmarkReport& rep, std::ostream& os)
{
  char line[256];
  std::snprintf(line, sizeof line, "%-22s %-20s %12s %10s %10s %10s %12s\n", "method", "parameters", "avg iter",
                "max iter", "avg ms", "max ms", "L ratio");
  os << line;
  for (const auto& r : rep.rows) {
    std::snprintf(line, sizeof line, "%-22s %-20s %12.1f %10d %10.3f %10.3f %12.4g%s\n", r.name.c_str(),
                  r.params.c_str(), r.avg_iterations, r.max_iterations, r.avg_ms, r.max_ms, r.metric_ratio,
                  r.aborted ? "  ABORTED" : "");
    os << line;
  }
}

}  // namespace gfdgm

#endif  // GFDGM_BENCH_HPP
