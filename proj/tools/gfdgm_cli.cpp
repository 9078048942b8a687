// gfdgm command-line driver: precondition, solve, mpc-sim, bench-afti16.
//
// Exit codes: 0 success, 1 solver failure, 2 input error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "gfdgm/gfdgm.hpp"

namespace fs = std::filesystem;
using namespace gfdgm;

namespace {

constexpr int kOk          = 0;
constexpr int kSolverError = 1;
constexpr int kInputError  = 2;

struct Globals
{
  unsigned seed = 0;
  std::string out_dir = ".";
  std::string format  = "console";
};

int exit_code_for(ErrorKind k)
{
  switch (k) {
    case ErrorKind::NonConvergence:
    case ErrorKind::Infeasible:
    case ErrorKind::SingularKkt: return kSolverError;
    default: return kInputError;
  }
}

fs::path out_path(const Globals& g, const std::string& explicit_path, const std::string& name)
{
  if (!explicit_path.empty()) return explicit_path;
  fs::create_directories(g.out_dir);
  return fs::path(g.out_dir) / name;
}

std::ofstream open_out(const fs::path& p)
{
  std::ofstream os(p);
  if (!os) fail(ErrorKind::InvalidArgument, "cannot open " + p.string() + " for writing");
  return os;
}

CurvatureMatrix curvature_by_name(const ComposedProblem& p, const std::string& name)
{
  if (name == "hinv") return curvature_general(p);
  if (name == "projected") return curvature_projected(p);
  if (name == "k11") return curvature_kkt(p);
  return validate(p).kkt_path ? curvature_kkt(p) : curvature_general(p);
}

/// Curvature of the primal smooth part 1/2 x^T H x, as seen by fgm_run.
CurvatureMatrix primal_curvature(const ComposedProblem& p)
{
  CurvatureMatrix cm;
  cm.value    = p.cost.H;
  cm.q_factor = sym_sqrt(p.cost.H).mat();
  cm.C        = Mat::Identity(p.n(), p.n());
  return cm;
}

// ---- precondition ---------------------------------------------------------

struct PreconditionArgs
{
  std::string problem, out, pattern = "diagonal", curvature = "auto";
};

int cmd_precondition(const Globals& g, const PreconditionArgs& a)
{
  const auto p  = load_problem(a.problem);
  validate_or_throw(p);
  const auto cm = curvature_by_name(p, a.curvature);
  const auto m  = select_metric(cm, parse_pattern(a.pattern, cm.dim()));
  const auto path = out_path(g, a.out, "metric.json");
  open_out(path) << metric_to_json(m, to_string(cm.source)).dump(1) << "\n";
  if (g.format == "csv") {
    std::cout << "case,rank,achievedRatio,certificateMargin,warning\n"
              << to_string(m.kase) << "," << rank_of(cm.value.mat()) << "," << m.achieved_ratio << ","
              << m.certificate_margin << "," << (m.warning ? 1 : 0) << "\n";
  } else {
    std::cout << "case " << to_string(m.kase) << ", pattern " << m.pattern.describe() << ", ratio "
              << m.achieved_ratio << ", margin " << m.certificate_margin << "\n"
              << "metric written to " << path.string() << "\n";
    if (!m.note.empty()) std::cout << "note: " << m.note << "\n";
  }
  return m.warning ? kSolverError : kOk;
}

// ---- solve ----------------------------------------------------------------

struct SolveArgs
{
  std::string problem, metric, out;
  std::string algorithm = "fdgm";
  std::string metric_kind = "selected";
  std::string pattern = "diagonal";
  double rho   = 1.0;
  int max_iter = 100000;
  double tol_eq = 1e-6, tol_ineq = 1e-6, tol_fp = 1e-9, tol_rel = 0.0;
  bool allow_uncertified = false;
  bool no_reference      = false;
};

Metric load_or_select_metric(const SolveArgs& a, const CurvatureMatrix& cm)
{
  if (!a.metric.empty()) {
    std::ifstream in(a.metric);
    if (!in) fail(ErrorKind::Parse, "cannot open " + a.metric);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Parse, std::string("metric file: ") + e.what());
    }
    return metric_from_json(j, cm.value, classify_case(cm));
  }
  if (a.metric_kind == "scalar") return scalar_metric(cm);
  return select_metric(cm, parse_pattern(a.pattern, cm.dim()));
}

void write_log(std::ostream& os, const SolveLog& log)
{
  os << "k,D,eq_res,ineq_res,rel_err\n" << std::setprecision(12);
  for (const auto& e : log) os << e.k << "," << e.D << "," << e.eq_res << "," << e.ineq_res << "," << e.rel_err << "\n";
}

int cmd_solve(const Globals& g, const SolveArgs& a)
{
  const auto p = load_problem(a.problem);
  if (a.algorithm == "fgm") {
    if (p.m() > 0 || p.p() > 0 || std::holds_alternative<hterm::Equality>(p.h) ||
        std::holds_alternative<hterm::SoftBoxCoupled>(p.h))
      fail(ErrorKind::InvalidArgument, "fgm: the problem must have no constraints besides a box h");
    if (!(min_eig(p.cost.H) > 0.0)) fail(ErrorKind::NotPositiveSemidefinite, "fgm: H must be positive definite");
  } else {
    validate_or_throw(p);
  }

  std::optional<Vec> y_ref;
  if (!a.no_reference) {
    try {
      y_ref = a.algorithm == "fgm" ? reference_solution(to_plain_qp(p)).x : reference_solution(p).x;
    } catch (const Error& e) {
      std::cerr << "warning: no reference solution (" << e.what() << "); rel_err left empty\n";
    }
  }
  const bool rel_stop = a.tol_rel > 0.0;
  if (rel_stop && !y_ref) fail(ErrorKind::InvalidArgument, "--tol-rel needs a reference solution");

  SolveLog log;
  Vec y;
  bool converged = false;
  int iterations = 0;
  std::ostringstream header;
  header << "# algorithm=" << a.algorithm << "\n";

  if (a.algorithm == "fdgm") {
    const auto cm = curvature_by_name(p, "auto");
    const auto m  = load_or_select_metric(a, cm);
    StopRule stop;
    stop.max_iter = a.max_iter;
    stop.eq_tol   = a.tol_eq;
    stop.ineq_tol = a.tol_ineq;
    stop.fp_tol   = a.tol_fp;
    stop.y_ref    = y_ref;
    stop.rel_stop = rel_stop;
    stop.rel_tol  = a.tol_rel;
    stop.log_dual = true;
    FdgmOptions opt;
    opt.allow_uncertified = a.allow_uncertified;
    const auto r = fdgm_run(p, m, stop, opt);
    log = r.log;
    y = r.y;
    converged  = r.converged();
    iterations = r.iterations;
    header << "# metric=" << (a.metric.empty() ? a.metric_kind : a.metric) << " pattern=" << m.pattern.describe()
           << " ratio=" << m.achieved_ratio << "\n";
  } else if (a.algorithm == "admm") {
    AdmmStop stop;
    stop.max_iter = a.max_iter;
    stop.abs_tol  = a.tol_eq;
    stop.y_ref    = y_ref;
    stop.rel_stop = rel_stop;
    stop.rel_tol  = a.tol_rel;
    const auto r = admm_run(p, a.rho, stop);
    log = r.log;
    y = r.y;
    converged  = r.converged();
    iterations = r.iterations;
    header << "# rho=" << a.rho << "\n";
  } else {
    // primal fast gradient on 1/2 x^T H x + zeta^T x + h(x)
    const auto cm = primal_curvature(p);
    const auto m  = load_or_select_metric(a, cm);
    if (!a.allow_uncertified) check_certificate(m.L, p.cost.H);
    ProxFunction psi;
    if (const auto* box = std::get_if<hterm::Box>(&p.h)) psi = ProxFunction::box(box->lo, box->hi);
    SmoothOracle ell{[&](const Vec& x) { return p.cost.value(x); },
                     [&](const Vec& x) { return Vec(p.cost.H.mat() * x + p.cost.zeta); }};
    FgmStop stop;
    stop.max_iter   = a.max_iter;
    stop.fp_tol     = a.tol_fp;
    stop.keep_trace = true;
    const auto r = fgm_run(ell, psi, m, Vec::Zero(p.n()), stop);
    for (int k = 0; k < r.iterations; ++k) {
      LogEntry e;
      e.k = k + 1;
      e.D = r.objective[static_cast<std::size_t>(k)];
      const auto& x = r.trace[static_cast<std::size_t>(k)];
      if (y_ref) e.rel_err = detail::relative_error(x, *y_ref);
      log.push_back(e);
      if (rel_stop && e.rel_err <= a.tol_rel) {
        converged = true;
        break;
      }
    }
    y = r.x;
    if (!rel_stop) converged = r.status == SolveStatus::Converged;
    iterations = static_cast<int>(log.size());
    header << "# metric=" << (a.metric.empty() ? a.metric_kind : a.metric) << " ratio=" << m.achieved_ratio
           << "\n# D holds the primal objective\n";
  }

  header << "# converged=" << (converged ? "true" : "false") << "\n# iterations=" << iterations << "\n";
  if (!log.empty())
    header << "# eq_res=" << log.back().eq_res << "\n# ineq_res=" << log.back().ineq_res << "\n";
  header << "# y=";
  for (Eigen::Index i = 0; i < y.size(); ++i) header << (i ? " " : "") << std::setprecision(12) << y(i);
  header << "\n";

  const auto path = out_path(g, a.out, "result.csv");
  auto os         = open_out(path);
  os << header.str();
  write_log(os, log);
  if (g.format == "csv") {
    std::cout << header.str();
    write_log(std::cout, log);
  } else {
    std::cout << a.algorithm << ": " << (converged ? "converged" : "iteration cap reached") << " after "
              << iterations << " iterations\nresult written to " << path.string() << "\n";
  }
  return converged ? kOk : kSolverError;
}

// ---- mpc-sim --------------------------------------------------------------

struct SimArgs
{
  std::string scenario, out;
  std::string form = "eqdual", method = "fdgm", metric = "selected", curvature = "k11";
  double rho = 3.0;
  int max_iter = 100000;
  int samples_per_segment = 30;
  bool warm_start = false;
};

int cmd_mpc_sim(const Globals& g, const SimArgs& a)
{
  const auto inst = afti16_model();
  Scenario sc = a.scenario.empty() ? afti16_scenario(a.samples_per_segment)
                                   : load_scenario(a.scenario, inst.plant.nx(), inst.plant.ny());
  if (g.seed != 0) {
    std::mt19937 rng(g.seed);
    std::normal_distribution<double> nd(0.0, 0.01);
    for (Eigen::Index i = 0; i < sc.x0.size(); ++i) sc.x0(i) += nd(rng);
  }

  LoopConfig cfg;
  cfg.name       = "mpc-sim";
  cfg.form       = a.form == "eqdual" ? MpcForm::EqDual : MpcForm::IneqDual;
  cfg.method     = a.method == "admm" ? Method::Admm : Method::Fdgm;
  cfg.rho        = a.rho;
  cfg.max_iter   = a.max_iter;
  cfg.warm_start = a.warm_start;
  if (cfg.method == Method::Fdgm) {
    const auto p  = condense(inst, cfg.form);
    const auto cm = cfg.form == MpcForm::EqDual ? curvature_general(p)
                                                : (a.curvature == "hinv" ? curvature_general(p) : curvature_kkt(p));
    const auto pat = cfg.form == MpcForm::EqDual ? SymPattern::full(cm.dim()) : SymPattern::diagonal(cm.dim());
    cfg.metric    = a.metric == "scalar" ? scalar_metric(cm) : select_metric(cm, pat);
  }
  const auto r = closed_loop_run(inst, cfg, sc);

  const auto path = out_path(g, a.out, "trajectory.csv");
  auto os         = open_out(path);
  write_trajectory_csv(r, os);
  if (g.format == "csv") {
    write_trajectory_csv(r, std::cout);
  } else {
    std::cout << r.samples.size() << " samples, avg iterations " << r.avg_iterations() << ", max "
              << r.max_iterations() << "\ntrajectory written to " << path.string() << "\n";
  }
  if (r.aborted) {
    std::cerr << "error: " << r.message << "\n";
    return kSolverError;
  }
  return kOk;
}

// ---- bench-afti16 ---------------------------------------------------------

struct BenchArgs
{
  std::string out;
  int samples_per_segment = 30;
  int max_iter = 100000;
  int max_iter_scalar = 1000000;
  bool skip_scalar_ex1 = false;
  bool warm_start = false;
  bool quiet = false;
};

int cmd_bench(const Globals& g, const BenchArgs& a)
{
  BenchOptions opt;
  opt.samples_per_segment = a.samples_per_segment;
  opt.max_iter            = a.max_iter;
  opt.max_iter_scalar_ex1 = a.max_iter_scalar;
  opt.include_scalar_ex1  = !a.skip_scalar_ex1;
  opt.warm_start          = a.warm_start;
  opt.seed                = g.seed;
  if (!a.quiet)
    opt.on_row = [](const BenchmarkRow& r) {
      std::cerr << "  " << r.name << ": avg " << r.avg_iterations << ", max " << r.max_iterations
                << (r.aborted ? " (aborted)" : "") << "\n";
    };
  const auto rep = bench_afti16(opt);

  const auto path = out_path(g, a.out, "bench_afti16.csv");
  auto os         = open_out(path);
  write_report_csv(rep, os);
  if (g.format == "csv")
    write_report_csv(rep, std::cout);
  else
    write_report_console(rep, std::cout);
  for (const auto& r : rep.rows)
    if (r.aborted) std::cerr << "error: " << r.message << "\n";
  return rep.ok() ? kOk : kSolverError;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Fast dual gradient methods with offline metric selection"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Perturbs the scenario initial state (0 = none)");
  app.add_option("--out-dir", g.out_dir, "Directory for output files");
  app.add_option("--format", g.format, "Standard output format")->check(CLI::IsMember({"csv", "console"}));

  PreconditionArgs pa;
  auto* pre = app.add_subcommand("precondition", "Select a structured metric for a problem file");
  pre->add_option("problem", pa.problem, "Problem file (JSON)")->required();
  pre->add_option("-o,--out", pa.out, "Metric file (default <out-dir>/metric.json)");
  pre->add_option("--pattern", pa.pattern, "diagonal, full or block:n1,n2,...");
  pre->add_option("--curvature", pa.curvature, "Matrix P in C P C^T")
      ->check(CLI::IsMember({"auto", "hinv", "projected", "k11"}));

  SolveArgs sa;
  auto* solve = app.add_subcommand("solve", "Solve a problem file");
  solve->add_option("problem", sa.problem, "Problem file (JSON)")->required();
  solve->add_option("--metric", sa.metric, "Metric file from precondition");
  solve->add_option("--metric-kind", sa.metric_kind, "Metric when no file is given")
      ->check(CLI::IsMember({"selected", "scalar"}));
  solve->add_option("--pattern", sa.pattern, "Pattern for the selected metric");
  solve->add_option("--algorithm", sa.algorithm)->check(CLI::IsMember({"fdgm", "fgm", "admm"}));
  solve->add_option("--rho", sa.rho, "ADMM penalty")->check(CLI::PositiveNumber);
  solve->add_option("--max-iter", sa.max_iter)->check(CLI::PositiveNumber);
  solve->add_option("--tol-eq", sa.tol_eq, "Equality residual tolerance (ADMM: primal/dual residual)");
  solve->add_option("--tol-ineq", sa.tol_ineq, "Bound violation tolerance");
  solve->add_option("--tol-fp", sa.tol_fp, "Fixed-point residual tolerance");
  solve->add_option("--tol-rel", sa.tol_rel, "Stop on relative error to the reference solution (0 = off)");
  solve->add_flag("--allow-uncertified", sa.allow_uncertified, "Run with a metric that does not dominate C P C^T");
  solve->add_flag("--no-reference", sa.no_reference, "Skip the reference solve (rel_err left empty)");
  solve->add_option("-o,--out", sa.out, "Result file (default <out-dir>/result.csv)");

  SimArgs ma;
  auto* sim = app.add_subcommand("mpc-sim", "Closed-loop AFTI-16 simulation");
  sim->add_option("--scenario", ma.scenario, "Scenario file (JSON); default pitch maneuver");
  sim->add_option("--form", ma.form)->check(CLI::IsMember({"eqdual", "ineqdual"}));
  sim->add_option("--method", ma.method)->check(CLI::IsMember({"fdgm", "admm"}));
  sim->add_option("--metric", ma.metric)->check(CLI::IsMember({"selected", "scalar"}));
  sim->add_option("--curvature", ma.curvature, "ineqdual only")->check(CLI::IsMember({"k11", "hinv"}));
  sim->add_option("--rho", ma.rho)->check(CLI::PositiveNumber);
  sim->add_option("--max-iter", ma.max_iter)->check(CLI::PositiveNumber);
  sim->add_option("--samples-per-segment", ma.samples_per_segment)->check(CLI::PositiveNumber);
  sim->add_flag("--warm-start", ma.warm_start);
  sim->add_option("-o,--out", ma.out, "Trajectory file (default <out-dir>/trajectory.csv)");

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench-afti16", "AFTI-16 comparison table");
  bench->add_option("--samples-per-segment", ba.samples_per_segment)->check(CLI::PositiveNumber);
  bench->add_option("--max-iter", ba.max_iter)->check(CLI::PositiveNumber);
  bench->add_option("--max-iter-scalar", ba.max_iter_scalar, "Cap for the scalar Example 1 row")
      ->check(CLI::PositiveNumber);
  bench->add_flag("--skip-scalar-ex1", ba.skip_scalar_ex1);
  bench->add_flag("--warm-start", ba.warm_start);
  bench->add_flag("-q,--quiet", ba.quiet);
  bench->add_option("-o,--out", ba.out, "Report file (default <out-dir>/bench_afti16.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInputError;
  }

  try {
    if (*pre) return cmd_precondition(g, pa);
    if (*solve) return cmd_solve(g, sa);
    if (*sim) return cmd_mpc_sim(g, ma);
    return cmd_bench(g, ba);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
}
