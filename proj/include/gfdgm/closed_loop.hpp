#ifndef GFDGM_CLOSED_LOOP_HPP
#define GFDGM_CLOSED_LOOP_HPP

// Receding-horizon simulation: per sample only xbar and the reference change,
// so every factorization is done once before the loop.

#include <chrono>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gfdgm/admm.hpp"
#include "gfdgm/dual.hpp"
#include "gfdgm/metric.hpp"
#include "gfdgm/mpc.hpp"
#include "gfdgm/reference.hpp"
#include "gfdgm/solver.hpp"

namespace gfdgm {

struct Segment
{
  int samples = 0;
  Vec y_ref;
};

struct Scenario
{
  Vec x0;
  std::vector<Segment> segments;

  int total() const
  {
    int n = 0;
    for (const auto& s : segments) n += s.samples;
    return n;
  }

  const Vec& reference_at(int t) const
  {
    int acc = 0;
    for (const auto& s : segments) {
      acc += s.samples;
      if (t < acc) return s.y_ref;
    }
    return segments.back().y_ref;
  }
};

/// Pitch angle to 10 degrees for 30 samples, then back to 0 for 30 samples.
inline Scenario afti16_scenario(int samples_per_segment = 30)
{
  Scenario s;
  s.x0 = Vec::Zero(4);
  Vec up(2), down(2);
  up << 0.0, 10.0;
  down << 0.0, 0.0;
  s.segments = {{samples_per_segment, up}, {samples_per_segment, down}};
  return s;
}

/// Reads {"x0": [...], "segments": [{"samples": k, "y_ref": [...]}, ...]}.
inline Scenario scenario_from_json(const nlohmann::json& j, Eigen::Index nx, Eigen::Index ny)
{
  auto vec = [](const nlohmann::json& a, Eigen::Index len, const std::string& path) {
    if (!a.is_array() || static_cast<Eigen::Index>(a.size()) != len)
      fail(ErrorKind::Validation, path + ": expected an array of length " + std::to_string(len));
    Vec v(len);
    for (Eigen::Index i = 0; i < len; ++i) {
      const auto& e = a[static_cast<std::size_t>(i)];
      if (!e.is_number()) fail(ErrorKind::Parse, path + "[" + std::to_string(i) + "]: expected a number");
      v(i) = e.get<double>();
    }
    return v;
  };
  if (!j.is_object() || !j.contains("x0") || !j.contains("segments"))
    fail(ErrorKind::Parse, "scenario: expected fields x0 and segments");
  Scenario s;
  s.x0 = vec(j.at("x0"), nx, "$.x0");
  const auto& segs = j.at("segments");
  if (!segs.is_array() || segs.empty()) fail(ErrorKind::Parse, "$.segments: expected a non-empty array");
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const auto path = "$.segments[" + std::to_string(i) + "]";
    if (!segs[i].is_object() || !segs[i].contains("samples") || !segs[i].at("samples").is_number_integer())
      fail(ErrorKind::Parse, path + ".samples: expected an integer");
    const int k = segs[i].at("samples").get<int>();
    if (k < 1) fail(ErrorKind::Validation, path + ".samples: must be positive");
    if (!segs[i].contains("y_ref")) fail(ErrorKind::Parse, path + ".y_ref: missing");
    s.segments.push_back({k, vec(segs[i].at("y_ref"), ny, path + ".y_ref")});
  }
  return s;
}

inline Scenario load_scenario(const std::string& path, Eigen::Index nx, Eigen::Index ny)
{
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Parse, "cannot open " + path);
  try {
    return scenario_from_json(nlohmann::json::parse(in), nx, ny);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, std::string("scenario: ") + e.what());
  }
}

enum class MpcForm { EqDual, IneqDual };
enum class Method { Fdgm, Admm };

struct LoopConfig
{
  std::string name;
  MpcForm form  = MpcForm::EqDual;
  Method method = Method::Fdgm;
  std::optional<Metric> metric;       ///< required for Method::Fdgm
  std::optional<SymMatrix> curvature; ///< certifying curvature, computed once when absent
  double rho = 1.0;
  int max_iter     = 100000;
  bool oracle_rule = true;  ///< stop at 0.5% relative error against the reference solution
  double rel_tol   = 0.005;
  StopRule library_stop;    ///< used when oracle_rule is false
  bool warm_start  = false;
};

struct SampleRecord
{
  int t = 0;
  Vec x, u, y;
  double slack_max = 0.0;
  int iterations   = 0;
  bool converged   = false;
  double rel_err   = 0.0;
  double solve_ms  = 0.0;
};

struct ClosedLoopResult
{
  std::vector<SampleRecord> samples;
  bool aborted = false;
  std::string message;
  int factorizations = 0;  ///< factorizations made by the solver over the whole run

  double avg_iterations() const
  {
    if (samples.empty()) return 0.0;
    double s = 0.0;
    for (const auto& r : samples) s += r.iterations;
    return s / static_cast<double>(samples.size());
  }
  int max_iterations() const
  {
    int m = 0;
    for (const auto& r : samples) m = std::max(m, r.iterations);
    return m;
  }
};

inline ComposedProblem condense(const MpcInstance& inst, MpcForm form)
{
  return form == MpcForm::EqDual ? condense_eqdual(inst) : condense_ineqdual(inst);
}

/**
 * @brief Simulates the closed loop of inst under a scenario.
 *
 * Aborts with a partial log when a sample hits the iteration cap. Applied
 * inputs are clipped to the input bounds before propagating the plant.
 */
inline ClosedLoopResult closed_loop_run(const MpcInstance& inst_in, const LoopConfig& cfg, const Scenario& sc)
{
  MpcInstance inst = inst_in;
  inst.x0          = sc.x0;
  inst.y_ref       = sc.reference_at(0);
  const auto layout = mpc_layout(inst);
  const auto base   = condense(inst, cfg.form);

  std::unique_ptr<DualOracle> oracle;
  std::unique_ptr<AdmmSolver> admm;
  std::optional<SymMatrix> curv = cfg.curvature;
  if (cfg.method == Method::Fdgm) {
    if (!cfg.metric) fail(ErrorKind::InvalidArgument, "closed_loop_run: fdgm needs a metric");
    oracle = std::make_unique<DualOracle>(base);
    if (!curv) curv = detail::certifying_curvature(base);
    check_certificate(cfg.metric->L, *curv);
  } else {
    admm = std::make_unique<AdmmSolver>(base, cfg.rho);
  }
  const KktFactor* kkt_before = oracle ? oracle->kkt() : nullptr;

  ClosedLoopResult out;
  Vec x = sc.x0;
  std::optional<Vec> warm;
  for (int t = 0; t < sc.total(); ++t) {
    inst.x0    = x;
    inst.y_ref = sc.reference_at(t);
    const Vec zeta = mpc_cost(inst, layout).zeta;
    const Vec b    = mpc_rhs(inst, x);

    SampleRecord rec;
    rec.t = t;
    rec.x = x;
    std::optional<Vec> y_star;
    if (oracle) oracle->update(zeta, b);
    if (admm) admm->update(zeta, b);
    if (cfg.oracle_rule) {
      ComposedProblem cur = oracle ? oracle->problem() : base;
      if (!oracle) {
        cur.cost.zeta = zeta;
        if (auto* e = std::get_if<hterm::Equality>(&cur.h)) e->eq.b = b;
        else if (cur.eq) cur.eq->b = b;
      }
      y_star = reference_solution(cur).x;
    }

    const auto t0 = std::chrono::steady_clock::now();
    Vec y;
    if (oracle) {
      StopRule stop = cfg.oracle_rule ? StopRule{} : cfg.library_stop;
      stop.max_iter = cfg.max_iter;
      if (cfg.oracle_rule) {
        stop.y_ref   = y_star;
        stop.rel_tol = cfg.rel_tol;
      }
      FdgmOptions opt;
      opt.curvature = curv;
      if (cfg.warm_start && warm) opt.nu0 = warm;
      const auto r   = fdgm_run(*oracle, *cfg.metric, stop, opt);
      y              = r.y;
      rec.iterations = r.iterations;
      rec.converged  = r.converged();
      rec.rel_err    = r.rel_err;
      warm           = r.state.nu();
    } else {
      AdmmStop stop;
      stop.max_iter = cfg.max_iter;
      if (cfg.oracle_rule) {
        stop.y_ref   = y_star;
        stop.rel_tol = cfg.rel_tol;
      } else {
        stop.abs_tol = cfg.library_stop.eq_tol;
      }
      const auto r   = admm->run(stop);
      y              = r.y;
      rec.iterations = r.iterations;
      rec.converged  = r.converged();
      rec.rel_err    = r.rel_err;
    }
    rec.solve_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

    rec.u = y.segment(layout.u(0), layout.nu).cwiseMax(inst.u_lo).cwiseMin(inst.u_hi);
    rec.y = inst.plant.C * x;
    rec.slack_max = layout.n_slack ? y.tail(layout.n_slack).maxCoeff() : 0.0;
    out.samples.push_back(rec);
    if (!rec.converged) {
      out.aborted = true;
      out.message = cfg.name + ": iteration cap " + std::to_string(cfg.max_iter) + " reached at sample " +
                    std::to_string(t);
      break;
    }
    x = inst.plant.Phi * x + inst.plant.Gamma * rec.u;
  }
  if (oracle) {
    if (oracle->kkt() != kkt_before) fail(ErrorKind::InvalidArgument, "closed_loop_run: KKT factor changed");
    out.factorizations = oracle->factorizations();
  } else {
    out.factorizations = 1;
  }
  return out;
}

/// Columns t, x1..x_nx, u1..u_nu, y1..y_ny, slack_max, iterations.
inline void write_trajectory_csv(const ClosedLoopResult& r, std::ostream& os)
{
  if (r.samples.empty()) return;
  const auto& s0 = r.samples.front();
  os << "t";
  for (Eigen::Index i = 0; i < s0.x.size(); ++i) os << ",x" << i + 1;
  for (Eigen::Index i = 0; i < s0.u.size(); ++i) os << ",u" << i + 1;
  for (Eigen::Index i = 0; i < s0.y.size(); ++i) os << ",y" << i + 1;
  os << ",slack_max,iterations\n" << std::setprecision(10);
  for (const auto& s : r.samples) {
    os << s.t;
    for (Eigen::Index i = 0; i < s.x.size(); ++i) os << "," << s.x(i);
    for (Eigen::Index i = 0; i < s.u.size(); ++i) os << "," << s.u(i);
    for (Eigen::Index i = 0; i < s.y.size(); ++i) os << "," << s.y(i);
    os << "," << s.slack_max << "," << s.iterations << "\n";
  }
}

}  // namespace gfdgm

#endif  // GFDGM_CLOSED_LOOP_HPP
