#include "cctune/tuner.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace cctune {

std::string to_string(TuningMode mode) { return mode == TuningMode::single ? "single" : "joint"; }

std::string to_string(Termination t) {
  switch (t) {
    case Termination::eps_tolerance:
      return "eps_tolerance";
    case Termination::interval_collapse:
      return "interval_collapse";
    case Termination::iteration_cap:
      return "iteration_cap";
  }
  return "unknown";
}

TuningMode parse_mode(const std::string& text) {
  if (text == "single") return TuningMode::single;
  if (text == "joint") return TuningMode::joint;
  throw std::invalid_argument("unknown mode '" + text + "' (expected single or joint)");
}

std::vector<std::string> TuningConfig::warnings() const {
  std::vector<std::string> out;
  if (n_tuning_samples > 0 && gamma < 1.0 / static_cast<double>(n_tuning_samples) * (1.0 - 1e-12))
    out.push_back("gamma is finer than the 1/N resolution of the empirical violation frequency");
  return out;
}

std::pair<double, double> initial_bounds(double eps_des, TuningMode mode, std::size_t n_constraints) {
  if (!(eps_des > 0.0 && eps_des < 1.0)) throw std::invalid_argument("eps_des must lie in (0, 1)");
  double eps = eps_des;
  if (mode == TuningMode::joint) {
    if (n_constraints < 1) throw std::invalid_argument("joint mode needs at least one constraint");
    eps /= static_cast<double>(n_constraints);
  }
  return {0.0, std::sqrt((1.0 - eps) / eps)};
}

int bisection_iteration_bound(double s_lo, double s_hi, double width_tol) {
  const double ratio = (s_hi - s_lo) / width_tol;
  return ratio >= 1.0 ? static_cast<int>(std::floor(std::log2(ratio))) : 0;
}

BisectionOutcome bisect(const BisectionSettings& cfg, const std::function<Probe(double)>& probe) {
  BisectionOutcome out;
  out.lo = cfg.s_lo;
  out.hi = cfg.s_hi;

  auto record = [&](int iteration, double s, const Probe& p) {
    BisectionStep step{iteration, s, p, false, out.lo, out.hi};
    for (const auto& prev : out.steps) {
      if (!p.feasible || !prev.probe.feasible) {
        // Feasible sets shrink with s: infeasible below a feasible point is an anomaly.
        if (p.feasible != prev.probe.feasible && (p.feasible ? s > prev.s : s < prev.s)) step.non_monotone = true;
        continue;
      }
      if ((prev.s < s && prev.probe.eps.count < p.eps.count) || (prev.s > s && prev.probe.eps.count > p.eps.count))
        step.non_monotone = true;
    }
    out.steps.push_back(step);
  };

  // Lower-bound check: s_lo carries the largest violation we can expect.
  const Probe bottom = probe(out.lo);
  if (!bottom.feasible || bottom.eps.compare(cfg.eps_des) <= 0) {
    out.terminated_by = bottom.feasible && bottom.eps.within(cfg.eps_des, cfg.gamma) ? Termination::eps_tolerance
                                                                                     : Termination::interval_collapse;
    out.hi = out.lo;
    record(0, out.lo, bottom);
    return out;
  }
  record(0, out.lo, bottom);

  while (true) {
    if (out.iterations >= cfg.max_iters) {
      out.terminated_by = Termination::iteration_cap;
      break;
    }
    if ((out.hi - out.lo) / 2.0 < cfg.width_tol) {
      out.terminated_by = Termination::interval_collapse;
      break;
    }
    ++out.iterations;
    const double s = (out.hi - out.lo) / 2.0 + out.lo;
    const Probe p = probe(s);
    if (!p.feasible) {
      out.hi = s;
      record(out.iterations, s, p);
      continue;
    }
    if (p.eps.within(cfg.eps_des, cfg.gamma)) {
      record(out.iterations, s, p);
      out.terminated_by = Termination::eps_tolerance;
      break;
    }
    if (p.eps.compare(cfg.eps_des) < 0)
      out.hi = s;  // too conservative
    else
      out.lo = s;
    record(out.iterations, s, p);
  }
  return out;
}

namespace {

struct Candidate {
  DispatchSolution dispatch;
  ViolationReport report;
  bool feasible = false;
};

Frequency mode_frequency(const ViolationReport& r, TuningMode mode) {
  return mode == TuningMode::single ? r.single() : r.joint();
}

}  // namespace

TuningResult tune(const TuningConfig& cfg, const GridCase& grid, const PtdfMatrix& ptdf,
                  const ParticipationFactors& alpha, const ConstraintCatalog& catalog,
                  const SampleSet& tuning_samples) {
  auto [lo, hi] = initial_bounds(cfg.eps_des, cfg.mode, catalog.size());
  if (cfg.s_min_init) lo = *cfg.s_min_init;
  if (cfg.s_max_init) hi = *cfg.s_max_init;
  if (!(lo >= 0.0 && hi >= lo)) throw std::invalid_argument("initial bracket for s is invalid");

  const ViolationEvaluator evaluator(grid, ptdf, alpha, catalog);
  std::vector<std::pair<double, Candidate>> evaluated;
  std::vector<TraceEntry> trace;

  auto run_candidate = [&](double s) {
    Candidate c;
    const TightenedQP qp = build_qp(grid, ptdf, catalog, s);
    c.dispatch = solve_dispatch(qp, alpha, cfg.solver);
    if (c.dispatch.status == qp::Status::max_iterations) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "QP solver did not converge at s = %.6f", s);
      throw TuningError(buf, trace);
    }
    c.feasible = c.dispatch.status == qp::Status::optimal;
    if (c.feasible) c.report = evaluator.evaluate(c.dispatch.p_g, tuning_samples, cfg.jobs);
    return c;
  };

  BisectionSettings settings{cfg.eps_des, cfg.gamma, cfg.width_tol, cfg.max_bisection_iters, lo, hi};
  const auto outcome = bisect(settings, [&](double s) {
    Candidate c = run_candidate(s);
    Probe p{c.feasible, c.feasible ? mode_frequency(c.report, cfg.mode) : Frequency{0, tuning_samples.size()}};
    TraceEntry e;
    e.iteration = static_cast<int>(evaluated.size());
    e.s = s;
    e.feasible = c.feasible;
    if (c.feasible) {
      e.eps_single = c.report.single();
      e.eps_joint = c.report.joint();
      e.cost = c.dispatch.cost;
    }
    trace.push_back(e);
    evaluated.emplace_back(s, std::move(c));
    return p;
  });
  for (std::size_t k = 0; k < trace.size(); ++k) {
    trace[k].iteration = outcome.steps[k].iteration;
    trace[k].non_monotone = outcome.steps[k].non_monotone;
  }

  TuningResult result;
  result.iterations = outcome.iterations;
  result.terminated_by = outcome.terminated_by;
  result.s_min_init = lo;
  result.s_max_init = hi;

  auto conservative = [&](const Candidate& c) {
    return c.feasible && mode_frequency(c.report, cfg.mode).compare(cfg.eps_des) <= 0;
  };
  const Candidate* chosen = nullptr;
  double chosen_s = 0.0;
  if (!evaluated.empty() && conservative(evaluated.back().second)) {
    chosen = &evaluated.back().second;
    chosen_s = evaluated.back().first;
  } else {
    for (const auto& [s, c] : evaluated) {
      if (conservative(c) && (!chosen || s < chosen_s)) {
        chosen = &c;
        chosen_s = s;
      }
    }
  }

  Candidate anchor;
  if (!chosen) {
    if (evaluated.empty() || !evaluated.front().second.feasible)
      throw TuningError("no feasible conservative anchor: the program is infeasible at s = " +
                            std::to_string(lo),
                        trace);
    anchor = run_candidate(outcome.hi);
    if (!conservative(anchor))
      throw TuningError("no feasible conservative anchor within [" + std::to_string(lo) + ", " +
                            std::to_string(hi) + "]",
                        trace);
    chosen = &anchor;
    chosen_s = outcome.hi;
    result.anchored = true;
  }

  result.s_final = chosen_s;
  result.dispatch = chosen->dispatch;
  result.report = chosen->report;
  result.eps_obs = mode_frequency(chosen->report, cfg.mode);
  result.trace = std::move(trace);
  return result;
}

std::string trace_csv(const std::vector<TraceEntry>& trace) {
  std::ostringstream out;
  out << "iteration,s_k,feasible,eps_obs_single,eps_obs_joint,cost\n";
  char buf[256];
  for (const auto& e : trace) {
    if (e.feasible)
      std::snprintf(buf, sizeof buf, "%d,%.12g,1,%.12g,%.12g,%.12g\n", e.iteration, e.s, e.eps_single.value(),
                    e.eps_joint.value(), e.cost);
    else
      std::snprintf(buf, sizeof buf, "%d,%.12g,0,,,\n", e.iteration, e.s);
    out << buf;
  }
  return out.str();
}

}  // namespace cctune
