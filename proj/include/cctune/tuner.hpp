#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cctune/grid.hpp"
#include "cctune/network.hpp"
#include "cctune/qp_solver.hpp"
#include "cctune/reformulation.hpp"
#include "cctune/uncertainty.hpp"
#include "cctune/violation.hpp"

namespace cctune {

enum class TuningMode { single, joint };
enum class Termination { eps_tolerance, interval_collapse, iteration_cap };

std::string to_string(TuningMode mode);
std::string to_string(Termination t);
TuningMode parse_mode(const std::string& text);

struct TuningConfig {
  double eps_des = 0.1;
  TuningMode mode = TuningMode::single;
  double gamma = 1e-4;
  std::int64_t n_tuning_samples = 10000;
  int max_bisection_iters = 60;
  double width_tol = 1e-6;
  std::optional<double> s_min_init;
  std::optional<double> s_max_init;
  qp::Options solver;
  int jobs = 1;

  /// Non-fatal configuration issues (e.g. gamma finer than 1/N).
  std::vector<std::string> warnings() const;
};

/// Cantelli bound on s for the single mode, combined with a Boole split over
/// `n_constraints` rows in the joint mode. Returns (0, s_max).
std::pair<double, double> initial_bounds(double eps_des, TuningMode mode, std::size_t n_constraints);

/// Outcome of evaluating one candidate s.
struct Probe {
  bool feasible = false;
  Frequency eps;  // violation frequency for the tuned mode
};

struct BisectionSettings {
  double eps_des = 0.1;
  double gamma = 1e-4;
  double width_tol = 1e-6;
  int max_iters = 60;
  double s_lo = 0.0;
  double s_hi = 1.0;
};

struct BisectionStep {
  int iteration = 0;  // 0 for the lower-bound check, then 1, 2, ...
  double s = 0.0;
  Probe probe;
  bool non_monotone = false;  // violation rose relative to a smaller s
  double lo = 0.0;            // bracket after the update
  double hi = 0.0;
};

struct BisectionOutcome {
  std::vector<BisectionStep> steps;
  Termination terminated_by = Termination::iteration_cap;
  int iterations = 0;
  double lo = 0.0;
  double hi = 0.0;
};

/// Bisection on s against any monotone-ish violation oracle. The lower end
/// is probed first; if it already meets eps_des the search stops there.
/// Midpoints are taken while the bracket can still be halved without
/// dropping below width_tol. Infeasible midpoints contract the upper end.
BisectionOutcome bisect(const BisectionSettings& settings, const std::function<Probe(double)>& probe);

/// Largest number of midpoint evaluations bisect can perform before the
/// interval-width stop.
int bisection_iteration_bound(double s_lo, double s_hi, double width_tol);

struct TraceEntry {
  int iteration = 0;
  double s = 0.0;
  bool feasible = false;
  Frequency eps_single;
  Frequency eps_joint;
  double cost = 0.0;
  bool non_monotone = false;
};

struct TuningResult {
  double s_final = 0.0;
  DispatchSolution dispatch;
  ViolationReport report;  // on the tuning samples, for the returned dispatch
  Frequency eps_obs;       // in the tuned mode
  int iterations = 0;
  std::vector<TraceEntry> trace;
  Termination terminated_by = Termination::iteration_cap;
  double s_min_init = 0.0;
  double s_max_init = 0.0;
  bool anchored = false;  // returned solution is the upper bracket end, not a trace entry
};

class TuningError : public std::runtime_error {
 public:
  TuningError(const std::string& what, std::vector<TraceEntry> trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const std::vector<TraceEntry>& trace() const { return trace_; }

 private:
  std::vector<TraceEntry> trace_;
};

/// Tunes s so the tightened program's dispatch meets eps_des on the tuning
/// samples. The same samples are reused at every step. The returned dispatch
/// is the terminating iterate when it satisfies eps_obs <= eps_des, and
/// otherwise the smallest conservative s seen.
TuningResult tune(const TuningConfig& cfg, const GridCase& grid, const PtdfMatrix& ptdf,
                  const ParticipationFactors& alpha, const ConstraintCatalog& catalog,
                  const SampleSet& tuning_samples);

/// iteration,s_k,feasible,eps_obs_single,eps_obs_joint,cost
std::string trace_csv(const std::vector<TraceEntry>& trace);

}  // namespace cctune
