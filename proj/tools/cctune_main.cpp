// cctune: command-line front end for the chance-constrained dispatch pipeline.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cctune/experiment.hpp"
#include "cctune/rng.hpp"
#include "cctune/violation.hpp"

#ifndef CCTUNE_DEFAULT_CONFIG
#define CCTUNE_DEFAULT_CONFIG "configs/table1.cfg"
#endif

using namespace cctune;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitSolve = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config = CCTUNE_DEFAULT_CONFIG;
  std::string eps;
  std::string mode;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "csv";
  std::optional<int> jobs;
  std::string dist;
  int replication = 0;
};

ExperimentConfig load_config(const Common& c) {
  ExperimentConfig cfg = ExperimentConfig::load(c.config);
  if (!c.eps.empty()) cfg.eps = Config::parse("eps = " + c.eps).get_doubles("eps");
  if (!c.mode.empty()) cfg.modes = {parse_mode(c.mode)};
  if (c.seed) cfg.seed = *c.seed;
  if (c.jobs) cfg.jobs = std::max(1, *c.jobs);
  return cfg;
}

const NamedDistribution& pick_distribution(const ExperimentConfig& cfg, const std::string& name) {
  if (name.empty()) return cfg.distributions.front();
  for (const auto& d : cfg.distributions)
    if (d.name == name) return d;
  throw UsageError("unknown distribution '" + name + "'");
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

std::string out_file(const Common& c, const std::string& name) {
  if (c.out.empty()) return {};
  std::filesystem::create_directories(c.out);
  return (std::filesystem::path(c.out) / name).string();
}

// Everything a single-replication command needs.
struct Session {
  ExperimentConfig cfg;
  PreparedCase pc;
  const NamedDistribution* dist = nullptr;
  UncertaintyModel model;
  SampleSet tuning;
  ConstraintCatalog catalog;
};

Session open_session(const Common& c) {
  Session s{load_config(c), {}, nullptr, {}, {}, {}};
  s.pc = prepare_case(s.cfg);
  s.dist = &pick_distribution(s.cfg, c.dist);
  s.model = UncertaintyModel::on_uncertain_buses(s.pc.grid, s.dist->spec);
  s.tuning = sample(s.model, s.cfg.n_tuning, tuning_seed(s.cfg, c.replication), s.cfg.jobs);
  CatalogOptions opts;
  opts.include_degenerate_constraints = s.cfg.include_degenerate_constraints;
  s.catalog = build_catalog(s.pc.grid, s.pc.ptdf, s.pc.alpha, moments_for(*s.dist, s.model, s.tuning), opts);
  return s;
}

int cmd_parse(const std::string& case_path, bool rts, const std::string& out) {
  GridCase grid = load_case_file(case_path);
  if (rts) grid = apply_rts_modifications(grid);
  validate_case(grid);
  std::printf("buses %zu, lines %zu, generating buses %zu\n", grid.bus_count(), grid.line_count(),
              static_cast<std::size_t>(std::count_if(grid.generators.begin(), grid.generators.end(),
                                                     [](const Generator& g) { return g.p_max > 0.0; })));
  std::printf("total load %.4f MW, total capacity %.4f MW\n", grid.total_load() * grid.base_mva,
              grid.total_capacity() * grid.base_mva);
  if (!out.empty()) emit(serialize_case(grid), out);
  return kExitOk;
}

int cmd_ptdf(const Common& c) {
  const auto pc = prepare_case(load_config(c));
  std::ostringstream csv;
  char buf[32];
  for (Eigen::Index k = 0; k < pc.ptdf.entries.rows(); ++k) {
    for (Eigen::Index j = 0; j < pc.ptdf.entries.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.12g", pc.ptdf.entries(k, j));
      csv << (j ? "," : "") << buf;
    }
    csv << '\n';
  }
  emit(csv.str(), out_file(c, "ptdf.csv"));
  return kExitOk;
}

int cmd_sample(const Common& c, std::int64_t n) {
  const auto cfg = load_config(c);
  const auto pc = prepare_case(cfg);
  const auto model = UncertaintyModel::on_uncertain_buses(pc.grid, pick_distribution(cfg, c.dist).spec);
  const auto seed = c.seed ? *c.seed : tuning_seed(cfg, c.replication);
  const SampleSet set = sample(model, n, seed, cfg.jobs);
  std::ostringstream csv;
  csv << "# rng " << kRngName << " seed " << seed << "\n";
  for (std::size_t j = 0; j < set.support.size(); ++j) csv << (j ? "," : "") << "bus" << set.support[j] + 1 << "_mw";
  csv << '\n';
  char buf[32];
  for (Eigen::Index i = 0; i < set.size(); ++i) {
    for (std::size_t j = 0; j < set.support.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.12g", set.samples(i, set.support[j]) * pc.grid.base_mva);
      csv << (j ? "," : "") << buf;
    }
    csv << '\n';
  }
  emit(csv.str(), out_file(c, "samples.csv"));
  return kExitOk;
}

int cmd_solve(const Common& c, double s, const std::string& lp_path) {
  const Session ss = open_session(c);
  const TightenedQP qp = build_qp(ss.pc.grid, ss.pc.ptdf, ss.catalog, s);
  if (!lp_path.empty()) emit(to_lp_format(qp), lp_path);
  const DispatchSolution sol = solve_dispatch(qp, ss.pc.alpha, {});
  std::printf("status %s, iterations %d\n", qp::to_string(sol.status).c_str(), sol.raw.iterations);
  if (sol.status != qp::Status::optimal) return kExitSolve;
  std::printf("cost %.6f\n", sol.cost);
  for (Eigen::Index i = 0; i < sol.p_g.size(); ++i)
    if (ss.pc.grid.generators[i].p_max > 0.0)
      std::printf("bus %ld p_g %.6f MW alpha %.6f\n", static_cast<long>(i + 1), sol.p_g(i) * ss.pc.grid.base_mva,
                  sol.alpha(i));
  return kExitOk;
}

TuningConfig tuning_config(const ExperimentConfig& cfg) {
  TuningConfig tc;
  tc.eps_des = cfg.eps.front();
  tc.mode = cfg.modes.front();
  tc.gamma = cfg.gamma;
  tc.n_tuning_samples = cfg.n_tuning;
  tc.width_tol = cfg.width_tol;
  tc.max_bisection_iters = cfg.max_bisection_iters;
  tc.jobs = cfg.jobs;
  return tc;
}

int cmd_tune(const Common& c) {
  const Session ss = open_session(c);
  const TuningConfig tc = tuning_config(ss.cfg);
  for (const auto& w : tc.warnings()) std::fprintf(stderr, "warning: %s\n", w.c_str());
  try {
    const TuningResult res = tune(tc, ss.pc.grid, ss.pc.ptdf, ss.pc.alpha, ss.catalog, ss.tuning);
    emit(trace_csv(res.trace), out_file(c, "trace.csv"));
    std::fprintf(stderr, "s %.6f, iterations %d, eps_obs %.6f, cost %.4f, terminated by %s\n", res.s_final,
                 res.iterations, res.eps_obs.value(), res.dispatch.cost, to_string(res.terminated_by).c_str());
  } catch (const TuningError& e) {
    std::cerr << trace_csv(e.trace());
    throw;
  }
  return kExitOk;
}

int cmd_evaluate(const Common& c, double s, bool use_oos) {
  const Session ss = open_session(c);
  const DispatchSolution sol = solve_dispatch(build_qp(ss.pc.grid, ss.pc.ptdf, ss.catalog, s), ss.pc.alpha, {});
  if (sol.status != qp::Status::optimal) {
    std::fprintf(stderr, "error: tightened program is %s at s = %g\n", qp::to_string(sol.status).c_str(), s);
    return kExitSolve;
  }
  const auto seed = use_oos ? oos_seed(ss.cfg, c.replication) : tuning_seed(ss.cfg, c.replication);
  const SampleSet set = use_oos ? sample(ss.model, ss.cfg.n_oos, seed, ss.cfg.jobs) : ss.tuning;
  const ViolationEvaluator ev(ss.pc.grid, ss.pc.ptdf, ss.pc.alpha, ss.catalog);
  const ViolationReport rep = ev.evaluate(sol.p_g, set, ss.cfg.jobs);
  emit(to_json(rep, ss.catalog, seed).dump(2) + "\n", out_file(c, "violations.json"));
  return kExitOk;
}

int cmd_experiment(const Common& c) {
  const auto cfg = load_config(c);
  if (c.format != "csv" && c.format != "json") throw UsageError("--format must be csv or json");
  const auto report = run_experiment(cfg, [](const std::string& msg) { std::fprintf(stderr, "%s\n", msg.c_str()); });
  for (const auto& w : report.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  const auto format = c.format == "json" ? ReportFormat::json : ReportFormat::csv;
  if (c.out.empty())
    std::cout << (format == ReportFormat::csv ? report_csv(report) : report_json(report).dump(2) + "\n");
  else
    std::fprintf(stderr, "wrote %s\n", write_report(report, format, c.out).string().c_str());
  bool any_failed = false;
  for (const auto& r : report.rows) any_failed = any_failed || !r.ok;
  return any_failed ? kExitSolve : kExitOk;
}

void add_common(CLI::App* sub, Common& c, bool with_format = false) {
  sub->add_option("--config", c.config, "experiment config file");
  sub->add_option("--eps", c.eps, "comma-separated eps_des list");
  sub->add_option("--mode", c.mode, "single or joint")->check(CLI::IsMember({"single", "joint"}));
  sub->add_option("--seed", c.seed, "base seed");
  sub->add_option("--out", c.out, "output directory");
  sub->add_option("--jobs", c.jobs, "worker threads");
  sub->add_option("--dist", c.dist, "distribution name from the config");
  sub->add_option("--replication", c.replication, "replication index for seed derivation");
  if (with_format) sub->add_option("--format", c.format, "csv or json");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chance-constrained DC-OPF with bisection tuning of the safety parameter"};
  app.require_subcommand(1);
  Common common;

  std::string case_path;
  bool rts = false;
  std::string parse_out;
  auto* parse = app.add_subcommand("parse", "validate a case file");
  parse->add_option("case", case_path, "case file")->required();
  parse->add_flag("--rts", rts, "apply the RTS study modifications");
  parse->add_option("--out", parse_out, "write the normalized case here");

  auto* ptdf = app.add_subcommand("ptdf", "print the PTDF matrix as CSV");
  add_common(ptdf, common);

  std::int64_t n_samples = 1000;
  auto* samp = app.add_subcommand("sample", "draw uncertainty samples (MW) as CSV");
  add_common(samp, common);
  samp->add_option("--n", n_samples, "number of samples");

  double s_value = 0.0;
  std::string lp_path;
  auto* solve = app.add_subcommand("solve", "solve the tightened program at a fixed s");
  add_common(solve, common);
  solve->add_option("--s", s_value, "safety parameter")->required();
  solve->add_option("--lp", lp_path, "write the program in LP format");

  auto* tune_cmd = app.add_subcommand("tune", "bisection-tune s for one eps and mode; prints the trace CSV");
  add_common(tune_cmd, common);

  bool use_oos = false;
  auto* eval = app.add_subcommand("evaluate", "violation report (JSON) for the dispatch at a fixed s");
  add_common(eval, common);
  eval->add_option("--s", s_value, "safety parameter")->required();
  eval->add_flag("--oos", use_oos, "evaluate on the out-of-sample set");

  auto* exp = app.add_subcommand("experiment", "replicated tune/evaluate runs with averaged report");
  add_common(exp, common, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*parse) return cmd_parse(case_path, rts, parse_out);
    if (*ptdf) return cmd_ptdf(common);
    if (*samp) return cmd_sample(common, n_samples);
    if (*solve) return cmd_solve(common, s_value, lp_path);
    if (*tune_cmd) return cmd_tune(common);
    if (*eval) return cmd_evaluate(common, s_value, use_oos);
    if (*exp) return cmd_experiment(common);
  } catch (const TuningError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitSolve;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}
