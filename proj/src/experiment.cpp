#include "cctune/experiment.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include "cctune/rng.hpp"
#include "cctune/violation.hpp"

namespace cctune {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double inv_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("inv_normal_cdf: p must lie in (0, 1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01, -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement against the erfc-based CDF.
  for (int k = 0; k < 2; ++k) {
    const double e = x > 0.0 ? (1.0 - p) - 0.5 * std::erfc(x / std::numbers::sqrt2) : normal_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

const std::set<std::string> kTopLevelKeys = {
    "case",  "apply_rts_modifications", "uncertain_buses", "distributions", "modes",
    "eps",   "replications",            "n_tuning",        "n_oos",         "gamma",
    "seed",  "width_tol",               "max_bisection_iters", "slack",    "include_degenerate_constraints",
    "oos_stream", "jobs"};

const std::set<std::string> kDistFields = {"type",     "std_mw",   "rho",        "cov_mw2", "mean_mw",
                                           "lower_mw", "upper_mw", "components", "weights", "moments"};

Eigen::VectorXd broadcast(const std::vector<double>& values, Eigen::Index k, const std::string& key) {
  if (values.size() == 1) return Eigen::VectorXd::Constant(k, values.front());
  if (static_cast<Eigen::Index>(values.size()) != k)
    throw ConfigError(key + ": expected 1 or " + std::to_string(k) + " values, got " +
                      std::to_string(values.size()));
  return Eigen::Map<const Eigen::VectorXd>(values.data(), k);
}

DistributionSpec parse_spec(const Config& cfg, const std::string& name, Eigen::Index k,
                            std::set<std::string>& used, int depth) {
  if (depth > 1) throw ConfigError("dist." + name + ": mixtures cannot be nested");
  used.insert(name);
  const std::string prefix = "dist." + name + ".";
  const std::string type = cfg.get_string(prefix + "type");
  if (type == "gaussian") {
    GaussianSpec g;
    if (cfg.has(prefix + "cov_mw2")) {
      const auto flat = cfg.get_doubles(prefix + "cov_mw2");
      if (static_cast<Eigen::Index>(flat.size()) != k * k)
        throw ConfigError(prefix + "cov_mw2: expected " + std::to_string(k * k) + " values");
      g.covariance_mw2 = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          flat.data(), k, k);
      g.mean_mw = Eigen::VectorXd::Zero(k);
    } else {
      const auto sd = broadcast(cfg.get_doubles(prefix + "std_mw"), k, prefix + "std_mw");
      g = GaussianSpec::from_std(std::vector<double>(sd.data(), sd.data() + sd.size()),
                                 cfg.get_double(prefix + "rho", 0.0));
    }
    if (cfg.has(prefix + "mean_mw")) g.mean_mw = broadcast(cfg.get_doubles(prefix + "mean_mw"), k, prefix + "mean_mw");
    return DistributionSpec{g};
  }
  if (type == "uniform") {
    UniformBoxSpec u;
    u.lower_mw = broadcast(cfg.get_doubles(prefix + "lower_mw"), k, prefix + "lower_mw");
    u.upper_mw = broadcast(cfg.get_doubles(prefix + "upper_mw"), k, prefix + "upper_mw");
    return DistributionSpec{u};
  }
  if (type == "mixture") {
    MixtureSpec mix;
    for (const auto& comp : cfg.get_strings(prefix + "components"))
      mix.components.push_back(parse_spec(cfg, comp, k, used, depth + 1));
    if (mix.components.empty()) throw ConfigError(prefix + "components: empty mixture");
    if (cfg.has(prefix + "weights"))
      mix.weights = cfg.get_doubles(prefix + "weights");
    else
      mix.weights.assign(mix.components.size(), 1.0 / static_cast<double>(mix.components.size()));
    return DistributionSpec{mix};
  }
  throw ConfigError(prefix + "type: unknown distribution type '" + type + "'");
}

}  // namespace

ExperimentConfig ExperimentConfig::from_config(const Config& cfg) {
  for (const auto& key : cfg.keys()) {
    if (kTopLevelKeys.count(key)) continue;
    const auto last = key.rfind('.');
    if (key.rfind("dist.", 0) == 0 && last > 5 && kDistFields.count(key.substr(last + 1))) continue;
    throw ConfigError("unknown config key '" + key + "'");
  }

  ExperimentConfig out;
  out.case_path = cfg.get_path("case");
  out.rts_modifications = cfg.get_bool("apply_rts_modifications", out.rts_modifications);
  if (cfg.has("uncertain_buses"))
    for (double b : cfg.get_doubles("uncertain_buses")) out.uncertain_buses.push_back(static_cast<int>(b));
  if (cfg.has("modes")) {
    out.modes.clear();
    for (const auto& m : cfg.get_strings("modes")) out.modes.push_back(parse_mode(m));
  }
  if (cfg.has("eps")) out.eps = cfg.get_doubles("eps");
  out.replications = static_cast<int>(cfg.get_int("replications", out.replications));
  out.n_tuning = cfg.get_int("n_tuning", out.n_tuning);
  out.n_oos = cfg.get_int("n_oos", out.n_oos);
  out.gamma = cfg.get_double("gamma", out.gamma);
  out.seed = cfg.get_u64("seed", out.seed);
  out.width_tol = cfg.get_double("width_tol", out.width_tol);
  out.max_bisection_iters = static_cast<int>(cfg.get_int("max_bisection_iters", out.max_bisection_iters));
  out.slack_bus = static_cast<int>(cfg.get_int("slack", out.slack_bus));
  out.include_degenerate_constraints =
      cfg.get_bool("include_degenerate_constraints", out.include_degenerate_constraints);
  const auto stream = cfg.get_string("oos_stream", "separate");
  if (stream == "separate")
    out.oos_stream = OosStream::separate;
  else if (stream == "shared")
    out.oos_stream = OosStream::shared;
  else
    throw ConfigError("oos_stream: expected separate or shared, got '" + stream + "'");
  out.jobs = static_cast<int>(cfg.get_int("jobs", out.jobs));

  // Distribution dimensions follow the uncertain buses of the prepared case.
  const auto k = static_cast<Eigen::Index>(prepare_case(out).grid.uncertain_buses().size());
  std::set<std::string> used;
  for (const auto& name : cfg.get_strings("distributions")) {
    NamedDistribution nd;
    nd.name = name;
    nd.spec = parse_spec(cfg, name, k, used, 0);
    nd.spec.validate();
    const std::string key = "dist." + name + ".moments";
    const auto src = cfg.get_string(key, nd.gaussian() ? "analytic" : "empirical");
    if (src == "analytic")
      nd.moments = MomentSource::analytic;
    else if (src == "empirical")
      nd.moments = MomentSource::empirical;
    else
      throw ConfigError(key + ": expected analytic or empirical, got '" + src + "'");
    out.distributions.push_back(std::move(nd));
  }
  for (const auto& key : cfg.keys()) {
    if (key.rfind("dist.", 0) != 0) continue;
    const auto name = key.substr(5, key.rfind('.') - 5);
    if (!used.count(name)) throw ConfigError("config key '" + key + "' names an unused distribution");
  }
  return out;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  return from_config(Config::load(path));
}

PreparedCase prepare_case(const ExperimentConfig& cfg) {
  GridCase grid = load_case_file(cfg.case_path.string());
  if (cfg.rts_modifications) grid = apply_rts_modifications(grid);
  if (!cfg.uncertain_buses.empty()) grid = with_uncertain_buses(std::move(grid), cfg.uncertain_buses);
  validate_case(grid);
  PreparedCase pc{grid, compute_ptdf(grid, cfg.slack_bus), participation_factors(grid)};
  return pc;
}

std::uint64_t tuning_seed(const ExperimentConfig& cfg, int replication) {
  return derive_seed(cfg.seed, 1, static_cast<std::uint64_t>(replication));
}

std::uint64_t oos_seed(const ExperimentConfig& cfg, int replication) {
  return cfg.oos_stream == OosStream::shared ? tuning_seed(cfg, replication)
                                             : derive_seed(cfg.seed, 2, static_cast<std::uint64_t>(replication));
}

MomentEstimate moments_for(const NamedDistribution& dist, const UncertaintyModel& model, const SampleSet& tuning) {
  return dist.moments == MomentSource::analytic ? analytic_moments(model) : empirical_moments(tuning);
}

// ---------------------------------------------------------------------------
// Running

const AverageRow* ExperimentReport::average(const std::string& mode, const std::string& distribution,
                                            double eps_des) const {
  for (const auto& a : averages)
    if (a.mode == mode && a.distribution == distribution && a.eps_des == eps_des) return &a;
  return nullptr;
}

std::vector<const ReplicationRow*> ExperimentReport::block(const std::string& mode, const std::string& distribution,
                                                           double eps_des) const {
  std::vector<const ReplicationRow*> out;
  for (const auto& r : rows)
    if (r.mode == mode && r.distribution == distribution && r.eps_des == eps_des) out.push_back(&r);
  return out;
}

std::vector<AverageRow> compute_averages(const std::vector<ReplicationRow>& rows) {
  std::vector<AverageRow> out;
  std::vector<std::vector<const ReplicationRow*>> members;
  for (const auto& r : rows) {
    std::size_t g = 0;
    while (g < out.size() &&
           !(out[g].mode == r.mode && out[g].distribution == r.distribution && out[g].eps_des == r.eps_des))
      ++g;
    if (g == out.size()) {
      AverageRow a;
      a.mode = r.mode;
      a.distribution = r.distribution;
      a.eps_des = r.eps_des;
      out.push_back(a);
      members.emplace_back();
    }
    if (r.ok) members[g].push_back(&r);
  }
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t g = 0; g < out.size(); ++g) {
    auto& a = out[g];
    const auto& ms = members[g];
    a.replications = static_cast<int>(ms.size());
    auto mean = [&](auto field) {
      if (ms.empty()) return nan;
      double total = 0.0;
      for (const auto* r : ms) total += field(*r);
      return total / static_cast<double>(ms.size());
    };
    a.iterations = mean([](const ReplicationRow& r) { return static_cast<double>(r.iterations); });
    a.cost = mean([](const ReplicationRow& r) { return r.cost; });
    a.s = mean([](const ReplicationRow& r) { return r.s; });
    a.eps_obs_single = mean([](const ReplicationRow& r) { return r.eps_obs_single; });
    a.eps_oos_single = mean([](const ReplicationRow& r) { return r.eps_oos_single; });
    a.eps_obs_joint = mean([](const ReplicationRow& r) { return r.eps_obs_joint; });
    a.eps_oos_joint = mean([](const ReplicationRow& r) { return r.eps_oos_joint; });
    bool all_true = !ms.empty();
    for (const auto* r : ms) all_true = all_true && r->s_true.has_value();
    if (all_true) a.s_true = mean([](const ReplicationRow& r) { return *r.s_true; });
  }
  return out;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress) {
  if (cfg.replications < 1) throw std::invalid_argument("replications must be at least 1");
  if (cfg.n_tuning < 1 || cfg.n_oos < 1) throw std::invalid_argument("sample counts must be positive");
  if (cfg.distributions.empty()) throw std::invalid_argument("no distributions configured");
  if (cfg.modes.empty() || cfg.eps.empty()) throw std::invalid_argument("no modes or eps levels configured");
  for (double e : cfg.eps)
    if (!(e > 0.0 && e < 1.0)) throw std::invalid_argument("eps_des must lie in (0, 1)");

  const PreparedCase pc = prepare_case(cfg);

  ExperimentReport report;
  report.seed = cfg.seed;
  if (cfg.n_oos < cfg.n_tuning) report.warnings.push_back("n_oos is smaller than n_tuning");

  TuningConfig base;
  base.gamma = cfg.gamma;
  base.n_tuning_samples = cfg.n_tuning;
  base.width_tol = cfg.width_tol;
  base.max_bisection_iters = cfg.max_bisection_iters;
  for (auto& w : base.warnings()) report.warnings.push_back(w);

  const std::size_t n_dist = cfg.distributions.size();
  const auto n_rep = static_cast<std::size_t>(cfg.replications);
  const std::size_t per_task = cfg.modes.size() * cfg.eps.size();
  const std::size_t n_tasks = n_dist * n_rep;
  std::vector<std::vector<ReplicationRow>> results(n_tasks);

  const int threads = std::max(1, std::min(cfg.jobs, static_cast<int>(n_tasks)));
  const int inner_jobs = std::max(1, cfg.jobs / threads);
  std::mutex progress_mutex;

  auto run_task = [&](std::size_t task) {
    const auto& dist = cfg.distributions[task / n_rep];
    const int r = static_cast<int>(task % n_rep);
    auto& rows = results[task];
    rows.reserve(per_task);
    for (auto mode : cfg.modes)
      for (double eps : cfg.eps) {
        ReplicationRow row;
        row.mode = to_string(mode);
        row.distribution = dist.name;
        row.eps_des = eps;
        row.replication = r;
        if (dist.gaussian() && mode == TuningMode::single) row.s_true = inv_normal_cdf(1.0 - eps);
        rows.push_back(row);
      }

    auto fail_all = [&](const std::string& what) {
      for (auto& row : rows) {
        row.ok = false;
        row.error = what;
      }
    };
    try {
      const auto model = UncertaintyModel::on_uncertain_buses(pc.grid, dist.spec);
      const SampleSet tuning = sample(model, cfg.n_tuning, tuning_seed(cfg, r), inner_jobs);
      const SampleSet oos = sample(model, cfg.n_oos, oos_seed(cfg, r), inner_jobs);
      const auto moments = moments_for(dist, model, tuning);
      CatalogOptions opts;
      opts.include_degenerate_constraints = cfg.include_degenerate_constraints;
      const auto catalog = build_catalog(pc.grid, pc.ptdf, pc.alpha, moments, opts);
      const ViolationEvaluator evaluator(pc.grid, pc.ptdf, pc.alpha, catalog);

      std::size_t k = 0;
      for (auto mode : cfg.modes)
        for (double eps : cfg.eps) {
          auto& row = rows[k++];
          try {
            TuningConfig tc = base;
            tc.mode = mode;
            tc.eps_des = eps;
            tc.jobs = inner_jobs;
            const TuningResult res = tune(tc, pc.grid, pc.ptdf, pc.alpha, catalog, tuning);
            const ViolationReport out = evaluator.evaluate(res.dispatch.p_g, oos, inner_jobs);
            row.iterations = res.iterations;
            row.cost = res.dispatch.cost;
            row.s = res.s_final;
            row.eps_obs_single = res.report.eps_single();
            row.eps_obs_joint = res.report.eps_joint();
            row.eps_oos_single = out.eps_single();
            row.eps_oos_joint = out.eps_joint();
            row.terminated_by = to_string(res.terminated_by);
            row.s_max_init = res.s_max_init;
            const TraceEntry& last = res.trace.back();
            row.s_terminal = last.s;
            row.eps_obs_terminal = !last.feasible                ? std::numeric_limits<double>::quiet_NaN()
                                   : mode == TuningMode::single ? last.eps_single.value()
                                                                : last.eps_joint.value();
            for (const auto& t : res.trace) row.non_monotone_events += t.non_monotone ? 1 : 0;
          } catch (const std::exception& e) {
            row.ok = false;
            row.error = e.what();
          }
        }
    } catch (const std::exception& e) {
      fail_all(e.what());
    }
    if (progress) {
      const std::lock_guard lock(progress_mutex);
      progress(dist.name + " replication " + std::to_string(r) + " done");
    }
  };

  if (threads == 1) {
    for (std::size_t t = 0; t < n_tasks; ++t) run_task(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t task = next++; task < n_tasks; task = next++) run_task(task);
      });
  }

  // Ordered reduction: mode, distribution, eps, replication.
  for (std::size_t mi = 0; mi < cfg.modes.size(); ++mi)
    for (std::size_t d = 0; d < n_dist; ++d)
      for (std::size_t ei = 0; ei < cfg.eps.size(); ++ei)
        for (std::size_t r = 0; r < n_rep; ++r)
          report.rows.push_back(results[d * n_rep + r][mi * cfg.eps.size() + ei]);

  int failed = 0, non_monotone = 0;
  for (const auto& row : report.rows) {
    if (!row.ok) {
      ++failed;
      report.warnings.push_back(row.mode + "/" + row.distribution + " eps=" + std::to_string(row.eps_des) +
                                " replication " + std::to_string(row.replication) + " failed: " + row.error);
    }
    non_monotone += row.non_monotone_events;
  }
  if (failed) report.warnings.push_back(std::to_string(failed) + " replication rows failed and were excluded");
  if (non_monotone)
    report.warnings.push_back(std::to_string(non_monotone) + " non-monotone bisection steps were recorded");
  report.averages = compute_averages(report.rows);
  return report;
}

// ---------------------------------------------------------------------------
// Output

namespace {

std::string fmt(double v) {
  if (!std::isfinite(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

double num_from(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

std::optional<double> opt_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

std::string report_csv(const ExperimentReport& report) {
  std::ostringstream out;
  out << "mode,distribution,eps_des,replication,iterations,cost,s,s_true,eps_obs_single,eps_oos_single,"
         "eps_obs_joint,eps_oos_joint\n";
  auto opt = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string(); };
  for (const auto& a : report.averages) {
    for (const auto* r : report.block(a.mode, a.distribution, a.eps_des)) {
      out << r->mode << ',' << r->distribution << ',' << fmt(r->eps_des) << ',' << r->replication << ',';
      if (r->ok)
        out << r->iterations << ',' << fmt(r->cost) << ',' << fmt(r->s) << ',' << opt(r->s_true) << ','
            << fmt(r->eps_obs_single) << ',' << fmt(r->eps_oos_single) << ',' << fmt(r->eps_obs_joint) << ','
            << fmt(r->eps_oos_joint) << '\n';
      else
        out << ",,," << opt(r->s_true) << ",,,,\n";
    }
    out << a.mode << ',' << a.distribution << ',' << fmt(a.eps_des) << ",avg," << fmt(a.iterations) << ','
        << fmt(a.cost) << ',' << fmt(a.s) << ',' << opt(a.s_true) << ',' << fmt(a.eps_obs_single) << ','
        << fmt(a.eps_oos_single) << ',' << fmt(a.eps_obs_joint) << ',' << fmt(a.eps_oos_joint) << '\n';
  }
  return out.str();
}

nlohmann::json report_json(const ExperimentReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"mode", r.mode},
                    {"distribution", r.distribution},
                    {"eps_des", r.eps_des},
                    {"replication", r.replication},
                    {"ok", r.ok},
                    {"error", r.error},
                    {"iterations", r.iterations},
                    {"cost", num(r.cost)},
                    {"s", num(r.s)},
                    {"s_true", r.s_true ? num(*r.s_true) : nlohmann::json(nullptr)},
                    {"eps_obs_single", num(r.eps_obs_single)},
                    {"eps_oos_single", num(r.eps_oos_single)},
                    {"eps_obs_joint", num(r.eps_obs_joint)},
                    {"eps_oos_joint", num(r.eps_oos_joint)},
                    {"terminated_by", r.terminated_by},
                    {"s_terminal", num(r.s_terminal)},
                    {"eps_obs_terminal", num(r.eps_obs_terminal)},
                    {"s_max_init", num(r.s_max_init)},
                    {"non_monotone_events", r.non_monotone_events}});
  }
  nlohmann::json avgs = nlohmann::json::array();
  for (const auto& a : report.averages) {
    avgs.push_back({{"mode", a.mode},
                    {"distribution", a.distribution},
                    {"eps_des", a.eps_des},
                    {"replications", a.replications},
                    {"iterations", num(a.iterations)},
                    {"cost", num(a.cost)},
                    {"s", num(a.s)},
                    {"s_true", a.s_true ? num(*a.s_true) : nlohmann::json(nullptr)},
                    {"eps_obs_single", num(a.eps_obs_single)},
                    {"eps_oos_single", num(a.eps_oos_single)},
                    {"eps_obs_joint", num(a.eps_obs_joint)},
                    {"eps_oos_joint", num(a.eps_oos_joint)}});
  }
  return {{"rng", kRngName}, {"seed", report.seed}, {"rows", rows}, {"averages", avgs}, {"warnings", report.warnings}};
}

ExperimentReport report_from_json(const nlohmann::json& doc) {
  ExperimentReport report;
  report.seed = doc.at("seed").get<std::uint64_t>();
  for (const auto& j : doc.at("rows")) {
    ReplicationRow r;
    r.mode = j.at("mode").get<std::string>();
    r.distribution = j.at("distribution").get<std::string>();
    r.eps_des = j.at("eps_des").get<double>();
    r.replication = j.at("replication").get<int>();
    r.ok = j.at("ok").get<bool>();
    r.error = j.at("error").get<std::string>();
    r.iterations = j.at("iterations").get<int>();
    r.cost = num_from(j.at("cost"));
    r.s = num_from(j.at("s"));
    r.s_true = opt_from(j, "s_true");
    r.eps_obs_single = num_from(j.at("eps_obs_single"));
    r.eps_oos_single = num_from(j.at("eps_oos_single"));
    r.eps_obs_joint = num_from(j.at("eps_obs_joint"));
    r.eps_oos_joint = num_from(j.at("eps_oos_joint"));
    r.terminated_by = j.at("terminated_by").get<std::string>();
    r.s_terminal = num_from(j.at("s_terminal"));
    r.eps_obs_terminal = num_from(j.at("eps_obs_terminal"));
    r.s_max_init = num_from(j.at("s_max_init"));
    r.non_monotone_events = j.at("non_monotone_events").get<int>();
    report.rows.push_back(std::move(r));
  }
  for (const auto& j : doc.at("averages")) {
    AverageRow a;
    a.mode = j.at("mode").get<std::string>();
    a.distribution = j.at("distribution").get<std::string>();
    a.eps_des = j.at("eps_des").get<double>();
    a.replications = j.at("replications").get<int>();
    a.iterations = num_from(j.at("iterations"));
    a.cost = num_from(j.at("cost"));
    a.s = num_from(j.at("s"));
    a.s_true = opt_from(j, "s_true");
    a.eps_obs_single = num_from(j.at("eps_obs_single"));
    a.eps_oos_single = num_from(j.at("eps_oos_single"));
    a.eps_obs_joint = num_from(j.at("eps_obs_joint"));
    a.eps_oos_joint = num_from(j.at("eps_oos_joint"));
    report.averages.push_back(std::move(a));
  }
  report.warnings = doc.at("warnings").get<std::vector<std::string>>();
  return report;
}

std::filesystem::path write_report(const ExperimentReport& report, ReportFormat format,
                                   const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + out_dir.string() + ": " + ec.message());
  const auto path = out_dir / (format == ReportFormat::csv ? "report.csv" : "report.json");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  if (format == ReportFormat::csv)
    out << report_csv(report);
  else
    out << report_json(report).dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
  return path;
}

}  // namespace cctune
