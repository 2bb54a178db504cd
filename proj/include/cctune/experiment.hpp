#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cctune/config.hpp"
#include "cctune/grid.hpp"
#include "cctune/network.hpp"
#include "cctune/reformulation.hpp"
#include "cctune/tuner.hpp"
#include "cctune/uncertainty.hpp"

namespace cctune {

double normal_cdf(double x);
/// Standard normal quantile for p in (0, 1).
double inv_normal_cdf(double p);

enum class MomentSource { analytic, empirical };
enum class OosStream { separate, shared };

struct NamedDistribution {
  std::string name;
  DistributionSpec spec;
  MomentSource moments = MomentSource::analytic;
  bool gaussian() const { return std::holds_alternative<GaussianSpec>(spec.kind); }
};

struct ExperimentConfig {
  std::filesystem::path case_path;
  bool rts_modifications = true;
  std::vector<int> uncertain_buses;  // empty: keep what the case (or the RTS edits) mark
  std::vector<NamedDistribution> distributions;
  std::vector<TuningMode> modes{TuningMode::single};
  std::vector<double> eps{0.1, 0.05, 0.01};
  int replications = 20;
  std::int64_t n_tuning = 10000;
  std::int64_t n_oos = 100000;
  double gamma = 1e-4;
  std::uint64_t seed = 1;
  double width_tol = 1e-6;
  int max_bisection_iters = 60;
  int slack_bus = 1;
  bool include_degenerate_constraints = false;
  OosStream oos_stream = OosStream::separate;
  int jobs = 1;

  static ExperimentConfig from_config(const Config& cfg);
  static ExperimentConfig load(const std::filesystem::path& path);
};

/// Case, network and recourse shared by every replication.
struct PreparedCase {
  GridCase grid;
  PtdfMatrix ptdf;
  ParticipationFactors alpha;
};

PreparedCase prepare_case(const ExperimentConfig& cfg);
std::uint64_t tuning_seed(const ExperimentConfig& cfg, int replication);
std::uint64_t oos_seed(const ExperimentConfig& cfg, int replication);
MomentEstimate moments_for(const NamedDistribution& dist, const UncertaintyModel& model, const SampleSet& tuning);

struct ReplicationRow {
  std::string mode;
  std::string distribution;
  double eps_des = 0.0;
  int replication = 0;
  bool ok = true;
  std::string error;
  int iterations = 0;
  double cost = 0.0;
  double s = 0.0;
  std::optional<double> s_true;
  double eps_obs_single = 0.0;
  double eps_oos_single = 0.0;
  double eps_obs_joint = 0.0;
  double eps_oos_joint = 0.0;
  std::string terminated_by;
  double s_terminal = 0.0;        // last bisection iterate
  double eps_obs_terminal = 0.0;  // its violation frequency in the tuned mode
  double s_max_init = 0.0;
  int non_monotone_events = 0;

  bool operator==(const ReplicationRow&) const = default;
};

struct AverageRow {
  std::string mode;
  std::string distribution;
  double eps_des = 0.0;
  int replications = 0;  // rows that entered the mean
  double iterations = 0.0;
  double cost = 0.0;
  double s = 0.0;
  std::optional<double> s_true;
  double eps_obs_single = 0.0;
  double eps_oos_single = 0.0;
  double eps_obs_joint = 0.0;
  double eps_oos_joint = 0.0;

  bool operator==(const AverageRow&) const = default;
};

struct ExperimentReport {
  std::uint64_t seed = 0;
  std::vector<ReplicationRow> rows;  // ordered by mode, distribution, eps_des, replication
  std::vector<AverageRow> averages;  // one per (mode, distribution, eps_des), same order
  std::vector<std::string> warnings;

  bool operator==(const ExperimentReport&) const = default;

  const AverageRow* average(const std::string& mode, const std::string& distribution, double eps_des) const;
  std::vector<const ReplicationRow*> block(const std::string& mode, const std::string& distribution,
                                           double eps_des) const;
};

/// Means over the successful rows of each block, in row order.
std::vector<AverageRow> compute_averages(const std::vector<ReplicationRow>& rows);

using ProgressFn = std::function<void(const std::string&)>;

ExperimentReport run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress = {});

enum class ReportFormat { csv, json };

/// mode,distribution,eps_des,replication,iterations,cost,s,s_true,
/// eps_obs_single,eps_oos_single,eps_obs_joint,eps_oos_joint
/// Each block's replication rows are followed by its average (replication = avg).
std::string report_csv(const ExperimentReport& report);
nlohmann::json report_json(const ExperimentReport& report);
ExperimentReport report_from_json(const nlohmann::json& doc);

/// Writes report.csv or report.json into `out_dir`; returns the file path.
std::filesystem::path write_report(const ExperimentReport& report, ReportFormat format,
                                   const std::filesystem::path& out_dir);

}  // namespace cctune
