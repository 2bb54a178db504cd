#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "cctune/grid.hpp"
#include "cctune/network.hpp"
#include "cctune/reformulation.hpp"
#include "cctune/uncertainty.hpp"

namespace cctune {

class ViolationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Exact empirical frequency count / n.
struct Frequency {
  std::int64_t count = 0;
  std::int64_t n = 0;

  double value() const { return n ? static_cast<double>(count) / static_cast<double>(n) : 0.0; }
  /// Sign of count/n - target, with ties decided in count space.
  int compare(double target) const;
  /// |count/n - target| <= tol, evaluated in count space.
  bool within(double target, double tol) const;
};

struct ViolationReport {
  std::vector<std::int64_t> violations;  // per catalog row
  std::int64_t joint_violations = 0;     // samples with at least one violated row
  std::int64_t n_samples = 0;

  Frequency per_constraint(std::size_t c) const { return {violations.at(c), n_samples}; }
  Frequency single() const;  // worst row
  Frequency joint() const { return {joint_violations, n_samples}; }
  double eps_single() const { return single().value(); }
  double eps_joint() const { return joint().value(); }
  double sum_per_constraint() const;
};

/// M (I - alpha 1^T): change in line flows per unit of each uncertainty
/// component once the mismatch has been redistributed by alpha.
Eigen::MatrixXd constraint_deltas(const PtdfMatrix& ptdf, const Eigen::VectorXd& alpha);

/// Precomputes everything about (grid, network, alpha, catalog) that does
/// not depend on the dispatch, so repeated evaluations only pay the
/// per-sample loop.
class ViolationEvaluator {
 public:
  ViolationEvaluator(const GridCase& grid, const PtdfMatrix& ptdf, const ParticipationFactors& alpha,
                     const ConstraintCatalog& catalog);

  /// Counts strict violations of every catalog row on every sample. A row
  /// is violated when its post-recourse quantity crosses the nominal limit
  /// (ties count as satisfied).
  ViolationReport evaluate(const Eigen::VectorXd& p_g, const SampleSet& samples, int jobs = 1) const;

  const Eigen::MatrixXd& deltas() const { return deltas_; }

 private:
  ConstraintCatalog catalog_;
  Eigen::MatrixXd ptdf_;
  Eigen::VectorXd alpha_;
  Eigen::VectorXd load_;
  Eigen::MatrixXd deltas_;
};

ViolationReport evaluate(const Eigen::VectorXd& p_g, const ParticipationFactors& alpha, const PtdfMatrix& ptdf,
                         const GridCase& grid, const SampleSet& samples, const ConstraintCatalog& catalog,
                         int jobs = 1);

nlohmann::json to_json(const ViolationReport& report, const ConstraintCatalog& catalog, std::uint64_t seed);

}  // namespace cctune
