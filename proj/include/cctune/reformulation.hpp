#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cctune/grid.hpp"
#include "cctune/network.hpp"
#include "cctune/qp_solver.hpp"
#include "cctune/uncertainty.hpp"

namespace cctune {

class ReformulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Share of the total power mismatch each bus's generation absorbs.
struct ParticipationFactors {
  Eigen::VectorXd alpha;
};

/// alpha_i = p_max_i / sum_j p_max_j.
ParticipationFactors participation_factors(const GridCase& grid);

enum class ConstraintKind { gen_upper, gen_lower, line_upper, line_lower };

std::string to_string(ConstraintKind kind);

struct ConstraintDescriptor {
  ConstraintKind kind = ConstraintKind::gen_upper;
  int subject = 0;                  // generator bus id, or 1-based line index
  Eigen::RowVectorXd sensitivity;   // a, length m
  double nominal_limit = 0.0;       // p_max, p_min, or line capacity (pu)
  double tightening = 0.0;          // sigma_c = ||a Sigma^{1/2}||_2 (pu)
  bool degenerate = false;          // zero-capacity unit: never binding, not sent to the solver

  std::string label() const;
};

struct ConstraintCatalog {
  std::vector<ConstraintDescriptor> rows;

  std::size_t size() const { return rows.size(); }
};

struct CatalogOptions {
  /// Keep generator rows of zero-capacity buses (the 2m + 2l convention).
  bool include_degenerate_constraints = false;
};

/// One row per generator limit and line direction: generator upper rows,
/// generator lower rows, line upper rows, line lower rows. Generator rows use
/// a = alpha_i * 1; line rows a = M_l (I - alpha 1^T).
ConstraintCatalog build_catalog(const GridCase& grid, const PtdfMatrix& ptdf, const ParticipationFactors& alpha,
                                const MomentEstimate& moments, const CatalogOptions& options = {});

/// Deterministic program for a fixed safety parameter s. Decision variables
/// are the dispatch of non-degenerate buses; degenerate buses stay fixed.
struct TightenedQP {
  double s = 0.0;
  qp::Problem program;
  std::vector<int> variable_buses;        // 0-based bus index per variable
  Eigen::VectorXd fixed_dispatch;         // length m, used for non-variable buses
  std::vector<int> row_of_constraint;     // catalog index -> inequality row, -1 if inactive

  /// Full-length p_G for a vector of decision variables.
  Eigen::VectorXd expand(const Eigen::VectorXd& x) const;
};

/// Objective: generation cost. Equality: sum p_G = sum d. Each active
/// catalog row c contributes  a_c . p_G <= limit_c - s * sigma_c.
TightenedQP build_qp(const GridCase& grid, const PtdfMatrix& ptdf, const ConstraintCatalog& catalog, double s);

/// Writes the program in CPLEX LP text format, 12 significant digits.
std::string to_lp_format(const TightenedQP& qp);

struct DispatchSolution {
  Eigen::VectorXd p_g;  // length m, pu
  Eigen::VectorXd alpha;
  double cost = 0.0;
  qp::Status status = qp::Status::max_iterations;
  qp::Solution raw;
};

DispatchSolution solve_dispatch(const TightenedQP& qp, const ParticipationFactors& alpha,
                                const qp::Options& options = {});

/// Generation cost of a full dispatch vector.
double generation_cost(const GridCase& grid, const Eigen::VectorXd& p_g);

}  // namespace cctune
