#pragma once

#include <optional>
#include <string>

#include <Eigen/Dense>

namespace cctune::qp {

/// minimize   0.5 x^T diag(hessian_diag) x + linear^T x + constant
/// subject to eq_matrix x == eq_rhs
///            ineq_matrix x <= ineq_rhs
struct Problem {
  Eigen::VectorXd hessian_diag;
  Eigen::VectorXd linear;
  double constant = 0.0;
  Eigen::MatrixXd eq_matrix;  // p x n
  Eigen::VectorXd eq_rhs;
  Eigen::MatrixXd ineq_matrix;  // q x n
  Eigen::VectorXd ineq_rhs;

  Eigen::Index variable_count() const { return linear.size(); }
  double objective(const Eigen::VectorXd& x) const;
};

enum class Status { optimal, infeasible, max_iterations };

std::string to_string(Status status);

/// Scaled KKT residuals. Stationarity and dual feasibility are relative to
/// 1 + max(|linear|, |hessian|); primal feasibility to 1 + max(|eq_rhs|,
/// |ineq_rhs|); complementarity sum_i |z_i (h - Gx)_i| to 1 + |objective|.
struct KktResiduals {
  double stationarity = 0.0;
  double primal_feasibility = 0.0;
  double dual_feasibility = 0.0;
  double complementarity = 0.0;

  double max() const;
};

KktResiduals kkt_residuals(const Problem& problem, const Eigen::VectorXd& x, const Eigen::VectorXd& eq_duals,
                           const Eigen::VectorXd& ineq_duals);

/// Lagrangian dual value -0.5 x^T Q x - b^T y - h^T z + constant.
double dual_objective(const Problem& problem, const Eigen::VectorXd& x, const Eigen::VectorXd& eq_duals,
                      const Eigen::VectorXd& ineq_duals);

/// Farkas-type proof of infeasibility: z >= 0 and y with
/// G^T z + A^T y ~ 0 and h^T z + b^T y < 0.
struct InfeasibilityCertificate {
  Eigen::VectorXd eq_multipliers;
  Eigen::VectorXd ineq_multipliers;
  double infeasibility = 0.0;  // optimal uniform constraint relaxation of phase 1
  double residual = 0.0;       // |G^T z + A^T y|_inf
  double margin = 0.0;         // h^T z + b^T y (negative)
};

struct Solution {
  Status status = Status::max_iterations;
  Eigen::VectorXd primal;
  double objective = 0.0;
  Eigen::VectorXd eq_duals;
  Eigen::VectorXd ineq_duals;
  KktResiduals kkt;
  int iterations = 0;
  std::optional<InfeasibilityCertificate> certificate;
};

struct Options {
  double tol = 1e-8;
  int max_iters = 200;
};

/// Primal-dual interior-point solve. Deterministic for fixed input.
Solution solve(const Problem& problem, const Options& options = {});

/// Independent check of a certificate against the problem data.
bool verify_certificate(const Problem& problem, const InfeasibilityCertificate& cert, double tol = 1e-7);

}  // namespace cctune::qp
