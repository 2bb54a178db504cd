#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "cctune/grid.hpp"

namespace cctune {

class NetworkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Power transfer distribution factors: row k maps bus injections (pu) to
/// the flow on line k in its from->to orientation. The slack column is zero.
struct PtdfMatrix {
  Eigen::MatrixXd entries;  // l x m
  int slack_bus = 1;

  Eigen::Index line_count() const { return entries.rows(); }
  Eigen::Index bus_count() const { return entries.cols(); }
};

/// Builds M = B_f * inv(B_bus reduced) with the slack row and column
/// removed from the nodal susceptance matrix (b = 1/x per line).
PtdfMatrix compute_ptdf(const GridCase& grid, int slack_bus = 1);

/// Line flows M * (p_g - d) for a balanced nominal injection.
/// Throws NetworkError when |sum(p_g - d)| exceeds `balance_tol`.
Eigen::VectorXd nominal_flows(const PtdfMatrix& ptdf, const Eigen::VectorXd& p_g, const Eigen::VectorXd& d,
                              double balance_tol = 1e-8);

/// Bus loads as a vector (pu).
Eigen::VectorXd load_vector(const GridCase& grid);

}  // namespace cctune
