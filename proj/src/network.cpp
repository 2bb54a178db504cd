#include "cctune/network.hpp"

#include <cmath>

namespace cctune {

PtdfMatrix compute_ptdf(const GridCase& grid, int slack_bus) {
  const Eigen::Index m = static_cast<Eigen::Index>(grid.bus_count());
  const Eigen::Index l = static_cast<Eigen::Index>(grid.line_count());
  if (slack_bus < 1 || slack_bus > m) throw NetworkError("slack bus " + std::to_string(slack_bus) + " is not a bus");

  const auto components = connected_components(grid);
  if (components.size() > 1) {
    const auto& island = components[0].front() == slack_bus ? components[1] : components[0];
    std::string ids;
    for (int b : island) ids += (ids.empty() ? "" : ",") + std::to_string(b);
    throw NetworkError("reduced susceptance matrix is singular: buses {" + ids +
                       "} are disconnected from the slack bus");
  }

  Eigen::MatrixXd bbus = Eigen::MatrixXd::Zero(m, m);
  Eigen::MatrixXd bf = Eigen::MatrixXd::Zero(l, m);
  for (Eigen::Index k = 0; k < l; ++k) {
    const auto& line = grid.lines[k];
    const Eigen::Index i = line.from_bus - 1;
    const Eigen::Index j = line.to_bus - 1;
    const double b = 1.0 / line.reactance;
    bbus(i, i) += b;
    bbus(j, j) += b;
    bbus(i, j) -= b;
    bbus(j, i) -= b;
    bf(k, i) += b;
    bf(k, j) -= b;
  }

  // Drop the slack row/column.
  const Eigen::Index s = slack_bus - 1;
  Eigen::VectorXi keep(m - 1);
  for (Eigen::Index i = 0, k = 0; i < m; ++i)
    if (i != s) keep(k++) = static_cast<int>(i);

  PtdfMatrix out;
  out.slack_bus = slack_bus;
  out.entries = Eigen::MatrixXd::Zero(l, m);
  if (m == 1) return out;

  const Eigen::MatrixXd reduced = bbus(keep, keep);
  Eigen::LLT<Eigen::MatrixXd> chol(reduced);
  if (chol.info() != Eigen::Success)
    throw NetworkError("reduced susceptance matrix is not positive definite");

  // M_red = Bf_red * inv(B_red)  <=>  B_red * M_red^T = Bf_red^T (B_red symmetric)
  const Eigen::MatrixXd bf_reduced = bf(Eigen::all, keep);
  const Eigen::MatrixXd m_reduced = chol.solve(bf_reduced.transpose()).transpose();
  out.entries(Eigen::all, keep) = m_reduced;
  return out;
}

Eigen::VectorXd nominal_flows(const PtdfMatrix& ptdf, const Eigen::VectorXd& p_g, const Eigen::VectorXd& d,
                              double balance_tol) {
  if (p_g.size() != ptdf.bus_count() || d.size() != ptdf.bus_count())
    throw NetworkError("injection vectors do not match the PTDF bus dimension");
  const Eigen::VectorXd injection = p_g - d;
  const double imbalance = injection.sum();
  if (std::abs(imbalance) > balance_tol)
    throw NetworkError("nominal injection is unbalanced by " + std::to_string(imbalance) + " pu");
  return ptdf.entries * injection;
}

Eigen::VectorXd load_vector(const GridCase& grid) {
  Eigen::VectorXd d(static_cast<Eigen::Index>(grid.bus_count()));
  for (std::size_t i = 0; i < grid.bus_count(); ++i) d(static_cast<Eigen::Index>(i)) = grid.buses[i].load;
  return d;
}

}  // namespace cctune
