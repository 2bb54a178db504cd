#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance binary.

#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "cctune/grid.hpp"
#include "cctune/network.hpp"
#include "cctune/qp_solver.hpp"
#include "cctune/reformulation.hpp"
#include "cctune/uncertainty.hpp"
#include "cctune/violation.hpp"

namespace oracle {

// DC power flow in angle space: B theta = p with theta_slack = 0, then
// flow = (theta_from - theta_to) / x.
inline Eigen::VectorXd angle_flows(const cctune::GridCase& g, const Eigen::VectorXd& p, int slack) {
  const auto m = static_cast<Eigen::Index>(g.bus_count());
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(m, m);
  for (const auto& l : g.lines) {
    const double y = 1.0 / l.reactance;
    const int i = l.from_bus - 1, j = l.to_bus - 1;
    b(i, i) += y;
    b(j, j) += y;
    b(i, j) -= y;
    b(j, i) -= y;
  }
  Eigen::VectorXd rhs = p;
  b.row(slack - 1).setZero();
  b(slack - 1, slack - 1) = 1.0;
  rhs(slack - 1) = 0.0;
  const Eigen::VectorXd theta = b.fullPivLu().solve(rhs);
  Eigen::VectorXd flows(static_cast<Eigen::Index>(g.line_count()));
  for (std::size_t k = 0; k < g.line_count(); ++k) {
    const auto& l = g.lines[k];
    flows(static_cast<Eigen::Index>(k)) = (theta(l.from_bus - 1) - theta(l.to_bus - 1)) / l.reactance;
  }
  return flows;
}

// Enumerates every active set of a strictly convex QP and returns the
// objective of the best KKT point, or nullopt when none exists.
inline std::optional<double> brute_force_qp(const cctune::qp::Problem& p) {
  const Eigen::Index n = p.variable_count(), me = p.eq_matrix.rows(), mi = p.ineq_matrix.rows();
  std::optional<double> best;
  for (unsigned mask = 0; mask < (1u << mi); ++mask) {
    std::vector<Eigen::Index> act;
    for (Eigen::Index i = 0; i < mi; ++i)
      if (mask & (1u << i)) act.push_back(i);
    const Eigen::Index k = me + static_cast<Eigen::Index>(act.size());
    if (k > n) continue;
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + k, n + k);
    Eigen::VectorXd rhs(n + k);
    kkt.topLeftCorner(n, n) = p.hessian_diag.asDiagonal();
    rhs.head(n) = -p.linear;
    Eigen::MatrixXd c(k, n);
    Eigen::VectorXd d(k);
    if (me) {
      c.topRows(me) = p.eq_matrix;
      d.head(me) = p.eq_rhs;
    }
    for (std::size_t j = 0; j < act.size(); ++j) {
      c.row(me + static_cast<Eigen::Index>(j)) = p.ineq_matrix.row(act[j]);
      d(me + static_cast<Eigen::Index>(j)) = p.ineq_rhs(act[j]);
    }
    kkt.topRightCorner(n, k) = c.transpose();
    kkt.bottomLeftCorner(k, n) = c;
    rhs.tail(k) = d;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    if (lu.rank() < n + k) continue;
    const Eigen::VectorXd sol = lu.solve(rhs);
    const Eigen::VectorXd x = sol.head(n);
    bool ok = !(mi && (p.ineq_matrix * x - p.ineq_rhs).maxCoeff() > 1e-9);
    for (std::size_t j = 0; ok && j < act.size(); ++j)
      if (sol(n + me + static_cast<Eigen::Index>(j)) < -1e-9) ok = false;
    if (ok) {
      const double obj = p.objective(x);
      if (!best || obj < *best) best = obj;
    }
  }
  return best;
}

// Random strictly convex QP with at most 6 variables and 8 inequalities.
// Roughly one in five draws may be infeasible.
template <class Rng>
cctune::qp::Problem random_qp(Rng& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ud(0.05, 4.0);
  const int n = 1 + static_cast<int>(rng() % 6);
  const int me = static_cast<int>(rng() % std::min(n, 3));
  const int mi = static_cast<int>(rng() % 9);
  cctune::qp::Problem p;
  p.hessian_diag.resize(n);
  p.linear.resize(n);
  Eigen::VectorXd x0(n);
  for (int i = 0; i < n; ++i) {
    p.hessian_diag(i) = ud(rng);
    p.linear(i) = 4 * nd(rng);
    x0(i) = 2 * nd(rng);
  }
  p.eq_matrix.resize(me, n);
  p.ineq_matrix.resize(mi, n);
  for (int i = 0; i < me; ++i)
    for (int j = 0; j < n; ++j) p.eq_matrix(i, j) = nd(rng);
  for (int i = 0; i < mi; ++i)
    for (int j = 0; j < n; ++j) p.ineq_matrix(i, j) = nd(rng);
  p.eq_rhs = p.eq_matrix * x0;
  p.ineq_rhs = p.ineq_matrix * x0;
  const bool perturb = rng() % 5 == 0;
  for (int i = 0; i < mi; ++i) p.ineq_rhs(i) += perturb ? 3 * nd(rng) : ud(rng) - 0.05;
  return p;
}

// Per-sample reference evaluator: recourse p = p_g - alpha * sum(w), then the
// full PTDF product of the perturbed injection.
inline cctune::ViolationReport naive_violations(const cctune::GridCase& g, const cctune::PtdfMatrix& ptdf,
                                                const Eigen::VectorXd& alpha, const cctune::ConstraintCatalog& cat,
                                                const Eigen::VectorXd& p_g, const cctune::SampleSet& s) {
  using cctune::ConstraintKind;
  cctune::ViolationReport r;
  r.n_samples = s.size();
  r.violations.assign(cat.size(), 0);
  const Eigen::VectorXd d = cctune::load_vector(g);
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const Eigen::VectorXd w = s.samples.row(i).transpose();
    const Eigen::VectorXd p = p_g - alpha * w.sum();
    const Eigen::VectorXd f = ptdf.entries * (p + w - d);
    bool any = false;
    for (std::size_t c = 0; c < cat.size(); ++c) {
      const auto& row = cat.rows[c];
      const int k = row.subject - 1;
      bool v = false;
      switch (row.kind) {
        case ConstraintKind::gen_upper: v = p(k) > row.nominal_limit; break;
        case ConstraintKind::gen_lower: v = p(k) < row.nominal_limit; break;
        case ConstraintKind::line_upper: v = f(k) > row.nominal_limit; break;
        case ConstraintKind::line_lower: v = f(k) < -row.nominal_limit; break;
      }
      if (v) {
        ++r.violations[c];
        any = true;
      }
    }
    if (any) ++r.joint_violations;
  }
  return r;
}

}  // namespace oracle
