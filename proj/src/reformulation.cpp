#include "cctune/reformulation.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace cctune {

ParticipationFactors participation_factors(const GridCase& grid) {
  const auto m = static_cast<Eigen::Index>(grid.bus_count());
  const double total = grid.total_capacity();
  if (!(total > 0.0)) throw ReformulationError("participation factors need positive total capacity");
  ParticipationFactors pf;
  pf.alpha = Eigen::VectorXd::Zero(m);
  for (Eigen::Index i = 0; i < m; ++i) pf.alpha(i) = std::max(grid.generators[i].p_max, 0.0) / total;
  return pf;
}

std::string to_string(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::gen_upper:
      return "gen_upper";
    case ConstraintKind::gen_lower:
      return "gen_lower";
    case ConstraintKind::line_upper:
      return "line_upper";
    case ConstraintKind::line_lower:
      return "line_lower";
  }
  return "unknown";
}

std::string ConstraintDescriptor::label() const {
  const bool gen = kind == ConstraintKind::gen_upper || kind == ConstraintKind::gen_lower;
  return to_string(kind) + (gen ? "_bus" : "_line") + std::to_string(subject);
}

ConstraintCatalog build_catalog(const GridCase& grid, const PtdfMatrix& ptdf, const ParticipationFactors& alpha,
                                const MomentEstimate& moments, const CatalogOptions& options) {
  const auto m = static_cast<Eigen::Index>(grid.bus_count());
  const auto l = static_cast<Eigen::Index>(grid.line_count());
  if (ptdf.bus_count() != m || ptdf.line_count() != l || alpha.alpha.size() != m ||
      moments.chol_factor.rows() != m)
    throw ReformulationError("catalog inputs have inconsistent dimensions");

  ConstraintCatalog catalog;
  const Eigen::RowVectorXd ones = Eigen::RowVectorXd::Ones(m);

  for (ConstraintKind kind : {ConstraintKind::gen_upper, ConstraintKind::gen_lower}) {
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& g = grid.generators[i];
      const bool degenerate = g.is_degenerate();
      if (degenerate && !options.include_degenerate_constraints) continue;
      ConstraintDescriptor row;
      row.kind = kind;
      row.subject = g.bus;
      row.sensitivity = alpha.alpha(i) * ones;
      row.nominal_limit = kind == ConstraintKind::gen_upper ? g.p_max : g.p_min;
      row.tightening = sensitivity_norm(row.sensitivity, moments);
      row.degenerate = degenerate;
      catalog.rows.push_back(std::move(row));
    }
  }

  // M (I - alpha 1^T) = M - (M alpha) 1^T
  const Eigen::VectorXd m_alpha = ptdf.entries * alpha.alpha;
  for (ConstraintKind kind : {ConstraintKind::line_upper, ConstraintKind::line_lower}) {
    for (Eigen::Index k = 0; k < l; ++k) {
      ConstraintDescriptor row;
      row.kind = kind;
      row.subject = static_cast<int>(k + 1);
      row.sensitivity = ptdf.entries.row(k) - m_alpha(k) * ones;
      row.nominal_limit = grid.lines[k].capacity;
      row.tightening = sensitivity_norm(row.sensitivity, moments);
      catalog.rows.push_back(std::move(row));
    }
  }
  return catalog;
}

Eigen::VectorXd TightenedQP::expand(const Eigen::VectorXd& x) const {
  Eigen::VectorXd p = fixed_dispatch;
  for (std::size_t j = 0; j < variable_buses.size(); ++j) p(variable_buses[j]) = x(static_cast<Eigen::Index>(j));
  return p;
}

TightenedQP build_qp(const GridCase& grid, const PtdfMatrix& ptdf, const ConstraintCatalog& catalog, double s) {
  if (!(s >= 0.0)) throw ReformulationError("safety parameter must be nonnegative");
  const auto m = static_cast<Eigen::Index>(grid.bus_count());

  TightenedQP qp;
  qp.s = s;
  qp.fixed_dispatch = Eigen::VectorXd::Zero(m);
  std::vector<int> variable_of(static_cast<std::size_t>(m), -1);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& g = grid.generators[i];
    if (g.is_degenerate()) {
      qp.fixed_dispatch(i) = g.p_max;
    } else {
      variable_of[i] = static_cast<int>(qp.variable_buses.size());
      qp.variable_buses.push_back(static_cast<int>(i));
    }
  }
  const auto n = static_cast<Eigen::Index>(qp.variable_buses.size());
  if (n == 0) throw ReformulationError("case has no dispatchable generation");

  auto& p = qp.program;
  p.hessian_diag.resize(n);
  p.linear.resize(n);
  p.constant = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& g = grid.generators[i];
    p.constant += g.cost_constant;
    if (variable_of[i] < 0) {
      const double f = qp.fixed_dispatch(i);
      p.constant += g.cost_quadratic * f * f + g.cost_linear * f;
    } else {
      p.hessian_diag(variable_of[i]) = 2.0 * g.cost_quadratic;
      p.linear(variable_of[i]) = g.cost_linear;
    }
  }

  const Eigen::VectorXd d = load_vector(grid);
  p.eq_matrix = Eigen::MatrixXd::Ones(1, n);
  p.eq_rhs = Eigen::VectorXd::Constant(1, d.sum() - qp.fixed_dispatch.sum());

  // Line rows act on the variable part of M (p_G - d).
  const Eigen::VectorXd fixed_flow = ptdf.entries * (qp.fixed_dispatch - d);

  std::size_t active = 0;
  for (const auto& row : catalog.rows) active += row.degenerate ? 0 : 1;
  p.ineq_matrix = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(active), n);
  p.ineq_rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(active));
  qp.row_of_constraint.assign(catalog.size(), -1);

  Eigen::Index r = 0;
  for (std::size_t c = 0; c < catalog.size(); ++c) {
    const auto& row = catalog.rows[c];
    if (row.degenerate) continue;
    const double margin = s * row.tightening;
    switch (row.kind) {
      case ConstraintKind::gen_upper: {
        const int j = variable_of[row.subject - 1];
        p.ineq_matrix(r, j) = 1.0;
        p.ineq_rhs(r) = row.nominal_limit - margin;
        break;
      }
      case ConstraintKind::gen_lower: {
        const int j = variable_of[row.subject - 1];
        p.ineq_matrix(r, j) = -1.0;
        p.ineq_rhs(r) = -(row.nominal_limit + margin);
        break;
      }
      case ConstraintKind::line_upper:
      case ConstraintKind::line_lower: {
        const double sign = row.kind == ConstraintKind::line_upper ? 1.0 : -1.0;
        const Eigen::Index k = row.subject - 1;
        for (Eigen::Index j = 0; j < n; ++j) p.ineq_matrix(r, j) = sign * ptdf.entries(k, qp.variable_buses[j]);
        p.ineq_rhs(r) = row.nominal_limit - margin - sign * fixed_flow(k);
        break;
      }
    }
    qp.row_of_constraint[c] = static_cast<int>(r);
    ++r;
  }
  return qp;
}

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void write_terms(std::ostringstream& out, const Eigen::RowVectorXd& coeffs, const std::vector<std::string>& names) {
  bool first = true;
  for (Eigen::Index j = 0; j < coeffs.size(); ++j) {
    const double c = coeffs(j);
    if (c == 0.0) continue;
    if (first)
      out << (c < 0 ? "- " : "") << num(std::abs(c)) << " " << names[j];
    else
      out << (c < 0 ? " - " : " + ") << num(std::abs(c)) << " " << names[j];
    first = false;
  }
  if (first) out << "0 " << names.front();
}

}  // namespace

std::string to_lp_format(const TightenedQP& qp) {
  const auto& p = qp.program;
  std::vector<std::string> names;
  for (int b : qp.variable_buses) names.push_back("p_b" + std::to_string(b + 1));

  std::ostringstream out;
  out << "\\ tightened DC-OPF, s = " << num(qp.s) << "\n";
  out << "\\ objective constant = " << num(p.constant) << "\n";
  out << "Minimize\n obj: ";
  write_terms(out, p.linear.transpose(), names);
  bool any_quadratic = false;
  for (Eigen::Index j = 0; j < p.hessian_diag.size(); ++j) {
    if (p.hessian_diag(j) == 0.0) continue;
    out << (any_quadratic ? " + " : " + [ ") << num(p.hessian_diag(j)) << " " << names[j] << " ^ 2";
    any_quadratic = true;
  }
  if (any_quadratic) out << " ] / 2";
  out << "\nSubject To\n";
  for (Eigen::Index i = 0; i < p.eq_matrix.rows(); ++i) {
    out << " balance" << i + 1 << ": ";
    write_terms(out, p.eq_matrix.row(i), names);
    out << " = " << num(p.eq_rhs(i)) << "\n";
  }
  for (Eigen::Index r = 0; r < p.ineq_matrix.rows(); ++r) {
    out << " c" << r + 1 << ": ";
    write_terms(out, p.ineq_matrix.row(r), names);
    out << " <= " << num(p.ineq_rhs(r)) << "\n";
  }
  out << "Bounds\n";
  for (const auto& name : names) out << " " << name << " free\n";
  out << "End\n";
  return out.str();
}

DispatchSolution solve_dispatch(const TightenedQP& qp, const ParticipationFactors& alpha, const qp::Options& options) {
  DispatchSolution out;
  out.raw = qp::solve(qp.program, options);
  out.status = out.raw.status;
  out.p_g = qp.expand(out.raw.primal);
  out.alpha = alpha.alpha;
  out.cost = out.raw.objective;
  return out;
}

double generation_cost(const GridCase& grid, const Eigen::VectorXd& p_g) {
  double cost = 0.0;
  for (std::size_t i = 0; i < grid.bus_count(); ++i) {
    const auto& g = grid.generators[i];
    const double p = p_g(static_cast<Eigen::Index>(i));
    cost += g.cost_quadratic * p * p + g.cost_linear * p + g.cost_constant;
  }
  return cost;
}

}  // namespace cctune
