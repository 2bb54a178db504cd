#include "cctune/qp_solver.hpp"

#include <algorithm>
#include <functional>
#include <cmath>
#include <limits>
#include <vector>

namespace cctune::qp {

double Problem::objective(const Eigen::VectorXd& x) const {
  return 0.5 * x.dot(hessian_diag.cwiseProduct(x)) + linear.dot(x) + constant;
}

std::string to_string(Status status) {
  switch (status) {
    case Status::optimal:
      return "optimal";
    case Status::infeasible:
      return "infeasible";
    case Status::max_iterations:
      return "max_iterations";
  }
  return "unknown";
}

double KktResiduals::max() const {
  return std::max({stationarity, primal_feasibility, dual_feasibility, complementarity});
}

namespace {

double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

double dual_scale(const Problem& p) {
  return 1.0 + std::max(inf_norm(p.linear), inf_norm(p.hessian_diag));
}

double primal_scale(const Problem& p) { return 1.0 + std::max(inf_norm(p.eq_rhs), inf_norm(p.ineq_rhs)); }

}  // namespace

KktResiduals kkt_residuals(const Problem& p, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                           const Eigen::VectorXd& z) {
  KktResiduals r;
  // Stationarity is measured relative to the largest term of the gradient.
  const Eigen::VectorXd qx = p.hessian_diag.cwiseProduct(x);
  const Eigen::VectorXd ay = p.eq_matrix.rows() ? Eigen::VectorXd(p.eq_matrix.transpose() * y) : Eigen::VectorXd();
  const Eigen::VectorXd gz = p.ineq_matrix.rows() ? Eigen::VectorXd(p.ineq_matrix.transpose() * z) : Eigen::VectorXd();
  Eigen::VectorXd grad = qx + p.linear;
  if (ay.size()) grad += ay;
  if (gz.size()) grad += gz;
  const double ds = dual_scale(p);
  r.stationarity = inf_norm(grad) / std::max({ds, inf_norm(qx), inf_norm(ay), inf_norm(gz)});

  double primal = 0.0;
  if (p.eq_matrix.rows()) primal = inf_norm(p.eq_matrix * x - p.eq_rhs);
  Eigen::VectorXd slack;
  if (p.ineq_matrix.rows()) {
    slack = p.ineq_rhs - p.ineq_matrix * x;
    primal = std::max(primal, std::max(0.0, -slack.minCoeff()));
  }
  r.primal_feasibility = primal / primal_scale(p);
  r.dual_feasibility = z.size() ? std::max(0.0, -z.minCoeff()) / ds : 0.0;
  r.complementarity = z.size() ? z.cwiseProduct(slack).cwiseAbs().sum() / (1.0 + std::abs(p.objective(x))) : 0.0;
  return r;
}

double dual_objective(const Problem& p, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& z) {
  double value = -0.5 * x.dot(p.hessian_diag.cwiseProduct(x)) + p.constant;
  if (y.size()) value -= p.eq_rhs.dot(y);
  if (z.size()) value -= p.ineq_rhs.dot(z);
  return value;
}

bool verify_certificate(const Problem& p, const InfeasibilityCertificate& cert, double tol) {
  const auto& z = cert.ineq_multipliers;
  const auto& y = cert.eq_multipliers;
  if (z.size() != p.ineq_matrix.rows() || y.size() != p.eq_matrix.rows()) return false;
  if (z.size() && z.minCoeff() < 0.0) return false;
  const double weight = z.sum() + (y.size() ? y.cwiseAbs().sum() : 0.0);
  if (!(weight > 0.0)) return false;

  Eigen::VectorXd combo = Eigen::VectorXd::Zero(p.variable_count());
  if (z.size()) combo += p.ineq_matrix.transpose() * z;
  if (y.size()) combo += p.eq_matrix.transpose() * y;
  const double margin = (z.size() ? p.ineq_rhs.dot(z) : 0.0) + (y.size() ? p.eq_rhs.dot(y) : 0.0);

  const double coeff_scale =
      1.0 + std::max(p.ineq_matrix.size() ? p.ineq_matrix.cwiseAbs().maxCoeff() : 0.0,
                     p.eq_matrix.size() ? p.eq_matrix.cwiseAbs().maxCoeff() : 0.0);
  return inf_norm(combo) / weight <= tol * coeff_scale && margin / weight < -tol * primal_scale(p);
}

namespace {

struct Iterate {
  Eigen::VectorXd x, y, z;
  int iterations = 0;
  bool converged = false;
};

// Mehrotra predictor-corrector on the problem as given. Objective scaling is
// applied internally; returned multipliers refer to the original problem.
using AcceptFn = std::function<bool(const Eigen::VectorXd& y, const Eigen::VectorXd& z)>;

Iterate interior_point(const Problem& original, double tol, int max_iters, const AcceptFn& accept = {}) {
  const Eigen::Index n = original.variable_count();
  const Eigen::Index neq = original.eq_matrix.rows();
  const Eigen::Index nin = original.ineq_matrix.rows();

  const double scale = std::max({1.0, inf_norm(original.linear), inf_norm(original.hessian_diag)});
  const Eigen::VectorXd q_diag = original.hessian_diag / scale;
  const Eigen::VectorXd c = original.linear / scale;
  const Eigen::MatrixXd& a = original.eq_matrix;
  const Eigen::VectorXd& b = original.eq_rhs;
  const Eigen::MatrixXd& g = original.ineq_matrix;
  const Eigen::VectorXd& h = original.ineq_rhs;

  constexpr double kPrimalReg = 1e-11;
  constexpr double kDualReg = 1e-11;
  constexpr double kStepFraction = 0.995;

  Iterate it;
  Eigen::VectorXd z, w;
  Eigen::MatrixXd kkt(n + neq, n + neq);
  Eigen::VectorXd rhs(n + neq);

  // Starting point: the KKT solve with unit scaling, i.e. the least-squares
  // compromise between stationarity and G x + w = h with z = -w, then both
  // cones shifted into the interior.
  kkt.setZero();
  kkt.topLeftCorner(n, n).diagonal() = q_diag.array() + kPrimalReg;
  if (nin) kkt.topLeftCorner(n, n).noalias() += g.transpose() * g;
  if (neq) {
    kkt.topRightCorner(n, neq) = a.transpose();
    kkt.bottomLeftCorner(neq, n) = a;
    kkt.bottomRightCorner(neq, neq).diagonal().setConstant(-kDualReg);
  }
  rhs.head(n) = -c;
  if (nin) rhs.head(n) += g.transpose() * h;
  if (neq) rhs.tail(neq) = b;
  {
    const Eigen::VectorXd sol = kkt.partialPivLu().solve(rhs);
    const bool finite = sol.allFinite();
    it.x = finite ? Eigen::VectorXd(sol.head(n)) : Eigen::VectorXd::Zero(n);
    it.y = finite ? Eigen::VectorXd(sol.tail(neq)) : Eigen::VectorXd::Zero(neq);
  }
  if (nin) {
    w = h - g * it.x;
    z = -w;
    const double shift_w = -w.minCoeff(), shift_z = -z.minCoeff();
    if (shift_w >= 0.0) w.array() += 1.0 + shift_w;
    if (shift_z >= 0.0) z.array() += 1.0 + shift_z;
  }

  auto residuals_ok = [&]() {
    it.z = z * scale;
    const Eigen::VectorXd y_orig = it.y * scale;
    const auto r = kkt_residuals(original, it.x, y_orig, it.z);
    return r.max() <= tol;
  };

  for (int k = 0; k <= max_iters; ++k) {
    it.iterations = k;
    if (residuals_ok() || (accept && accept(it.y * scale, it.z))) {
      it.converged = true;
      break;
    }
    if (k == max_iters) break;

    Eigen::VectorXd rd = q_diag.cwiseProduct(it.x) + c;
    if (neq) rd += a.transpose() * it.y;
    if (nin) rd += g.transpose() * z;
    const Eigen::VectorXd rp = neq ? Eigen::VectorXd(a * it.x - b) : Eigen::VectorXd();
    const Eigen::VectorXd rg = nin ? Eigen::VectorXd(g * it.x + w - h) : Eigen::VectorXd();
    const double mu = nin ? w.dot(z) / static_cast<double>(nin) : 0.0;
    const Eigen::VectorXd d = nin ? Eigen::VectorXd(z.cwiseQuotient(w)) : Eigen::VectorXd();

    kkt.setZero();
    kkt.topLeftCorner(n, n).diagonal() = q_diag.array() + kPrimalReg;
    if (nin) kkt.topLeftCorner(n, n).noalias() += g.transpose() * d.asDiagonal() * g;
    if (neq) {
      kkt.topRightCorner(n, neq) = a.transpose();
      kkt.bottomLeftCorner(neq, n) = a;
      kkt.bottomRightCorner(neq, neq).diagonal().setConstant(-kDualReg);
    }
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(kkt);

    auto newton = [&](const Eigen::VectorXd& rc, Eigen::VectorXd& dx, Eigen::VectorXd& dy, Eigen::VectorXd& dz,
                      Eigen::VectorXd& dw) {
      rhs.head(n) = -rd;
      if (nin) rhs.head(n) -= g.transpose() * (rc.cwiseQuotient(w) + d.cwiseProduct(rg));
      if (neq) rhs.tail(neq) = -rp;
      const Eigen::VectorXd sol = lu.solve(rhs);
      dx = sol.head(n);
      dy = sol.tail(neq);
      if (nin) {
        const Eigen::VectorXd gdx = g * dx;
        dz = rc.cwiseQuotient(w) + d.cwiseProduct(rg + gdx);
        dw = -rg - gdx;
      }
    };
    auto max_step = [&](const Eigen::VectorXd& dw, const Eigen::VectorXd& dz) {
      double alpha = 1.0;
      for (Eigen::Index i = 0; i < nin; ++i) {
        if (dw(i) < 0.0) alpha = std::min(alpha, -w(i) / dw(i));
        if (dz(i) < 0.0) alpha = std::min(alpha, -z(i) / dz(i));
      }
      return alpha;
    };

    Eigen::VectorXd dx, dy, dz, dw;
    if (nin == 0) {
      newton(Eigen::VectorXd(), dx, dy, dz, dw);
      it.x += dx;
      it.y += dy;
      continue;
    }

    // Predictor.
    const Eigen::VectorXd rc_aff = -w.cwiseProduct(z);
    newton(rc_aff, dx, dy, dz, dw);
    const double alpha_aff = max_step(dw, dz);
    const double mu_aff = (w + alpha_aff * dw).dot(z + alpha_aff * dz) / static_cast<double>(nin);
    const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

    // Corrector.
    const Eigen::VectorXd rc = rc_aff - dw.cwiseProduct(dz) + Eigen::VectorXd::Constant(nin, sigma * mu);
    newton(rc, dx, dy, dz, dw);
    double alpha = std::min(1.0, kStepFraction * max_step(dw, dz));

    // A corrector far shorter than the predictor means the second-order term
    // is misleading; take a centred step without it.
    if (alpha < 0.1 * alpha_aff) {
      const Eigen::VectorXd rc_safe = rc_aff + Eigen::VectorXd::Constant(nin, std::max(sigma, 0.5) * mu);
      newton(rc_safe, dx, dy, dz, dw);
      alpha = std::min(1.0, kStepFraction * max_step(dw, dz));
    }

    // Once primal and dual feasible, mu must decrease; otherwise the
    // predictor-corrector can cycle. Take a centred step shortened until it does.
    const bool feasible = std::max(inf_norm(rg), inf_norm(rp)) <= 1e-6 * (1.0 + inf_norm(h) + inf_norm(b)) &&
                          inf_norm(rd) <= 1e-6 * (1.0 + inf_norm(c) + inf_norm(q_diag.cwiseProduct(it.x)));
    auto mu_at = [&](double step) { return (w + step * dw).dot(z + step * dz) / static_cast<double>(nin); };
    if (feasible && mu_at(alpha) > mu) {
      const Eigen::VectorXd rc_safe = rc_aff + Eigen::VectorXd::Constant(nin, std::max(sigma, 0.1) * mu);
      newton(rc_safe, dx, dy, dz, dw);
      alpha = std::min(1.0, kStepFraction * max_step(dw, dz));
      for (int back = 0; back < 40 && mu_at(alpha) > (1.0 - 0.01 * alpha) * mu; ++back) alpha *= 0.7;
    }

    if (!std::isfinite(alpha) || !dx.allFinite() || !dy.allFinite() || !dz.allFinite() || !dw.allFinite()) break;
    it.x += alpha * dx;
    it.y += alpha * dy;
    z += alpha * dz;
    w += alpha * dw;

    // Unbounded multipliers or iterates signal infeasibility (or an
    // unbounded objective); hand over to phase 1.
    if (z.maxCoeff() > 1e14 || inf_norm(it.x) > 1e14) break;
  }
  it.z = z * scale;
  it.y *= scale;
  return it;
}

// min t + (reg/2)|x|^2  s.t.  A x = b,  G x - t <= h,  t >= -1.
std::optional<InfeasibilityCertificate> phase_one(const Problem& p, double tol, int max_iters) {
  const Eigen::Index n = p.variable_count();
  const Eigen::Index nin = p.ineq_matrix.rows();

  auto finish = [&](InfeasibilityCertificate cert, double t) -> std::optional<InfeasibilityCertificate> {
    if (!verify_certificate(p, cert)) return std::nullopt;
    Eigen::VectorXd combo = p.ineq_matrix.transpose() * cert.ineq_multipliers;
    if (p.eq_matrix.rows()) combo += p.eq_matrix.transpose() * cert.eq_multipliers;
    cert.residual = inf_norm(combo);
    cert.margin =
        p.ineq_rhs.dot(cert.ineq_multipliers) + (p.eq_rhs.size() ? p.eq_rhs.dot(cert.eq_multipliers) : 0.0);
    const double weight = cert.ineq_multipliers.sum() + cert.eq_multipliers.cwiseAbs().sum();
    cert.infeasibility = std::max(t, -cert.margin / weight);
    return cert;
  };

  // Inconsistent equalities: the least-squares residual r satisfies A^T r = 0
  // and b^T r = |r|^2, so y = -r is a certificate.
  if (p.eq_matrix.rows()) {
    const Eigen::VectorXd x_ls = p.eq_matrix.completeOrthogonalDecomposition().solve(p.eq_rhs);
    const Eigen::VectorXd r = p.eq_rhs - p.eq_matrix * x_ls;
    if (inf_norm(r) > tol * primal_scale(p)) {
      InfeasibilityCertificate cert;
      cert.eq_multipliers = -r;
      cert.ineq_multipliers = Eigen::VectorXd::Zero(nin);
      if (auto out = finish(cert, 0.0)) return out;
    }
  }
  if (nin == 0) return std::nullopt;

  Problem aux;
  aux.hessian_diag = Eigen::VectorXd::Zero(n + 1);
  aux.hessian_diag.head(n).setConstant(1e-10);
  aux.linear = Eigen::VectorXd::Zero(n + 1);
  aux.linear(n) = 1.0;
  aux.eq_matrix = Eigen::MatrixXd::Zero(p.eq_matrix.rows(), n + 1);
  aux.eq_matrix.leftCols(n) = p.eq_matrix;
  aux.eq_rhs = p.eq_rhs;
  aux.ineq_matrix = Eigen::MatrixXd::Zero(nin + 1, n + 1);
  aux.ineq_matrix.topLeftCorner(nin, n) = p.ineq_matrix;
  aux.ineq_matrix.col(n).setConstant(-1.0);
  aux.ineq_rhs.resize(nin + 1);
  aux.ineq_rhs.head(nin) = p.ineq_rhs;
  aux.ineq_rhs(nin) = 1.0;

  auto make = [&](const Eigen::VectorXd& y, const Eigen::VectorXd& z) {
    InfeasibilityCertificate cert;
    cert.ineq_multipliers = z.head(nin).cwiseMax(0.0);
    cert.eq_multipliers = y;
    return cert;
  };
  // Any iterate whose multipliers already prove infeasibility will do.
  const Iterate it = interior_point(aux, std::min(tol, 1e-9), std::max(max_iters, 100),
                                    [&](const Eigen::VectorXd& y, const Eigen::VectorXd& z) {
                                      return verify_certificate(p, make(y, z));
                                    });
  if (!it.converged) return std::nullopt;

  const double t = it.x(n);
  const InfeasibilityCertificate cert = make(it.y, it.z);
  if (verify_certificate(p, cert)) return finish(cert, t);
  return std::nullopt;
}

}  // namespace

Solution solve(const Problem& problem, const Options& options) {
  const Eigen::Index n = problem.variable_count();
  const Eigen::Index neq = problem.eq_matrix.rows();
  const Eigen::Index nin = problem.ineq_matrix.rows();
  if (problem.hessian_diag.size() != n || (neq && problem.eq_matrix.cols() != n) || problem.eq_rhs.size() != neq ||
      (nin && problem.ineq_matrix.cols() != n) || problem.ineq_rhs.size() != nin)
    throw std::invalid_argument("QP dimensions are inconsistent");
  if ((problem.hessian_diag.array() < 0.0).any()) throw std::invalid_argument("QP Hessian must be PSD");

  // Structurally empty rows are resolved up front: a zero equality row must
  // have zero right-hand side, a zero inequality row nonnegative one.
  std::vector<int> eq_keep, in_keep;
  Solution out;
  for (Eigen::Index i = 0; i < neq; ++i) {
    if (problem.eq_matrix.row(i).cwiseAbs().maxCoeff() > 0.0) {
      eq_keep.push_back(static_cast<int>(i));
    } else if (std::abs(problem.eq_rhs(i)) > options.tol * primal_scale(problem)) {
      InfeasibilityCertificate cert;
      cert.eq_multipliers = Eigen::VectorXd::Zero(neq);
      cert.eq_multipliers(i) = problem.eq_rhs(i) > 0.0 ? -1.0 : 1.0;
      cert.ineq_multipliers = Eigen::VectorXd::Zero(nin);
      cert.margin = -std::abs(problem.eq_rhs(i));
      cert.infeasibility = std::abs(problem.eq_rhs(i));
      out.status = Status::infeasible;
      out.certificate = cert;
      out.primal = Eigen::VectorXd::Zero(n);
      out.eq_duals = Eigen::VectorXd::Zero(neq);
      out.ineq_duals = Eigen::VectorXd::Zero(nin);
      return out;
    }
  }
  for (Eigen::Index i = 0; i < nin; ++i) {
    if (problem.ineq_matrix.row(i).cwiseAbs().maxCoeff() > 0.0) {
      in_keep.push_back(static_cast<int>(i));
    } else if (problem.ineq_rhs(i) < 0.0) {
      InfeasibilityCertificate cert;
      cert.eq_multipliers = Eigen::VectorXd::Zero(neq);
      cert.ineq_multipliers = Eigen::VectorXd::Zero(nin);
      cert.ineq_multipliers(i) = 1.0;
      cert.margin = problem.ineq_rhs(i);
      cert.infeasibility = -problem.ineq_rhs(i);
      out.status = Status::infeasible;
      out.certificate = cert;
      out.primal = Eigen::VectorXd::Zero(n);
      out.eq_duals = Eigen::VectorXd::Zero(neq);
      out.ineq_duals = Eigen::VectorXd::Zero(nin);
      return out;
    }
  }

  Problem reduced;
  reduced.hessian_diag = problem.hessian_diag;
  reduced.linear = problem.linear;
  reduced.constant = problem.constant;
  const Eigen::VectorXi eq_idx = Eigen::Map<Eigen::VectorXi>(eq_keep.data(), static_cast<Eigen::Index>(eq_keep.size()));
  const Eigen::VectorXi in_idx = Eigen::Map<Eigen::VectorXi>(in_keep.data(), static_cast<Eigen::Index>(in_keep.size()));
  reduced.eq_matrix = problem.eq_matrix(eq_idx, Eigen::all);
  reduced.eq_rhs = problem.eq_rhs(eq_idx);
  reduced.ineq_matrix = problem.ineq_matrix(in_idx, Eigen::all);
  reduced.ineq_rhs = problem.ineq_rhs(in_idx);
  if (reduced.eq_matrix.rows() == 0) reduced.eq_matrix.resize(0, n);
  if (reduced.ineq_matrix.rows() == 0) reduced.ineq_matrix.resize(0, n);

  const Iterate it = interior_point(reduced, options.tol, options.max_iters);

  out.primal = it.x;
  out.iterations = it.iterations;
  out.eq_duals = Eigen::VectorXd::Zero(neq);
  out.ineq_duals = Eigen::VectorXd::Zero(nin);
  for (std::size_t k = 0; k < eq_keep.size(); ++k) out.eq_duals(eq_keep[k]) = it.y(static_cast<Eigen::Index>(k));
  for (std::size_t k = 0; k < in_keep.size(); ++k) out.ineq_duals(in_keep[k]) = it.z(static_cast<Eigen::Index>(k));
  out.objective = problem.objective(out.primal);
  out.kkt = kkt_residuals(problem, out.primal, out.eq_duals, out.ineq_duals);

  if (it.converged && out.kkt.max() <= options.tol) {
    out.status = Status::optimal;
    return out;
  }

  if (auto cert = phase_one(reduced, options.tol, options.max_iters)) {
    InfeasibilityCertificate full;
    full.infeasibility = cert->infeasibility;
    full.residual = cert->residual;
    full.margin = cert->margin;
    full.eq_multipliers = Eigen::VectorXd::Zero(neq);
    full.ineq_multipliers = Eigen::VectorXd::Zero(nin);
    for (std::size_t k = 0; k < eq_keep.size(); ++k)
      full.eq_multipliers(eq_keep[k]) = cert->eq_multipliers(static_cast<Eigen::Index>(k));
    for (std::size_t k = 0; k < in_keep.size(); ++k)
      full.ineq_multipliers(in_keep[k]) = cert->ineq_multipliers(static_cast<Eigen::Index>(k));
    if (verify_certificate(problem, full)) {
      out.status = Status::infeasible;
      out.certificate = std::move(full);
      return out;
    }
  }
  out.status = Status::max_iterations;
  return out;
}

}  // namespace cctune::qp
