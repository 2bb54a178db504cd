#include "cctune/violation.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "cctune/rng.hpp"

namespace cctune {

int Frequency::compare(double target) const {
  const double scaled = target * static_cast<double>(n);
  const double diff = static_cast<double>(count) - scaled;
  if (std::abs(diff) <= 1e-12 * std::max(1.0, std::abs(scaled))) return 0;
  return diff < 0.0 ? -1 : 1;
}

bool Frequency::within(double target, double tol) const {
  const double nn = static_cast<double>(n);
  const double diff = std::abs(static_cast<double>(count) - target * nn);
  return diff <= tol * nn + 1e-12 * std::max(1.0, std::abs(target) * nn);
}

Frequency ViolationReport::single() const {
  std::int64_t worst = 0;
  for (auto v : violations) worst = std::max(worst, v);
  return {worst, n_samples};
}

double ViolationReport::sum_per_constraint() const {
  double total = 0.0;
  for (std::size_t c = 0; c < violations.size(); ++c) total += per_constraint(c).value();
  return total;
}

Eigen::MatrixXd constraint_deltas(const PtdfMatrix& ptdf, const Eigen::VectorXd& alpha) {
  if (alpha.size() != ptdf.bus_count()) throw ViolationError("alpha length does not match the PTDF");
  const Eigen::VectorXd m_alpha = ptdf.entries * alpha;
  return ptdf.entries - m_alpha * Eigen::RowVectorXd::Ones(ptdf.bus_count());
}

ViolationEvaluator::ViolationEvaluator(const GridCase& grid, const PtdfMatrix& ptdf,
                                       const ParticipationFactors& alpha, const ConstraintCatalog& catalog)
    : catalog_(catalog),
      ptdf_(ptdf.entries),
      alpha_(alpha.alpha),
      load_(load_vector(grid)),
      deltas_(constraint_deltas(ptdf, alpha.alpha)) {}

namespace {

struct RowPlan {
  ConstraintKind kind;
  int index;  // bus or line, 0-based
  double limit;
};

struct Counts {
  std::vector<std::int64_t> per_row;
  std::int64_t joint = 0;
};

}  // namespace

ViolationReport ViolationEvaluator::evaluate(const Eigen::VectorXd& p_g, const SampleSet& samples, int jobs) const {
  const Eigen::Index m = ptdf_.cols();
  const Eigen::Index l = ptdf_.rows();
  if (p_g.size() != m) throw ViolationError("dispatch length does not match the bus count");
  if (samples.samples.cols() != m) throw ViolationError("sample width does not match the bus count");
  if (samples.size() < 1) throw ViolationError("sample set is empty");

  const auto& rows = catalog_.rows;
  std::vector<RowPlan> plan;
  plan.reserve(rows.size());
  for (const auto& r : rows) {
    const bool gen = r.kind == ConstraintKind::gen_upper || r.kind == ConstraintKind::gen_lower;
    plan.push_back({r.kind, r.subject - 1, r.nominal_limit});
    if (gen ? (r.subject < 1 || r.subject > m) : (r.subject < 1 || r.subject > l))
      throw ViolationError("catalog row references an out-of-range subject");
  }

  // Nominal flows, accumulated in bus order.
  Eigen::VectorXd flow0(l);
  for (Eigen::Index k = 0; k < l; ++k) {
    double f = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) f += ptdf_(k, j) * (p_g(j) - load_(j));
    flow0(k) = f;
  }

  std::vector<int> support = samples.support;
  if (support.empty())
    for (Eigen::Index j = 0; j < m; ++j) support.push_back(static_cast<int>(j));
  std::sort(support.begin(), support.end());
  const auto k_support = static_cast<Eigen::Index>(support.size());

  // Delta columns restricted to the support, line-major for the inner loop.
  Eigen::MatrixXd delta_support(l, k_support);
  for (Eigen::Index j = 0; j < k_support; ++j) delta_support.col(j) = deltas_.col(support[j]);

  auto run = [&](Eigen::Index begin, Eigen::Index end, Counts& counts) {
    counts.per_row.assign(plan.size(), 0);
    Eigen::VectorXd xi(k_support);
    Eigen::VectorXd flows(l);
    for (Eigen::Index i = begin; i < end; ++i) {
      double omega = 0.0;
      for (Eigen::Index j = 0; j < k_support; ++j) {
        xi(j) = samples.samples(i, support[j]);
        omega += xi(j);
      }
      for (Eigen::Index k = 0; k < l; ++k) {
        double f = flow0(k);
        for (Eigen::Index j = 0; j < k_support; ++j) f += delta_support(k, j) * xi(j);
        flows(k) = f;
      }
      bool any = false;
      for (std::size_t c = 0; c < plan.size(); ++c) {
        const auto& r = plan[c];
        bool violated = false;
        switch (r.kind) {
          case ConstraintKind::gen_upper:
            violated = p_g(r.index) - alpha_(r.index) * omega > r.limit;
            break;
          case ConstraintKind::gen_lower:
            violated = p_g(r.index) - alpha_(r.index) * omega < r.limit;
            break;
          case ConstraintKind::line_upper:
            violated = flows(r.index) > r.limit;
            break;
          case ConstraintKind::line_lower:
            violated = flows(r.index) < -r.limit;
            break;
        }
        if (violated) {
          ++counts.per_row[c];
          any = true;
        }
      }
      if (any) ++counts.joint;
    }
  };

  const Eigen::Index n = samples.size();
  constexpr Eigen::Index kBlock = 8192;
  const Eigen::Index blocks = (n + kBlock - 1) / kBlock;
  std::vector<Counts> partial(static_cast<std::size_t>(blocks));
  jobs = std::clamp(jobs, 1, static_cast<int>(blocks));
  if (jobs == 1) {
    for (Eigen::Index b = 0; b < blocks; ++b) run(b * kBlock, std::min(n, (b + 1) * kBlock), partial[b]);
  } else {
    std::vector<std::jthread> workers;
    for (int t = 0; t < jobs; ++t)
      workers.emplace_back([&, t] {
        for (Eigen::Index b = t; b < blocks; b += jobs) run(b * kBlock, std::min(n, (b + 1) * kBlock), partial[b]);
      });
  }

  ViolationReport report;
  report.n_samples = n;
  report.violations.assign(plan.size(), 0);
  for (const auto& part : partial) {
    for (std::size_t c = 0; c < plan.size(); ++c) report.violations[c] += part.per_row[c];
    report.joint_violations += part.joint;
  }
  return report;
}

ViolationReport evaluate(const Eigen::VectorXd& p_g, const ParticipationFactors& alpha, const PtdfMatrix& ptdf,
                         const GridCase& grid, const SampleSet& samples, const ConstraintCatalog& catalog,
                         int jobs) {
  return ViolationEvaluator(grid, ptdf, alpha, catalog).evaluate(p_g, samples, jobs);
}

nlohmann::json to_json(const ViolationReport& report, const ConstraintCatalog& catalog, std::uint64_t seed) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t c = 0; c < catalog.size(); ++c) {
    const auto& r = catalog.rows[c];
    rows.push_back({{"index", c},
                    {"label", r.label()},
                    {"kind", to_string(r.kind)},
                    {"subject", r.subject},
                    {"nominal_limit_pu", r.nominal_limit},
                    {"tightening_pu", r.tightening},
                    {"degenerate", r.degenerate},
                    {"violations", report.violations.at(c)},
                    {"eps", report.per_constraint(c).value()}});
  }
  return {{"rng", kRngName},
          {"seed", seed},
          {"n_samples", report.n_samples},
          {"eps_single", report.eps_single()},
          {"eps_joint", report.eps_joint()},
          {"joint_violations", report.joint_violations},
          {"constraints", rows}};
}

}  // namespace cctune
