#include <gtest/gtest.h>

#include <random>

#include "cctune/rng.hpp"
#include "cctune/violation.hpp"
#include "oracles.hpp"

using namespace cctune;

namespace {

GridCase two_bus() {
  return parse_case(
      "base 100\nbus 1 0\nbus 2 100 uncertain\nline 1 2 0.1 60\n"
      "gen 1 0 300 0.01 10 0\ngen 2 0 300 0.01 20 0\n");
}

GridCase study_grid() {
  return apply_rts_modifications(load_case_file(std::string(CCTUNE_DATA_DIR) + "/rts24.case"));
}

DistributionSpec mixture_study() {
  MixtureSpec mix;
  mix.weights = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  mix.components.push_back(DistributionSpec{GaussianSpec::from_std({7, 14}, 0.5)});
  mix.components.push_back(DistributionSpec{GaussianSpec::from_std({6, 6}, 0.1)});
  mix.components.push_back(DistributionSpec{UniformBoxSpec{Eigen::Vector2d(-30, -30), Eigen::Vector2d(30, 30)}});
  return DistributionSpec{mix};
}

SampleSet column_samples(const std::vector<double>& values, int m, int bus_index) {
  SampleSet s;
  s.samples = SampleSet::Matrix::Zero(static_cast<Eigen::Index>(values.size()), m);
  for (std::size_t i = 0; i < values.size(); ++i) s.samples(static_cast<Eigen::Index>(i), bus_index) = values[i];
  s.support = {bus_index};
  return s;
}

struct Study {
  GridCase grid = study_grid();
  PtdfMatrix ptdf = compute_ptdf(grid);
  ParticipationFactors alpha = participation_factors(grid);
  UncertaintyModel model = UncertaintyModel::on_uncertain_buses(grid, mixture_study());
  ConstraintCatalog catalog = build_catalog(grid, ptdf, alpha, analytic_moments(model));

  Eigen::VectorXd dispatch(double s) const { return solve_dispatch(build_qp(grid, ptdf, catalog, s), alpha).p_g; }
};

}  // namespace

TEST(Frequency, CountSpaceComparisons) {
  const Frequency f{25, 1000};
  EXPECT_DOUBLE_EQ(f.value(), 0.025);
  EXPECT_EQ(f.compare(0.025), 0);
  EXPECT_EQ(f.compare(0.03), -1);
  EXPECT_EQ(f.compare(0.02), 1);
  EXPECT_TRUE(f.within(0.026, 0.001));
  EXPECT_FALSE(f.within(0.0261, 0.001));
  // 0.1 * 30 is not exactly 3 in floating point; the count comparison still ties
  EXPECT_EQ((Frequency{3, 30}).compare(0.1), 0);
  EXPECT_EQ((Frequency{0, 0}).value(), 0.0);
}

TEST(Evaluate, FourSampleExample) {
  const GridCase g = two_bus();
  const auto ptdf = compute_ptdf(g);
  const auto alpha = participation_factors(g);
  const auto cat = build_catalog(g, ptdf, alpha, moments_from_covariance(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2) * 1e-2));
  const Eigen::Vector2d p_g(0.6, 0.4);
  // line flow 1->2 is 0.6 - 0.5 w; only w = -0.1 exceeds the 0.6 limit
  const auto r = evaluate(p_g, alpha, ptdf, g, column_samples({0.02, 0.1, -0.1, 0.05}, 2, 1), cat);
  EXPECT_EQ(r.n_samples, 4);
  EXPECT_DOUBLE_EQ(r.eps_single(), 0.25);
  EXPECT_DOUBLE_EQ(r.eps_joint(), 0.25);
  for (std::size_t c = 0; c < cat.size(); ++c)
    EXPECT_EQ(r.violations[c], cat.rows[c].kind == ConstraintKind::line_upper ? 1 : 0) << cat.rows[c].label();
}

TEST(Evaluate, GeneratorRecourseLimits) {
  const GridCase g = two_bus();
  const auto ptdf = compute_ptdf(g);
  const auto alpha = participation_factors(g);
  const auto cat = build_catalog(g, ptdf, alpha, moments_from_covariance(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Zero(2, 2)));
  // each unit moves by -0.5 w; w = 1.0 drives bus 2 from 0.4 to -0.1 (< 0)
  const auto r = evaluate(Eigen::Vector2d(0.6, 0.4), alpha, ptdf, g, column_samples({1.0, 0.5}, 2, 1), cat);
  EXPECT_EQ(r.violations[3], 1);  // gen_lower bus 2
  EXPECT_EQ(r.violations[2], 0);  // gen_lower bus 1: 0.6 - 0.5 stays positive
}

TEST(Evaluate, ZeroSamplesMeanNoViolations) {
  Study st;
  const Eigen::VectorXd p = st.dispatch(0.5);
  SampleSet zeros;
  zeros.samples = SampleSet::Matrix::Zero(1000, 24);
  zeros.support = {7, 14};
  const auto r = ViolationEvaluator(st.grid, st.ptdf, st.alpha, st.catalog).evaluate(p, zeros);
  EXPECT_EQ(r.joint_violations, 0);
  for (auto v : r.violations) EXPECT_EQ(v, 0);
}

TEST(Evaluate, MatchesNaiveLoopAndIsJobIndependent) {
  Study st;
  const SampleSet s = sample(st.model, 30000, 77);
  const ViolationEvaluator ev(st.grid, st.ptdf, st.alpha, st.catalog);
  for (double sv : {0.0, 1.0, 2.0}) {
    const Eigen::VectorXd p = st.dispatch(sv);
    const auto ref = oracle::naive_violations(st.grid, st.ptdf, st.alpha.alpha, st.catalog, p, s);
    const auto one = ev.evaluate(p, s, 1);
    const auto four = ev.evaluate(p, s, 4);
    EXPECT_EQ(one.violations, ref.violations) << sv;
    EXPECT_EQ(one.joint_violations, ref.joint_violations) << sv;
    EXPECT_EQ(one.violations, four.violations);
    EXPECT_EQ(one.joint_violations, four.joint_violations);
    if (sv == 0.0) EXPECT_GT(one.joint_violations, 0);
  }
}

TEST(Evaluate, BooleOrdering) {
  Study st;
  const SampleSet s = sample(st.model, 20000, 5);
  for (double sv : {0.0, 0.8, 1.6, 2.4}) {
    const auto r = evaluate(st.dispatch(sv), st.alpha, st.ptdf, st.grid, s, st.catalog);
    EXPECT_LE(r.eps_single(), r.eps_joint());
    EXPECT_LE(r.eps_joint(), r.sum_per_constraint() + 1e-15);
  }
}

TEST(Evaluate, IdenticalRowsGiveEqualSingleAndJoint) {
  // a single constraint row: single and joint frequencies coincide
  Study st;
  ConstraintCatalog one;
  for (const auto& row : st.catalog.rows)
    if (row.kind == ConstraintKind::line_upper && row.subject == 1) one.rows.push_back(row);
  ASSERT_EQ(one.size(), 1u);
  const SampleSet s = sample(st.model, 5000, 2);
  const auto r = evaluate(st.dispatch(0.0), st.alpha, st.ptdf, st.grid, s, one);
  EXPECT_EQ(r.single().count, r.joint().count);
}

TEST(Evaluate, MoreTighteningMeansFewerViolations) {
  Study st;
  const SampleSet s = sample(st.model, 20000, 9);
  const auto lo = evaluate(st.dispatch(0.0), st.alpha, st.ptdf, st.grid, s, st.catalog);
  const auto hi = evaluate(st.dispatch(3.0), st.alpha, st.ptdf, st.grid, s, st.catalog);
  EXPECT_LT(hi.joint_violations, lo.joint_violations);
  EXPECT_LE(hi.single().count, lo.single().count);
}

TEST(Deltas, RedistributedInjectionSumsToZero) {
  const GridCase g = study_grid();
  const auto ptdf = compute_ptdf(g);
  const auto alpha = participation_factors(g);
  const Eigen::MatrixXd d = constraint_deltas(ptdf, alpha.alpha);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd(0.0, 0.1);
  for (int t = 0; t < 20; ++t) {
    Eigen::VectorXd w(24);
    for (int i = 0; i < 24; ++i) w(i) = nd(rng);
    const Eigen::VectorXd inj = w - alpha.alpha * w.sum();
    EXPECT_NEAR(inj.sum(), 0.0, 1e-14);
    EXPECT_LE((d * w - ptdf.entries * inj).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Deltas, SingleBalancingBus) {
  const GridCase g = study_grid();
  const auto ptdf = compute_ptdf(g);
  for (int k : {0, 6, 20}) {
    const Eigen::VectorXd e = Eigen::VectorXd::Unit(24, k);
    const Eigen::MatrixXd d = constraint_deltas(ptdf, e);
    for (int j = 0; j < 24; ++j)
      EXPECT_LE((d.col(j) - (ptdf.entries.col(j) - ptdf.entries.col(k))).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LE(d.col(k).cwiseAbs().maxCoeff(), 0.0);
  }
  // balancing entirely at the slack leaves the PTDF unchanged
  EXPECT_TRUE(constraint_deltas(ptdf, Eigen::VectorXd::Unit(24, 0)) == ptdf.entries);
}

TEST(Deltas, FiniteDifferenceOnRing) {
  const GridCase g = parse_case(
      "base 100\nbus 1 0\nbus 2 0\nbus 3 30\nline 1 2 0.1 100\nline 1 3 0.2 100\nline 2 3 0.1 100\n"
      "gen 1 0 100 0 1 0\ngen 2 0 50 0 1 0\n");
  const auto ptdf = compute_ptdf(g);
  const auto alpha = participation_factors(g);
  const Eigen::MatrixXd d = constraint_deltas(ptdf, alpha.alpha);
  const Eigen::Vector3d p_g(0.2, 0.1, 0.0);
  const Eigen::Vector3d load = load_vector(g);
  const double h = 1e-6;
  for (int j = 0; j < 3; ++j) {
    const Eigen::Vector3d w = h * Eigen::Vector3d::Unit(j);
    const Eigen::Vector3d p = p_g - alpha.alpha * w.sum();
    const Eigen::VectorXd f1 = ptdf.entries * (p + w - load);
    const Eigen::VectorXd f0 = ptdf.entries * (p_g - load);
    EXPECT_LE(((f1 - f0) / h - d.col(j)).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Evaluate, DimensionErrors) {
  Study st;
  const ViolationEvaluator ev(st.grid, st.ptdf, st.alpha, st.catalog);
  SampleSet s;
  s.samples = SampleSet::Matrix::Zero(10, 24);
  EXPECT_THROW(ev.evaluate(Eigen::VectorXd::Zero(23), s), ViolationError);
  SampleSet narrow;
  narrow.samples = SampleSet::Matrix::Zero(10, 23);
  EXPECT_THROW(ev.evaluate(Eigen::VectorXd::Zero(24), narrow), ViolationError);
  SampleSet empty;
  empty.samples = SampleSet::Matrix::Zero(0, 24);
  EXPECT_THROW(ev.evaluate(Eigen::VectorXd::Zero(24), empty), ViolationError);
  EXPECT_THROW(constraint_deltas(st.ptdf, Eigen::VectorXd::Zero(3)), ViolationError);
}

TEST(Evaluate, JsonExport) {
  Study st;
  const SampleSet s = sample(st.model, 2000, 31);
  const auto r = evaluate(st.dispatch(1.0), st.alpha, st.ptdf, st.grid, s, st.catalog);
  const auto j = to_json(r, st.catalog, 31);
  EXPECT_EQ(j["seed"], 31);
  EXPECT_EQ(j["n_samples"], 2000);
  EXPECT_EQ(j["rng"], kRngName);
  EXPECT_EQ(j["constraints"].size(), st.catalog.size());
  EXPECT_EQ(j["joint_violations"], r.joint_violations);
  EXPECT_DOUBLE_EQ(j["eps_single"].get<double>(), r.eps_single());
  EXPECT_EQ(j["constraints"][0]["label"], st.catalog.rows[0].label());
}
