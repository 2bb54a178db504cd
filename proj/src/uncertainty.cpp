#include "cctune/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "cctune/rng.hpp"

namespace cctune {

GaussianSpec GaussianSpec::from_std(const std::vector<double>& std_mw, double rho) {
  const auto k = static_cast<Eigen::Index>(std_mw.size());
  GaussianSpec g;
  g.mean_mw = Eigen::VectorXd::Zero(k);
  g.covariance_mw2.resize(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j)
      g.covariance_mw2(i, j) = (i == j ? 1.0 : rho) * std_mw[i] * std_mw[j];
  return g;
}

Eigen::Index DistributionSpec::dimension() const {
  return std::visit(
      [](const auto& d) -> Eigen::Index {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, GaussianSpec>)
          return d.mean_mw.size();
        else if constexpr (std::is_same_v<T, UniformBoxSpec>)
          return d.lower_mw.size();
        else
          return d.components.empty() ? 0 : d.components.front().dimension();
      },
      kind);
}

namespace {

constexpr double kEigenFloor = -1e-10;

void check_psd(const Eigen::MatrixXd& cov) {
  if (cov.rows() != cov.cols()) throw UncertaintyError("covariance is not square");
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, cov.cwiseAbs().maxCoeff()))
    throw UncertaintyError("covariance is not symmetric");
  if (cov.size() == 0) return;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (cov + cov.transpose()), Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < kEigenFloor * std::max(1.0, cov.cwiseAbs().maxCoeff()))
    throw UncertaintyError("covariance is not positive semidefinite");
}

}  // namespace

void DistributionSpec::validate() const {
  std::visit(
      [](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, GaussianSpec>) {
          if (d.covariance_mw2.rows() != d.mean_mw.size()) throw UncertaintyError("mean/covariance size mismatch");
          check_psd(d.covariance_mw2);
        } else if constexpr (std::is_same_v<T, UniformBoxSpec>) {
          if (d.lower_mw.size() != d.upper_mw.size()) throw UncertaintyError("uniform bounds size mismatch");
          if ((d.lower_mw.array() > d.upper_mw.array()).any())
            throw UncertaintyError("uniform lower bound exceeds upper bound");
        } else {
          if (d.components.empty() || d.components.size() != d.weights.size())
            throw UncertaintyError("mixture needs one weight per component");
          double total = 0.0;
          for (double w : d.weights) {
            if (!(w >= 0.0 && w <= 1.0)) throw UncertaintyError("mixture weight outside [0,1]");
            total += w;
          }
          if (std::abs(total - 1.0) > 1e-9) throw UncertaintyError("mixture weights do not sum to 1");
          const auto dim = d.components.front().dimension();
          for (const auto& c : d.components) {
            if (c.dimension() != dim) throw UncertaintyError("mixture components differ in dimension");
            c.validate();
          }
        }
      },
      kind);
}

UncertaintyModel UncertaintyModel::on_uncertain_buses(const GridCase& grid, DistributionSpec distribution) {
  UncertaintyModel model{std::move(distribution), grid.uncertain_buses(), grid.bus_count(), grid.base_mva};
  if (model.distribution.dimension() != static_cast<Eigen::Index>(model.buses.size()))
    throw UncertaintyError("distribution has dimension " + std::to_string(model.distribution.dimension()) +
                           " but the case has " + std::to_string(model.buses.size()) + " uncertain buses");
  return model;
}

Eigen::MatrixXd semidefinite_cholesky(const Eigen::MatrixXd& a) {
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  const double scale = n > 0 ? std::max(a.diagonal().cwiseAbs().maxCoeff(), 0.0) : 0.0;
  const double pivot_floor = 1e-13 * scale;
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j) - l.row(j).head(j).squaredNorm();
    if (d <= pivot_floor) continue;  // column stays zero
    const double root = std::sqrt(d);
    l(j, j) = root;
    for (Eigen::Index i = j + 1; i < n; ++i)
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / root;
  }
  return l;
}

namespace {

// Factors a (possibly singular) Gaussian covariance for sampling.
struct PreparedGaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd factor;
};

struct PreparedComponent {
  std::variant<PreparedGaussian, UniformBoxSpec> kind;
};

PreparedComponent prepare(const DistributionSpec& spec) {
  if (const auto* g = std::get_if<GaussianSpec>(&spec.kind)) {
    const Eigen::MatrixXd sym = 0.5 * (g->covariance_mw2 + g->covariance_mw2.transpose());
    return {PreparedGaussian{g->mean_mw, semidefinite_cholesky(sym)}};
  }
  if (const auto* u = std::get_if<UniformBoxSpec>(&spec.kind)) return {*u};
  throw UncertaintyError("nested mixtures are not supported");
}

void draw(const PreparedComponent& c, VariateStream& rng, Eigen::VectorXd& out) {
  if (const auto* g = std::get_if<PreparedGaussian>(&c.kind)) {
    Eigen::VectorXd z(g->mean.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.next_normal();
    out = g->mean + g->factor * z;
  } else {
    const auto& u = std::get<UniformBoxSpec>(c.kind);
    out.resize(u.lower_mw.size());
    for (Eigen::Index i = 0; i < out.size(); ++i)
      out(i) = u.lower_mw(i) + (u.upper_mw(i) - u.lower_mw(i)) * rng.next_uniform();
  }
}

}  // namespace

SampleSet sample(const UncertaintyModel& model, std::int64_t n, std::uint64_t seed, int jobs) {
  if (n < 1) throw UncertaintyError("sample count must be at least 1");
  model.distribution.validate();
  const auto k = static_cast<Eigen::Index>(model.buses.size());
  if (model.distribution.dimension() != k)
    throw UncertaintyError("distribution dimension does not match the number of uncertain buses");

  const auto* mixture = std::get_if<MixtureSpec>(&model.distribution.kind);
  std::vector<PreparedComponent> components;
  std::vector<double> cumulative;
  if (mixture) {
    double acc = 0.0;
    for (std::size_t c = 0; c < mixture->components.size(); ++c) {
      components.push_back(prepare(mixture->components[c]));
      acc += mixture->weights[c];
      cumulative.push_back(acc);
    }
    cumulative.back() = 1.0;
  } else {
    components.push_back(prepare(model.distribution));
  }

  SampleSet out;
  out.seed = seed;
  out.samples = SampleSet::Matrix::Zero(n, static_cast<Eigen::Index>(model.bus_count));
  for (int b : model.buses) out.support.push_back(b - 1);
  if (mixture) out.component.assign(static_cast<std::size_t>(n), 0);

  const double to_pu = 1.0 / model.base_mva;
  auto fill = [&](std::int64_t begin, std::int64_t end) {
    Eigen::VectorXd xi;
    for (std::int64_t i = begin; i < end; ++i) {
      VariateStream rng(seed, static_cast<std::uint64_t>(i));
      std::size_t c = 0;
      if (mixture) {
        const double u = rng.next_uniform();
        c = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
        c = std::min(c, components.size() - 1);
        out.component[static_cast<std::size_t>(i)] = static_cast<int>(c);
      }
      draw(components[c], rng, xi);
      for (Eigen::Index j = 0; j < k; ++j) out.samples(i, out.support[j]) = xi(j) * to_pu;
    }
  };

  jobs = std::max(1, jobs);
  if (jobs == 1 || n < 4096) {
    fill(0, n);
  } else {
    std::vector<std::jthread> workers;
    const std::int64_t chunk = (n + jobs - 1) / jobs;
    for (std::int64_t begin = 0; begin < n; begin += chunk)
      workers.emplace_back(fill, begin, std::min(n, begin + chunk));
  }
  return out;
}

MomentEstimate moments_from_covariance(const Eigen::VectorXd& mean, const Eigen::MatrixXd& covariance) {
  const Eigen::Index m = covariance.rows();
  MomentEstimate out;
  out.mean = mean;
  Eigen::MatrixXd sym = 0.5 * (covariance + covariance.transpose());

  // Factor only on the coordinates with nonzero variance.
  std::vector<int> support;
  for (Eigen::Index i = 0; i < m; ++i)
    if (sym(i, i) != 0.0) support.push_back(static_cast<int>(i));

  out.covariance = Eigen::MatrixXd::Zero(m, m);
  out.chol_factor = Eigen::MatrixXd::Zero(m, m);
  if (support.empty()) return out;

  const Eigen::VectorXi idx = Eigen::Map<const Eigen::VectorXi>(support.data(), static_cast<Eigen::Index>(support.size()));
  Eigen::MatrixXd sub = sym(idx, idx);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sub);
  if (eig.eigenvalues().minCoeff() < 0.0) {
    const Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(0.0);
    sub = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
    sub = 0.5 * (sub + sub.transpose());
  }
  out.covariance(idx, idx) = sub;
  out.chol_factor(idx, idx) = semidefinite_cholesky(sub);
  return out;
}

MomentEstimate empirical_moments(const SampleSet& s) {
  const Eigen::Index n = s.size();
  const Eigen::Index m = s.samples.cols();
  if (n < 2) throw UncertaintyError("empirical moments need at least two samples");

  std::vector<int> support = s.support;
  if (support.empty())
    for (Eigen::Index j = 0; j < m; ++j) support.push_back(static_cast<int>(j));
  const auto k = static_cast<Eigen::Index>(support.size());

  Eigen::VectorXd mean_sub = Eigen::VectorXd::Zero(k);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < k; ++j) mean_sub(j) += s.samples(i, support[j]);
  mean_sub /= static_cast<double>(n);

  Eigen::MatrixXd cov_sub = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd centered(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) centered(j) = s.samples(i, support[j]) - mean_sub(j);
    cov_sub.selfadjointView<Eigen::Lower>().rankUpdate(centered);
  }
  cov_sub = cov_sub.selfadjointView<Eigen::Lower>();
  cov_sub /= static_cast<double>(n - 1);

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(m);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index a = 0; a < k; ++a) {
    mean(support[a]) = mean_sub(a);
    for (Eigen::Index b = 0; b < k; ++b) cov(support[a], support[b]) = cov_sub(a, b);
  }
  return moments_from_covariance(mean, cov);
}

namespace {

void component_moments(const DistributionSpec& spec, Eigen::VectorXd& mean, Eigen::MatrixXd& second) {
  std::visit(
      [&](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, GaussianSpec>) {
          mean = d.mean_mw;
          second = d.covariance_mw2 + d.mean_mw * d.mean_mw.transpose();
        } else if constexpr (std::is_same_v<T, UniformBoxSpec>) {
          mean = 0.5 * (d.lower_mw + d.upper_mw);
          const Eigen::VectorXd width = d.upper_mw - d.lower_mw;
          second = mean * mean.transpose();
          second.diagonal() += width.cwiseProduct(width) / 12.0;
        } else {
          const auto k = d.components.front().dimension();
          mean = Eigen::VectorXd::Zero(k);
          second = Eigen::MatrixXd::Zero(k, k);
          for (std::size_t c = 0; c < d.components.size(); ++c) {
            Eigen::VectorXd mc;
            Eigen::MatrixXd sc;
            component_moments(d.components[c], mc, sc);
            mean += d.weights[c] * mc;
            second += d.weights[c] * sc;
          }
        }
      },
      spec.kind);
}

}  // namespace

MomentEstimate analytic_moments(const UncertaintyModel& model) {
  model.distribution.validate();
  Eigen::VectorXd mean_mw;
  Eigen::MatrixXd second_mw;
  component_moments(model.distribution, mean_mw, second_mw);
  const Eigen::MatrixXd cov_mw = second_mw - mean_mw * mean_mw.transpose();

  const auto m = static_cast<Eigen::Index>(model.bus_count);
  const double to_pu = 1.0 / model.base_mva;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(m);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(m, m);
  for (std::size_t a = 0; a < model.buses.size(); ++a) {
    mean(model.buses[a] - 1) = mean_mw(static_cast<Eigen::Index>(a)) * to_pu;
    for (std::size_t b = 0; b < model.buses.size(); ++b)
      cov(model.buses[a] - 1, model.buses[b] - 1) =
          cov_mw(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * to_pu * to_pu;
  }
  return moments_from_covariance(mean, cov);
}

double sensitivity_norm(const Eigen::RowVectorXd& a, const MomentEstimate& moments) {
  if (a.size() != moments.chol_factor.rows()) throw UncertaintyError("sensitivity row has the wrong length");
  return (a * moments.chol_factor).norm();
}

}  // namespace cctune
