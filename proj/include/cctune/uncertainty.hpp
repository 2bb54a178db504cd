#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "cctune/grid.hpp"

namespace cctune {

class UncertaintyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Distribution parameters are in MW over the k uncertainty sources, in the
// order of their buses.

struct GaussianSpec {
  Eigen::VectorXd mean_mw;
  Eigen::MatrixXd covariance_mw2;

  /// Zero-mean Gaussian with the given standard deviations and a common
  /// pairwise correlation coefficient.
  static GaussianSpec from_std(const std::vector<double>& std_mw, double rho);
};

/// Independent uniform marginals on [lower, upper].
struct UniformBoxSpec {
  Eigen::VectorXd lower_mw;
  Eigen::VectorXd upper_mw;
};

struct DistributionSpec;

struct MixtureSpec {
  std::vector<double> weights;
  std::vector<DistributionSpec> components;
};

struct DistributionSpec {
  std::variant<GaussianSpec, UniformBoxSpec, MixtureSpec> kind;

  Eigen::Index dimension() const;
  /// Throws UncertaintyError on a non-PSD covariance, bad weights or
  /// inverted bounds.
  void validate() const;
};

/// A distribution placed on specific buses of a grid.
struct UncertaintyModel {
  DistributionSpec distribution;
  std::vector<int> buses;  // bus ids, one per distribution coordinate
  std::size_t bus_count = 0;
  double base_mva = 100.0;

  static UncertaintyModel on_uncertain_buses(const GridCase& grid, DistributionSpec distribution);
};

/// N draws of the full bus-space uncertainty vector, in pu. Columns outside
/// `support` are identically zero.
struct SampleSet {
  using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Matrix samples;                 // N x m
  std::uint64_t seed = 0;
  std::vector<int> support;       // 0-based bus indices carrying uncertainty
  std::vector<int> component;     // mixture component per draw; empty otherwise

  Eigen::Index size() const { return samples.rows(); }
};

/// Draws `n` samples. Sample i depends only on (spec, seed, i), so the
/// result is identical for any `jobs`.
SampleSet sample(const UncertaintyModel& model, std::int64_t n, std::uint64_t seed, int jobs = 1);

struct MomentEstimate {
  Eigen::VectorXd mean;           // m, pu
  Eigen::MatrixXd covariance;     // m x m, pu^2
  Eigen::MatrixXd chol_factor;    // lower triangular, chol * chol^T == covariance
};

/// Sample mean and unbiased covariance, factored on the support subspace.
MomentEstimate empirical_moments(const SampleSet& samples);

/// Exact first and second moments of the model.
MomentEstimate analytic_moments(const UncertaintyModel& model);

/// Builds a MomentEstimate from a bus-space covariance (pu^2): symmetrizes,
/// clips eigenvalues below zero and factors.
MomentEstimate moments_from_covariance(const Eigen::VectorXd& mean, const Eigen::MatrixXd& covariance);

/// Lower-triangular L with L L^T = A for symmetric positive semidefinite A.
/// Zero pivots produce zero columns.
Eigen::MatrixXd semidefinite_cholesky(const Eigen::MatrixXd& a);

/// sqrt(a Sigma a^T), evaluated as ||a * chol_factor||_2.
double sensitivity_norm(const Eigen::RowVectorXd& a, const MomentEstimate& moments);

}  // namespace cctune
