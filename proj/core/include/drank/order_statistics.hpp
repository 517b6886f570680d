#pragma once

// Moments of order statistics of a standardized location-scale member:
// expected values (the D-rank scores), variances and covariances.

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "drank/distribution.hpp"

namespace drank {

/// Which end of the sample the observed ranks come from. With `lower`,
/// rank r is the r-th smallest; with `upper`, rank 1 is the largest.
enum class Tail { lower, upper };

/// Order-statistic index (1-based, ascending) of a 1-based rank.
constexpr int order_statistic_index(Tail tail, int rank, int n) noexcept {
  return tail == Tail::lower ? rank : n + 1 - rank;
}

}  // namespace drank

namespace drank::scores {

struct RawMoment {
  double value = 0.0;
  double abs_error = 0.0;
  bool converged = false;
};

/// E[X_(r:n)^power] of the raw (unstandardized) law, by adaptive quadrature
/// of Q(u)^power against the Beta(r, n-r+1) kernel. power is 1 or 2.
RawMoment raw_order_statistic_moment(const DistributionSpec& dist, int r, int n,
                                     int power);

/// Absolute error bound mos_exact guarantees or else throws AccuracyError.
inline constexpr double kExactTolerance = 1e-8;

/// alpha_(r:n) = E(Z_(r:n)) by quadrature.
double mos_exact(const DistributionSpec& dist, int r, int n);

/// Var(Z_(r:n)) by quadrature of the first two moments.
double os_variance_exact(const DistributionSpec& dist, int r, int n);

/// Two-term David-Johnson expansion around Q(r/(n+1)); O(1/n^2) accurate.
/// Throws DegenerateDensityError where f(Q_r) vanishes or the correction
/// cannot be evaluated.
double mos_approx(const DistributionSpec& dist, int r, int n);

/// First-order approximation of Var(Z_(r:n)): p q / ((n+2) f(Q_r)^2).
double os_variance_approx(const DistributionSpec& dist, int r, int n);

struct MonteCarloMos {
  std::vector<double> alpha;
  std::vector<double> stderr_;
  std::size_t reps = 0;
  bool antithetic = false;
};

/// Mean order statistics over `reps` sorted samples of size n. One sort
/// serves every rank. Symmetric families use antithetic pairs (x, -x), so
/// reps/2 pairs are drawn and standard errors come from the pair means.
/// Output depends on (dist, n, reps, seed) only, not on `workers`.
MonteCarloMos mos_mc(const DistributionSpec& dist, int n, std::size_t reps,
                     std::uint64_t seed, unsigned workers = 1);

/// Monte Carlo mean vector, its standard errors and the covariance matrix of
/// the m order statistics selected by `tail`, indexed by rank.
struct MonteCarloMoments {
  Eigen::VectorXd mean;
  Eigen::VectorXd mean_stderr;
  Eigen::MatrixXd cov;
  std::size_t reps = 0;
};

MonteCarloMoments mc_order_statistic_moments(const DistributionSpec& dist, int n, int m,
                                             Tail tail, std::size_t reps,
                                             std::uint64_t seed, unsigned workers = 1);

enum class CovMethod { monte_carlo, approximation };

struct CovOptions {
  CovMethod method = CovMethod::monte_carlo;
  Tail tail = Tail::lower;
  std::size_t reps = 20000;
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

/// beta_(rs:n) for ranks 1..m.
Eigen::MatrixXd cov_os(const DistributionSpec& dist, int n, int m,
                       const CovOptions& options = {});

}  // namespace drank::scores
