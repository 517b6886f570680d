#pragma once

#include <random>
#include <string>

#include "drank/rng.hpp"

namespace drank {

enum class Family { uniform, normal, half_normal, gamma, pareto };

/// Standardized (mean 0, variance 1) member of a location-scale family.
///
/// The raw generating law is recorded (e.g. gamma with shape 3 and rate 3,
/// or the Pareto law F(x) = 1 - x^(-a) on x >= 1); every quantile, density
/// and variate this class hands out is affinely mapped to zero mean and unit
/// variance. Construction checks both moments by quadrature to 1e-8.
class DistributionSpec {
 public:
  static DistributionSpec uniform();
  static DistributionSpec normal();
  static DistributionSpec half_normal();
  static DistributionSpec gamma(double shape, double rate);
  /// Requires tail_index > 2 (finite variance).
  static DistributionSpec pareto(double tail_index);

  /// Parses "uniform", "normal", "half_normal", "gamma(3,3)", "pareto(2.3)".
  static DistributionSpec parse(const std::string& text);

  Family family() const noexcept { return family_; }
  double shape() const noexcept { return shape_; }
  double rate() const noexcept { return rate_; }
  double tail_index() const noexcept { return tail_index_; }
  bool standardized() const noexcept { return true; }
  bool symmetric() const noexcept {
    return family_ == Family::uniform || family_ == Family::normal;
  }

  /// Canonical text form, round-trips through parse().
  std::string key() const;

  double raw_mean() const noexcept { return mean_; }
  double raw_sd() const noexcept { return sd_; }

  double raw_quantile(double p) const;
  /// raw_quantile(1 - q), evaluated without cancellation near q = 0.
  double raw_quantile_upper(double q) const;
  double raw_density(double x) const;
  double raw_density_derivative(double x) const;

  /// Standardized quantile Q_Z(p); throws DomainError unless 0 < p < 1.
  double quantile(double p) const;
  double quantile_upper(double q) const;
  double density(double z) const;
  double density_derivative(double z) const;

  double to_standard(double raw) const noexcept { return (raw - mean_) / sd_; }

  /// Exponent k such that the raw quantile grows like (1-u)^(-k) at u -> 1.
  double upper_singularity_exponent() const noexcept {
    return family_ == Family::pareto ? 1.0 / tail_index_ : 0.0;
  }

  bool operator==(const DistributionSpec& other) const noexcept {
    return family_ == other.family_ && shape_ == other.shape_ &&
           rate_ == other.rate_ && tail_index_ == other.tail_index_;
  }

 private:
  DistributionSpec(Family family, double shape, double rate, double tail_index);
  void verify_standardization() const;

  Family family_;
  double shape_ = 0.0;
  double rate_ = 0.0;
  double tail_index_ = 0.0;
  double mean_ = 0.0;
  double sd_ = 1.0;
};

/// Draws standardized variates. Holds the per-family std distribution
/// objects so repeated draws reuse their internal state.
class Sampler {
 public:
  explicit Sampler(const DistributionSpec& dist);

  double operator()(Rng& rng);
  double raw(Rng& rng);

 private:
  DistributionSpec dist_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::gamma_distribution<double> gamma_;
};

}  // namespace drank
