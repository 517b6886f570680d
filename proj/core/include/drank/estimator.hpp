#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "drank/ranked_sample.hpp"
#include "drank/score_table.hpp"

namespace drank {

enum class EstimatorMethod { lse, modified, multiple };
enum class Alternative { two_sided, greater };

std::string to_string(EstimatorMethod method);
std::string to_string(Alternative alternative);
Alternative parse_alternative(const std::string& text);

/// What sigma^2_(r:n) means inside Psi^I.
enum class NoiseVariance {
  /// Var(Z_(r:n)) taken from the score table.
  order_statistic,
  /// Variance of the response around its regression on the scores,
  /// sigma_Y^2 (1 - rho^2), the same for every rank.
  conditional_response,
};

struct VarianceOptions {
  /// Exponent applied to beta in Psi^II.
  int beta_power = 2;
  NoiseVariance noise = NoiseVariance::conditional_response;
  /// Required with conditional_response: the per-rank noise variance, in
  /// response units. The fitting functions fill it from the estimate.
  std::optional<double> noise_variance;
};

struct VarianceComponents {
  double psi1 = 0.0;
  double psi2 = 0.0;
  double phi = 0.0;
};

struct Estimate {
  EstimatorMethod method = EstimatorMethod::lse;
  double rho_hat = 0.0;
  /// rho_hat lies outside [-1, 1]; it is reported unchanged.
  bool exceeds_unit = false;
  double s = 0.0;
  int n = 0;
  int m = 0;
  double mu_hat = 0.0;
  double sigma_hat = 0.0;
  double phi = 0.0;
  std::optional<VarianceComponents> components;
  std::optional<double> asym_var;
  std::optional<double> std_err;
  /// sqrt(n) rho_hat sqrt(phi), standard normal under rho = 0.
  double t_stat = 0.0;
  double p_value = 1.0;
  Alternative alternative = Alternative::two_sided;
  VarianceOptions variance_options;
  std::string score_table_id;
  std::uint64_t sample_fingerprint = 0;
};

/// Least-squares slope of the standardized ranked responses on the scores,
/// through the origin. Variance components are filled when the table
/// carries sigma2 (if needed) and beta for ranks 1..m.
Estimate fit_lse(const RankedSample& sample, const ScoreTable& scores,
                 const VarianceOptions& options = {});

/// The estimator that also uses the unranked block through its mean score.
/// Equal to fit_lse when m = n. Variance components need a table with
/// sigma2/beta for all n ranks.
Estimate fit_modified(const RankedSample& sample, const ScoreTable& scores,
                      const VarianceOptions& options = {});

/// Psi^I, Psi^II, Phi summed over ranks 1..floor(n s).
VarianceComponents variance_components(const ScoreTable& scores, double s,
                                       const VarianceOptions& options = {});

/// Components of the modified estimator: scores beyond floor(n s) are
/// replaced by their mean. Needs a table with all n ranks.
VarianceComponents modified_variance_components(const ScoreTable& scores, double s,
                                                const VarianceOptions& options = {});

/// (Psi^I / sigma_y^2 + rho^2 Psi^II) / Phi^2.
double asymptotic_variance(const VarianceComponents& components, double rho, double sigma_y);

/// Normal-reference p-value of sqrt(n) rho_hat sqrt(phi).
double test_rho_zero(const Estimate& estimate, Alternative alternative = Alternative::two_sided);

enum class Centering {
  /// Y and Z centered by their means over the ranked block.
  top_block_mean,
  /// Y centered by mu_hat over all n responses; Z by its ranked-block mean.
  mu_hat,
};

struct MultipleFit {
  double delta_hat = 0.0;
  Eigen::VectorXd eta_hat;
  /// delta_hat / sigma_hat.
  double rho_hat = 0.0;
  Centering centering = Centering::top_block_mean;
};

/// Solves the two-block normal equations for (delta, eta) over ranks 1..m.
/// z has one row per rank and one column per covariate. Throws
/// RankDeficiencyError naming the block that makes the system singular.
MultipleFit fit_multiple(const RankedSample& sample, const Eigen::MatrixXd& z,
                         const ScoreTable& scores,
                         Centering centering = Centering::top_block_mean);

/// JSON document for an estimate.
std::string estimate_to_json(const Estimate& estimate, int indent = 2);

}  // namespace drank
