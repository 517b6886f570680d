#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "drank/distribution.hpp"
#include "drank/ranked_sample.hpp"
#include "drank/score_table.hpp"

namespace drank::panel {

struct Residualized {
  /// Intercept first, then one coefficient per covariate column.
  Eigen::VectorXd coefficients;
  Eigen::VectorXd residuals;
  /// |residuals|, the response used downstream.
  Eigen::VectorXd abs_residuals;
};

/// Least squares of y on an intercept and the covariate columns. Throws
/// RankDeficiencyError naming the first column that is collinear with the
/// intercept and the columns before it.
Residualized preprocess_residualize(const Eigen::VectorXd& y, const Eigen::MatrixXd& covariates,
                                    const std::vector<std::string>& column_names = {});

struct DayFit {
  double rho = 0.0;
  double gamma = 0.0;
  int iterations = 0;
  bool converged = false;
  /// Squared-error objective after the first gamma step and after every
  /// later half-step; non-increasing.
  std::vector<double> objective_trace;
};

struct IterationOptions {
  double tol = 1e-8;
  int max_iter = 100;
};

/// Alternates the closed-form gamma and rho updates of
///   Y_[r] = mu + sigma rho alpha_r + gamma I(r in excluded) + noise
/// starting from the with-intercept regression over the ranks outside
/// `excluded`. mu and sigma are the plug-ins over all n responses.
/// Non-convergence is reported in the result, not thrown.
DayFit fit_day_iterative(const RankedSample& day, const ScoreTable& scores,
                         const std::vector<int>& excluded = {1, 2},
                         const IterationOptions& options = {});

struct Combined {
  double t_rho = 0.0;
  double rho_bar = 0.0;
  /// U_t = sqrt(n) rho_t.
  std::vector<double> u;
};

/// t_rho = (1/sqrt(T)) sum sqrt(n) rho_t.
Combined combined_statistic(const std::vector<double>& rho_ts, int n);

enum class HacForm {
  /// (1/T) sum_{k=0}^{lag} (T-k) cov_k.
  one_sided,
  /// Lags k >= 1 counted twice, as in the usual long-run variance.
  symmetric,
};

struct HacResult {
  double variance = 0.0;
  double lag0 = 0.0;
  /// The raw total was negative and was replaced by the lag-0 term.
  bool floored = false;
};

/// Truncated autocovariance sum. cov_k averages (U_t - mean)(U_{t+k} - mean)
/// over the T-k overlapping pairs, with the mean over all T values, so the
/// lag-0 term is the variance with divisor T. Requires 0 <= lag < T.
HacResult hac_variance(const std::vector<double>& u, int lag, HacForm form = HacForm::one_sided);

/// floor(T^(1/3)).
int default_lag(int T);

struct PanelSeries {
  std::vector<long long> day_ids;
  std::vector<RankedSample> days;
  std::vector<int> excluded{1, 2};
  /// Throws InvalidArgument when days disagree on n or m, or the excluded
  /// ranks fall outside 1..m.
  void validate() const;
};

struct PanelOptions {
  std::optional<int> lag;
  HacForm hac_form = HacForm::one_sided;
  IterationOptions iteration;
  double max_nonconverged_fraction = 0.2;
  unsigned workers = 1;
};

struct CombinedTest {
  double t_rho = 0.0;
  double rho_bar = 0.0;
  double hac_variance = 0.0;
  bool hac_floored = false;
  int lag = 0;
  double z = 0.0;
  double p_value = 1.0;
  double p_value_greater = 1.0;
  double pooled_rho_lse = 0.0;
  std::vector<DayFit> day_fits;
  std::vector<long long> nonconverged_days;
  double nonconverged_fraction = 0.0;
};

/// Fits every day, combines, and standardizes by the HAC variance. Throws
/// InvalidArgument for T < 2 and NonConvergenceError when more than
/// `max_nonconverged_fraction` of the days failed to converge.
CombinedTest panel_test(const PanelSeries& panel, const ScoreTable& scores,
                        const PanelOptions& options = {});

struct SyntheticPanelConfig {
  DistributionSpec dist_x = DistributionSpec::pareto(2.3);
  int T = 200;
  int n = 1771;
  int m = 30;
  double rho = 0.0;
  double gamma = 0.0;
  std::vector<int> excluded{1, 2};
  std::uint64_t seed = 0;
};

/// Independent days: Y = beta1 X + eps ranked on X from the top, plus gamma
/// on the excluded ranks.
PanelSeries synthetic_panel(const SyntheticPanelConfig& config);

std::string combined_test_to_json(const CombinedTest& test, const PanelSeries& panel,
                                  int indent = 2);

}  // namespace drank::panel
