#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "drank/estimator.hpp"

namespace drank {

/// Standardized ranked responses (Y_[r:n] - mu_hat) / sigma_hat, r = 1..m.
std::vector<double> standardized_responses(const RankedSample& sample);

/// e_r = (Y_[r:n] - mu_hat)/sigma_hat - rho_hat alpha_r for r = 1..m.
/// Throws ProvenanceError when `estimate` was not fitted on this sample and
/// table.
std::vector<double> residuals(const RankedSample& sample, const ScoreTable& scores,
                              const Estimate& estimate);

/// Sum of squared residuals of the through-origin fit.
double rss(const RankedSample& sample, const ScoreTable& scores, const Estimate& estimate);

/// Theoretical variance of the standardized residual at rank r, evaluated
/// term by term. Responses are in standardized units (sigma_Y = 1) unless
/// `sigma_y` says otherwise. May be negative if the inputs are inconsistent;
/// callers should check.
double residual_variance_theoretical(const ScoreTable& scores, double rho, int r, double s,
                                     double sigma_y = 1.0, const VarianceOptions& options = {});

struct InterceptFit {
  double intercept = 0.0;
  double slope = 0.0;
  double intercept_std_err = 0.0;
  /// |intercept| / intercept_std_err; 0 for an exact zero intercept.
  double intercept_z() const;
};

/// Ordinary least squares with intercept of the standardized responses on
/// the scores over ranks 1..m. Needs m >= 3.
InterceptFit intercept_check(const RankedSample& sample, const ScoreTable& scores);

struct ResidualReport {
  std::vector<double> alpha;
  std::vector<double> std_y;
  std::vector<double> fitted;
  std::vector<double> residuals;
  double rss = 0.0;
  InterceptFit intercept_fit;
  /// Slope of the residuals regressed (with intercept) on the scores.
  double trend_slope = 0.0;
  std::optional<std::vector<double>> per_rank_theoretical_var;
  /// Ranks whose theoretical variance came out negative.
  std::vector<int> negative_variance_ranks;
  std::string score_table_id;
};

/// Residuals, RSS, intercept check and trend slope. The theoretical
/// variances (and the +-2 sd bands derived from them) are added when the
/// table carries beta for ranks 1..m.
ResidualReport residual_report(const RankedSample& sample, const ScoreTable& scores,
                               const Estimate& estimate);

/// CSV with columns rank, alpha, std_y, fitted, residual and, when the
/// theoretical variances exist, band_lo, band_hi.
void write_residual_csv(std::ostream& out, const ResidualReport& report,
                        const std::vector<std::string>& comments = {});

struct CandidateMetrics {
  std::size_t input_index = 0;
  std::string label;
  std::string score_table_id;
  double rho_hat = 0.0;
  double rss = 0.0;
  double intercept = 0.0;
  double intercept_z = 0.0;
  double trend_slope = 0.0;
};

/// Candidates ordered best first: smaller RSS, then smaller
/// |intercept|/stderr, then earlier input position.
std::vector<CandidateMetrics> select_score(const RankedSample& sample,
                                           const std::vector<ScoreTable>& candidates);

std::string selection_to_json(const std::vector<CandidateMetrics>& ranking, int indent = 2);

}  // namespace drank
