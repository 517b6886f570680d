#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "drank/distribution.hpp"
#include "drank/ranked_sample.hpp"
#include "drank/rng.hpp"
#include "drank/score_table.hpp"

namespace drank::sim {

struct Dataset {
  /// All n ranks observed (m = n), ordered by the covariate's rank.
  RankedSample sample;
  double true_rho = 0.0;
};

/// Y = beta1 X + eps with X from the standardized `dist_x`, eps ~ N(0, 1)
/// and beta1 = rho / sqrt(1 - rho^2), so corr(X, Y) = rho.
Dataset gen_dataset(const DistributionSpec& dist_x, int n, double rho, Rng& rng,
                    Tail tail = Tail::upper);
Dataset gen_dataset(const DistributionSpec& dist_x, int n, double rho, std::uint64_t seed,
                    Tail tail = Tail::upper);

/// A candidate score function: a distribution's D-rank scores, or the
/// standardized identity scores when `dist` is empty.
struct ScoreCandidate {
  std::optional<DistributionSpec> dist;

  static ScoreCandidate identity() { return {}; }
  static ScoreCandidate of(DistributionSpec d) { return {std::move(d)}; }
  /// "1:N" for identity, else a short family label (U, N, G, HN, P).
  std::string label() const;
  /// Accepts "identity" or anything DistributionSpec::parse accepts.
  static ScoreCandidate parse(const std::string& text);
};

struct SimConfig {
  DistributionSpec dist_x = DistributionSpec::normal();
  std::vector<double> rho_values{0.0, 0.3, 0.5, 0.7};
  int n = 500;
  std::vector<int> m_values{20, 50};
  std::vector<ScoreCandidate> candidates{
      ScoreCandidate::identity(), ScoreCandidate::of(DistributionSpec::uniform()),
      ScoreCandidate::of(DistributionSpec::normal()),
      ScoreCandidate::of(DistributionSpec::gamma(3.0, 3.0))};
  std::size_t reps = 1000;
  std::uint64_t seed = 0;
  Tail tail = Tail::upper;
  unsigned workers = 1;

  static constexpr std::size_t kFastReps = 200;
  /// Throws InvalidArgument on an inconsistent configuration.
  void validate() const;
};

struct CellResult {
  std::string dist_x;
  std::string score;
  double rho = 0.0;
  int n = 0;
  int m = 0;
  std::size_t reps = 0;
  std::size_t failures = 0;
  double bias = 0.0;
  double mse = 0.0;
  double bias_stderr = 0.0;
  double mse_stderr = 0.0;
};

struct SimReport {
  std::vector<CellResult> cells;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
};

/// Every replicate draws one dataset per (rho, replicate) from a stream
/// derived from (seed, rho index, replicate); all m values and candidates
/// are fitted on that same dataset. The report does not depend on workers.
SimReport run_study(const SimConfig& config, const ScoreCache* cache = nullptr);

void write_report_csv(std::ostream& out, const SimReport& report,
                      const std::vector<std::string>& comments = {});

/// Text table with one block per (n, m), rows rho x score and a Bias/MSE
/// column pair per data distribution. Reports may cover different dist_x.
std::string format_table(const std::vector<SimReport>& reports);

struct OptimalityReport {
  std::vector<std::string> labels;
  std::vector<double> mean_corr;
  std::vector<double> corr_stderr;
  /// Index of the candidate generated from the data distribution, if any.
  std::optional<std::size_t> correct;
  /// mean_corr[correct] - mean_corr[i] and its paired standard error.
  std::vector<double> gap;
  std::vector<double> gap_stderr;
  /// Candidate indices ordered by decreasing mean correlation.
  std::vector<std::size_t> ordering;
  std::size_t reps = 0;
};

/// Mean sample correlation between the ranked responses and each
/// candidate's scores over `reps` fully ranked datasets.
OptimalityReport verify_optimality(const DistributionSpec& dist_x, int n, double rho,
                                   std::size_t reps, std::uint64_t seed,
                                   const std::vector<ScoreCandidate>& candidates,
                                   unsigned workers = 1, const ScoreCache* cache = nullptr);

/// Scores for a candidate with ranks 1..m of n.
ScoreTable candidate_table(const ScoreCandidate& candidate, int n, int m, Tail tail,
                           unsigned workers = 1, const ScoreCache* cache = nullptr);

}  // namespace drank::sim
