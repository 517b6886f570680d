#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "drank/distribution.hpp"
#include "drank/order_statistics.hpp"

namespace drank {

enum class ScoreMethod {
  exact_quadrature,
  david_johnson,
  monte_carlo,
  identity,  // the raw rank, standardized over all n ranks
  supplied,  // caller-provided values
};

std::string to_string(ScoreMethod method);
std::string to_string(Tail tail);
ScoreMethod parse_score_method(const std::string& text);
Tail parse_tail(const std::string& text);

struct MonteCarloSettings {
  std::size_t reps = 100000;
  std::uint64_t seed = 0;
};

/// Scores alpha for ranks 1..m of a sample of size n, plus optional
/// order-statistic variances (sigma2) and covariances (beta), all indexed by
/// rank. Rank-to-order-statistic mapping is fixed by tail().
class ScoreTable {
 public:
  struct Parts {
    std::string label;
    std::optional<DistributionSpec> dist;
    int n = 0;
    Tail tail = Tail::lower;
    ScoreMethod method = ScoreMethod::supplied;
    std::optional<MonteCarloSettings> mc;
    std::optional<scores::CovMethod> beta_method;
    std::optional<MonteCarloSettings> beta_mc;
    std::vector<double> alpha;
    std::optional<double> alpha_tail_mean;
    std::optional<std::vector<double>> sigma2;
    std::optional<std::vector<double>> stderr_;
    std::optional<Eigen::MatrixXd> beta;
  };

  /// Validates shapes and the invariants (strict monotonicity in the
  /// order-statistic index, symmetric beta with nonnegative diagonal).
  explicit ScoreTable(Parts parts);

  /// Standardized identity scores: r mapped to (r - (n+1)/2) / sd(1..n).
  static ScoreTable identity(int n, int m, Tail tail = Tail::lower);

  /// Hand-built table; alpha_tail_mean defaults to the zero-sum completion.
  static ScoreTable supplied(int n, std::vector<double> alpha, Tail tail = Tail::lower,
                             std::string label = "supplied");

  const std::string& label() const noexcept { return p_.label; }
  const std::optional<DistributionSpec>& dist() const noexcept { return p_.dist; }
  int n() const noexcept { return p_.n; }
  int m() const noexcept { return static_cast<int>(p_.alpha.size()); }
  Tail tail() const noexcept { return p_.tail; }
  ScoreMethod method() const noexcept { return p_.method; }
  const std::optional<MonteCarloSettings>& mc() const noexcept { return p_.mc; }
  const std::optional<scores::CovMethod>& beta_method() const noexcept {
    return p_.beta_method;
  }

  std::span<const double> alpha() const noexcept { return p_.alpha; }
  /// 1-based rank.
  double alpha(int rank) const { return p_.alpha.at(static_cast<std::size_t>(rank - 1)); }
  const std::optional<double>& alpha_tail_mean() const noexcept { return p_.alpha_tail_mean; }
  const std::optional<std::vector<double>>& sigma2() const noexcept { return p_.sigma2; }
  const std::optional<std::vector<double>>& alpha_stderr() const noexcept {
    return p_.stderr_;
  }
  const std::optional<Eigen::MatrixXd>& beta() const noexcept { return p_.beta; }

  /// Content digest; two tables with equal ids hold identical values.
  const std::string& id() const noexcept { return id_; }
  /// Cache key: depends on the request, not on the computed values.
  std::string key() const;

  /// Versioned JSON container including the digest.
  std::string to_json_text() const;
  /// Throws InvalidArgument when the text is malformed or the digest does
  /// not match the payload.
  static ScoreTable from_json_text(const std::string& text);

 private:
  std::string payload_text() const;

  Parts p_;
  std::string id_;
};

struct BuildOptions {
  ScoreMethod method = ScoreMethod::exact_quadrature;
  Tail tail = Tail::lower;
  bool with_sigma2 = false;
  bool with_beta = false;
  scores::CovMethod beta_method = scores::CovMethod::monte_carlo;
  MonteCarloSettings mc{};       // alpha when method == monte_carlo
  MonteCarloSettings beta_mc{20000, 0};
  unsigned workers = 1;
};

/// Cache key a table built from these inputs would carry.
std::string score_table_key(const DistributionSpec& dist, int n, int m,
                            const BuildOptions& options);

/// One JSON file per key under a directory. Unreadable or digest-mismatched
/// files are treated as absent.
class ScoreCache {
 public:
  explicit ScoreCache(std::filesystem::path dir);

  std::filesystem::path path_for(const std::string& key) const;
  std::optional<ScoreTable> load(const std::string& key) const;
  void store(const ScoreTable& table) const;

 private:
  std::filesystem::path dir_;
};

ScoreTable build_score_table(const DistributionSpec& dist, int n, int m,
                             const BuildOptions& options = {},
                             const ScoreCache* cache = nullptr);

/// CSV with columns rank, alpha, then sigma2 and stderr when present.
/// Each `comment` becomes a leading "# " line.
void write_score_csv(std::ostream& out, const ScoreTable& table,
                     const std::vector<std::string>& comments = {});

}  // namespace drank
