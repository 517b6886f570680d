#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "drank/score_table.hpp"

namespace drank::cli {

/// The full parameter set of one invocation. Its digest is embedded in
/// every artifact the run writes.
struct RunConfig {
  nlohmann::json params = nlohmann::json::object();

  explicit RunConfig(const std::string& command) { params["command"] = command; }
  /// SHA-256 of the compact, key-sorted JSON form.
  std::string digest() const;
  /// "# "-less comment lines for CSV headers.
  std::vector<std::string> comments() const;
  /// Adds "run_config" and "run_config_digest" members.
  void attach(nlohmann::json& doc) const;
};

/// How score tables are obtained from a spec string.
struct TableSource {
  Tail tail = Tail::upper;
  ScoreMethod method = ScoreMethod::exact_quadrature;
  std::size_t reps = 100000;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::optional<std::filesystem::path> cache_dir;

  void record(RunConfig& config) const;
};

/// A score table from "identity", a distribution spec such as
/// "gamma(3,3)", or the path of a table JSON file. `beta_reps` > 0 adds
/// sigma2 and a Monte Carlo beta block with that many replicates.
ScoreTable resolve_scores(const std::string& spec, int n, int m, const TableSource& source,
                          std::size_t beta_reps = 0,
                          scores::CovMethod beta_method = scores::CovMethod::monte_carlo);

/// Builds the distribution named by `family` with optional parameters; a
/// name that already carries its parameters, e.g. "gamma(3,3)", is parsed.
DistributionSpec distribution_from_flags(const std::string& family, std::optional<double> alpha,
                                         std::optional<double> shape, std::optional<double> rate);

/// Writes `text` to `path`, or to stdout for "-" or an empty path.
void write_output(const std::string& path, const std::string& text);

struct ScoresArgs {
  DistributionSpec dist = DistributionSpec::normal();
  int n = 0;
  std::optional<int> m;
  TableSource source;
  bool sigma2 = false;
  std::size_t beta_reps = 0;
  std::string out;
  std::string json_out;
};
void cmd_scores(const ScoresArgs& args);

struct FitArgs {
  std::string data;
  std::string scores = "normal";
  std::string estimator = "lse";
  std::string alternative = "two_sided";
  std::string noise = "conditional_response";
  int beta_power = 2;
  bool variance = true;
  std::size_t beta_reps = 20000;
  std::string beta_method = "mc";
  TableSource source;
  std::string out;
};
void cmd_fit(const FitArgs& args);

struct DiagnoseArgs {
  std::string data;
  std::vector<std::string> candidates{"identity", "uniform", "normal", "gamma(3,3)"};
  bool bands = false;
  std::size_t beta_reps = 20000;
  TableSource source;
  std::filesystem::path out_dir;
};
void cmd_diagnose(const DiagnoseArgs& args);

struct SimulateArgs {
  std::filesystem::path config;
  std::filesystem::path out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> reps;
  std::optional<unsigned> workers;
  bool fast = false;
  std::optional<std::filesystem::path> cache_dir;
};
void cmd_simulate(const SimulateArgs& args);

struct PanelArgs {
  std::string data;
  std::string scores = "pareto(2.3)";
  std::optional<int> lag;
  std::string hac_form = "one_sided";
  std::vector<int> excluded{1, 2};
  double tol = 1e-8;
  int max_iter = 100;
  double max_nonconverged = 0.2;
  TableSource source;
  std::string out;
};
void cmd_panel(const PanelArgs& args);

/// Synthetic inputs: a single dataset CSV (rank, y) or a panel CSV
/// (day, rank, y).
struct SynthArgs {
  std::string kind = "dataset";
  DistributionSpec dist = DistributionSpec::normal();
  int n = 500;
  int m = 20;
  int days = 1;
  double rho = 0.0;
  double gamma = 0.0;
  std::uint64_t seed = 0;
  Tail tail = Tail::upper;
  std::string out;
};
void cmd_synth(const SynthArgs& args);

}  // namespace drank::cli
