#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "drank/errors.hpp"
#include "drank_cli/commands.hpp"
#include "drank_cli/input.hpp"

namespace {

using namespace drank::cli;

std::string g_tail = "upper";
std::string g_method = "exact";
std::string g_cache_dir;
bool g_no_cache = false;

std::optional<std::filesystem::path> default_cache_dir() {
  if (g_no_cache) return std::nullopt;
  if (!g_cache_dir.empty()) return std::filesystem::path(g_cache_dir);
  if (const char* d = std::getenv("DRANK_CACHE_DIR"); d && *d) return std::filesystem::path(d);
  if (const char* d = std::getenv("XDG_CACHE_HOME"); d && *d)
    return std::filesystem::path(d) / "drank";
  if (const char* d = std::getenv("HOME"); d && *d)
    return std::filesystem::path(d) / ".cache" / "drank";
  return std::nullopt;
}

void add_table_flags(CLI::App* cmd, TableSource& source) {
  cmd->add_option("--tail", g_tail, "Which end of the covariate the ranks count from")
      ->check(CLI::IsMember({"upper", "lower"}))
      ->capture_default_str();
  cmd->add_option("--method", g_method, "Score method: exact, approx or mc")
      ->check(CLI::IsMember({"exact", "approx", "mc", "exact_quadrature", "david_johnson",
                             "monte_carlo"}))
      ->capture_default_str();
  cmd->add_option("--seed", source.seed, "Root seed for Monte Carlo work")->capture_default_str();
  cmd->add_option("--workers", source.workers, "Worker threads")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--cache-dir", g_cache_dir, "Score-table cache directory");
  cmd->add_flag("--no-cache", g_no_cache, "Do not read or write the score-table cache");
}

void finish_table_flags(TableSource& source) {
  source.tail = drank::parse_tail(g_tail);
  source.method = drank::parse_score_method(g_method);
  source.cache_dir = default_cache_dir();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"drank: distribution-guided scores for partially ranked data"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "drank 0.1.0");

  // scores
  ScoresArgs scores;
  std::string dist_name = "normal";
  std::optional<double> alpha, shape, rate;
  auto* c_scores = app.add_subcommand("scores", "Build a score table and write it as CSV");
  c_scores->add_option("--dist", dist_name, "uniform, normal, half_normal, gamma or pareto")
      ->capture_default_str();
  c_scores->add_option("--alpha", alpha, "Pareto tail index (> 2)");
  c_scores->add_option("--shape", shape, "Gamma shape (default 3)");
  c_scores->add_option("--rate", rate, "Gamma rate (default 3)");
  c_scores->add_option("--n", scores.n, "Sample size")->required()->check(CLI::PositiveNumber);
  c_scores->add_option("--m", scores.m, "Number of ranks (default n)")->check(CLI::PositiveNumber);
  c_scores->add_option("--reps", scores.source.reps, "Monte Carlo replicates for --method mc")
      ->capture_default_str();
  c_scores->add_flag("--sigma2", scores.sigma2, "Add order-statistic variances");
  c_scores->add_option("--beta-reps", scores.beta_reps,
                       "Add a Monte Carlo covariance block with this many replicates");
  c_scores->add_option("-o,--out", scores.out, "CSV output path (default stdout)");
  c_scores->add_option("--json", scores.json_out, "Also write the full table as JSON");
  add_table_flags(c_scores, scores.source);

  // fit
  FitArgs fit;
  auto* c_fit = app.add_subcommand("fit", "Estimate rho from a ranked dataset");
  c_fit->add_option("--data", fit.data, "CSV with rank and y columns")->required();
  c_fit->add_option("--scores", fit.scores,
                    "identity, a distribution such as gamma(3,3), or a table JSON file")
      ->capture_default_str();
  c_fit->add_option("--estimator", fit.estimator, "lse or modified")
      ->check(CLI::IsMember({"lse", "modified"}))
      ->capture_default_str();
  c_fit->add_option("--alternative", fit.alternative, "two_sided or greater")
      ->check(CLI::IsMember({"two_sided", "greater"}))
      ->capture_default_str();
  c_fit->add_option("--noise", fit.noise, "conditional_response or order_statistic")
      ->check(CLI::IsMember({"conditional_response", "order_statistic"}))
      ->capture_default_str();
  c_fit->add_option("--beta-power", fit.beta_power, "Exponent of the covariance weights")
      ->check(CLI::Range(1, 2))
      ->capture_default_str();
  c_fit->add_option("--reps", fit.beta_reps, "Replicates for the score covariance block")
      ->capture_default_str();
  c_fit->add_option("--beta-method", fit.beta_method, "mc or approx")
      ->check(CLI::IsMember({"mc", "approx"}))
      ->capture_default_str();
  bool no_variance = false;
  c_fit->add_flag("--no-variance", no_variance, "Skip the asymptotic variance");
  c_fit->add_option("-o,--out", fit.out, "JSON output path (default stdout)");
  add_table_flags(c_fit, fit.source);

  // diagnose
  DiagnoseArgs diag;
  std::vector<std::string> candidates;
  auto* c_diag = app.add_subcommand("diagnose", "Residual diagnostics and score selection");
  c_diag->add_option("--data", diag.data, "CSV with rank and y columns")->required();
  c_diag->add_option("--candidates", candidates,
                     "Candidate scores, e.g. identity normal \"gamma(3,3)\"");
  c_diag->add_flag("--bands", diag.bands, "Add theoretical +-2 sd residual bands");
  c_diag->add_option("--reps", diag.beta_reps, "Replicates for the covariance block of --bands")
      ->capture_default_str();
  c_diag->add_option("--out-dir", diag.out_dir, "Output directory")->required();
  add_table_flags(c_diag, diag.source);

  // simulate
  SimulateArgs simulate;
  std::optional<std::uint64_t> sim_seed;
  std::optional<std::size_t> sim_reps;
  std::optional<unsigned> sim_workers;
  auto* c_sim = app.add_subcommand("simulate", "Run a bias/MSE study from an INI config");
  c_sim->add_option("--config", simulate.config, "INI file with [study] and [run] sections")
      ->required()
      ->check(CLI::ExistingFile);
  c_sim->add_option("--out-dir", simulate.out_dir, "Output directory")->required();
  c_sim->add_option("--seed", sim_seed, "Override the config seed");
  c_sim->add_option("--reps", sim_reps, "Override the replicate count");
  c_sim->add_option("--workers", sim_workers, "Worker threads")->check(CLI::PositiveNumber);
  c_sim->add_flag("--fast", simulate.fast, "Use the reduced replicate count");
  c_sim->add_option("--cache-dir", g_cache_dir, "Score-table cache directory");
  c_sim->add_flag("--no-cache", g_no_cache, "Do not read or write the score-table cache");

  // panel
  PanelArgs panel;
  auto* c_panel = app.add_subcommand("panel", "Combined test over a panel of ranked days");
  c_panel->add_option("--data", panel.data, "CSV with day, rank, y and covariate columns")
      ->required();
  c_panel->add_option("--scores", panel.scores, "Score spec or table JSON")->capture_default_str();
  c_panel->add_option("--lag", panel.lag, "Autocovariance truncation lag (default T^(1/3))")
      ->check(CLI::NonNegativeNumber);
  c_panel->add_option("--hac-form", panel.hac_form, "one_sided or symmetric")
      ->check(CLI::IsMember({"one_sided", "symmetric"}))
      ->capture_default_str();
  c_panel->add_option("--excluded", panel.excluded, "Ranks given their own level")
      ->delimiter(',')
      ->capture_default_str();
  c_panel->add_option("--tol", panel.tol, "Iteration tolerance")->capture_default_str();
  c_panel->add_option("--max-iter", panel.max_iter, "Iteration cap")->capture_default_str();
  c_panel->add_option("--max-nonconverged", panel.max_nonconverged,
                      "Largest fraction of non-converged days accepted")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  c_panel->add_option("--reps", panel.source.reps, "Monte Carlo replicates for --method mc")
      ->capture_default_str();
  c_panel->add_option("-o,--out", panel.out, "JSON output path (default stdout)");
  add_table_flags(c_panel, panel.source);

  // synth
  SynthArgs synth;
  std::string synth_dist = "normal";
  std::optional<double> synth_alpha;
  auto* c_synth = app.add_subcommand("synth", "Write a synthetic dataset or panel CSV");
  c_synth->add_option("--kind", synth.kind, "dataset or panel")
      ->check(CLI::IsMember({"dataset", "panel"}))
      ->capture_default_str();
  c_synth->add_option("--dist", synth_dist, "Covariate distribution")->capture_default_str();
  c_synth->add_option("--alpha", synth_alpha, "Pareto tail index");
  c_synth->add_option("--n", synth.n, "Observations per dataset or day")->capture_default_str();
  c_synth->add_option("--m", synth.m, "Ranked observations")->capture_default_str();
  c_synth->add_option("--days", synth.days, "Days in a panel")->capture_default_str();
  c_synth->add_option("--rho", synth.rho, "Correlation")->capture_default_str();
  c_synth->add_option("--gamma", synth.gamma, "Level shift on ranks 1 and 2 (panel)")
      ->capture_default_str();
  c_synth->add_option("--seed", synth.seed, "Seed")->capture_default_str();
  std::string synth_tail = "upper";
  c_synth->add_option("--tail", synth_tail, "upper or lower")
      ->check(CLI::IsMember({"upper", "lower"}))
      ->capture_default_str();
  c_synth->add_option("-o,--out", synth.out, "CSV output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (c_scores->parsed()) {
      finish_table_flags(scores.source);
      scores.dist = distribution_from_flags(dist_name, alpha, shape, rate);
      cmd_scores(scores);
    } else if (c_fit->parsed()) {
      finish_table_flags(fit.source);
      fit.variance = !no_variance;
      cmd_fit(fit);
    } else if (c_diag->parsed()) {
      finish_table_flags(diag.source);
      if (!candidates.empty()) {
        diag.candidates.clear();
        for (const auto& c : candidates)
          for (auto& part : split_list(c)) diag.candidates.push_back(part);
      }
      cmd_diagnose(diag);
    } else if (c_sim->parsed()) {
      simulate.seed = sim_seed;
      simulate.reps = sim_reps;
      simulate.workers = sim_workers;
      simulate.cache_dir = default_cache_dir();
      cmd_simulate(simulate);
    } else if (c_panel->parsed()) {
      finish_table_flags(panel.source);
      cmd_panel(panel);
    } else if (c_synth->parsed()) {
      synth.dist = distribution_from_flags(synth_dist, synth_alpha, std::nullopt, std::nullopt);
      synth.tail = drank::parse_tail(synth_tail);
      cmd_synth(synth);
    }
  } catch (const drank::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return drank::exit_code(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
