// Acceptance suite: one PASS/FAIL line per criterion.
//   drank_acceptance                  run all criteria
//   drank_acceptance --criterion N    run one
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/core.h>

#include "drank/diagnostics.hpp"
#include "drank/estimator.hpp"
#include "drank/order_statistics.hpp"
#include "drank/panel.hpp"
#include "drank/parallel.hpp"
#include "drank/rng.hpp"
#include "drank/score_table.hpp"
#include "drank/simulation.hpp"
#include "drank/summation.hpp"

namespace {

using drank::DistributionSpec;
using drank::RankedSample;
using drank::ScoreTable;
using drank::Tail;
using drank::sim::ScoreCandidate;

struct Outcome {
  bool pass = false;
  std::string detail;
};

unsigned g_workers = 1;

const drank::sim::CellResult& find_cell(const drank::sim::SimReport& r, const std::string& score,
                                        double rho, int m) {
  for (const auto& c : r.cells)
    if (c.score == score && c.rho == rho && c.m == m) return c;
  throw std::runtime_error("missing cell " + score);
}

Outcome uniform_exactness() {
  double worst = 0.0;
  for (int n : {10, 100, 2000})
    for (int r = 1; r <= n; ++r) {
      const double closed = std::sqrt(12.0) * (static_cast<double>(r) / (n + 1) - 0.5);
      worst = std::max(worst,
                       std::abs(drank::scores::mos_exact(DistributionSpec::uniform(), r, n) - closed));
    }
  return {worst < 1e-10, fmt::format("max error {:.3g} (limit 1e-10)", worst)};
}

Outcome method_agreement() {
  const int n = 500;
  std::string detail;
  bool pass = true;
  for (const auto& d : {DistributionSpec::normal(), DistributionSpec::gamma(3, 3)}) {
    const auto mc = drank::scores::mos_mc(d, n, 1000000, 2026, g_workers);
    std::vector<double> exact(n);
    drank::parallel_for(n, g_workers, [&](std::size_t i) {
      exact[i] = drank::scores::mos_exact(d, static_cast<int>(i) + 1, n);
    });
    double worst = 0.0;
    for (int i = 0; i < n; ++i)
      worst = std::max(worst, std::abs(exact[i] - mc.alpha[i]) / mc.stderr_[i]);
    pass = pass && worst < 4.0;
    detail += fmt::format("{}: max |exact-mc|/se {:.2f}; ", d.key(), worst);
  }
  detail += "limit 4";
  return {pass, detail};
}

drank::sim::SimConfig table_config(DistributionSpec dist_x, int n, std::vector<int> m,
                                   std::vector<double> rho,
                                   std::vector<ScoreCandidate> candidates) {
  drank::sim::SimConfig c;
  c.dist_x = std::move(dist_x);
  c.n = n;
  c.m_values = std::move(m);
  c.rho_values = std::move(rho);
  c.candidates = std::move(candidates);
  c.reps = 1000;
  c.seed = 20260;
  c.workers = g_workers;
  return c;
}

Outcome table2_cell() {
  const auto r = drank::sim::run_study(table_config(DistributionSpec::normal(), 2000, {100}, {0.7},
                                                    {ScoreCandidate::of(DistributionSpec::normal())}));
  const auto& c = find_cell(r, "N", 0.7, 100);
  const bool pass = std::abs(c.bias - 0.0010) <= 0.005 && std::abs(c.mse / 0.0011 - 1.0) <= 0.3;
  return {pass, fmt::format("bias {:.4f} (0.0010 +- 0.005), mse {:.5f} (0.0011 +- 30%)", c.bias,
                            c.mse)};
}

Outcome misspecification_penalty() {
  const auto gamma = DistributionSpec::gamma(3, 3);
  const auto r = drank::sim::run_study(table_config(
      gamma, 500, {20}, {0.7}, {ScoreCandidate::identity(), ScoreCandidate::of(gamma)}));
  const auto& id = find_cell(r, "1:N", 0.7, 20);
  const auto& g = find_cell(r, "G(3,3)", 0.7, 20);
  const bool pass = std::abs(id.bias / 0.4916 - 1.0) <= 0.2 && std::abs(g.bias) < 0.02;
  return {pass, fmt::format("identity bias {:.4f} (0.4916 +- 20%), gamma bias {:.4f} (|.| < 0.02)",
                            id.bias, g.bias)};
}

Outcome null_calibration() {
  // Null-row MSE for uniform, normal and gamma data at m = 20, 50, 100 of
  // n = 500, scores in the order identity, U, N, G.
  const std::map<std::string, std::map<int, std::vector<double>>> paper{
      {"uniform", {{20, {0.0167, 0.0175, 0.0103, 0.0059}},
                   {50, {0.0077, 0.0075, 0.0056, 0.0035}},
                   {100, {0.0042, 0.0040, 0.0035, 0.0028}}}},
      {"normal", {{20, {0.0165, 0.0174, 0.0104, 0.0059}},
                  {50, {0.0076, 0.0071, 0.0054, 0.0039}},
                  {100, {0.0042, 0.0043, 0.0036, 0.0027}}}},
      {"gamma", {{20, {0.0184, 0.0170, 0.0097, 0.0057}},
                 {50, {0.0069, 0.0076, 0.0053, 0.0034}},
                 {100, {0.0042, 0.0039, 0.0040, 0.0027}}}}};
  const std::vector<DistributionSpec> data{DistributionSpec::uniform(), DistributionSpec::normal(),
                                           DistributionSpec::gamma(3, 3)};
  const std::vector<std::string> names{"uniform", "normal", "gamma"};
  const std::vector<std::string> labels{"1:N", "U", "N", "G(3,3)"};
  bool pass = true;
  double worst_z = 0.0, worst_rel = 0.0;
  std::string worst_cell;
  for (std::size_t d = 0; d < data.size(); ++d) {
    auto cfg = drank::sim::SimConfig{};
    cfg = table_config(data[d], 500, {20, 50, 100}, {0.0}, cfg.candidates);
    const auto r = drank::sim::run_study(cfg);
    for (int m : {20, 50, 100})
      for (std::size_t s = 0; s < labels.size(); ++s) {
        const auto& c = find_cell(r, labels[s], 0.0, m);
        const double z = std::abs(c.bias) / c.bias_stderr;
        const double rel = std::abs(c.mse / paper.at(names[d]).at(m)[s] - 1.0);
        if (z >= 3.0 || rel > 0.3) pass = false;
        worst_z = std::max(worst_z, z);
        if (rel > worst_rel) {
          worst_rel = rel;
          worst_cell = fmt::format("{} data, m={}, {} score: mse {:.4f} vs {:.4f}", names[d], m,
                                   labels[s], c.mse, paper.at(names[d]).at(m)[s]);
        }
      }
  }
  return {pass, fmt::format("36 cells; max |bias|/se {:.2f} (< 3); max MSE deviation {:.1f}% "
                            "(<= 30%) at {}",
                            worst_z, 100 * worst_rel, worst_cell)};
}

Outcome optimality() {
  const auto gamma = DistributionSpec::gamma(3, 3);
  const auto r = drank::sim::verify_optimality(
      gamma, 2000, 0.7, 500, 77,
      {ScoreCandidate::identity(), ScoreCandidate::of(DistributionSpec::uniform()),
       ScoreCandidate::of(DistributionSpec::normal()), ScoreCandidate::of(gamma)},
      g_workers);
  bool pass = r.correct.has_value();
  std::string detail;
  double worst = INFINITY;
  for (std::size_t i = 0; i < r.labels.size(); ++i) {
    if (r.correct && i == *r.correct) continue;
    const double z = r.gap[i] / r.gap_stderr[i];
    worst = std::min(worst, z);
    detail += fmt::format("{} gap {:.5f} ({:.1f} se); ", r.labels[i], r.gap[i], z);
  }
  pass = pass && worst > 3.0;
  return {pass, detail + "limit 3 se"};
}

Outcome inference_calibration() {
  const int n = 2000, m = 100, reps = 1000;
  drank::BuildOptions o;
  o.tail = Tail::upper;
  o.with_beta = true;
  o.beta_mc = {20000, 7};
  o.workers = g_workers;
  const auto normal = DistributionSpec::normal();
  const ScoreTable t = drank::build_score_table(normal, n, m, o);
  std::vector<int> covered(reps), rejected(reps);
  drank::parallel_for(reps, g_workers, [&](std::size_t j) {
    {
      auto rng = drank::make_rng(707, {0, j});
      const auto s = drank::sim::gen_dataset(normal, n, 0.3, rng).sample.censored(m);
      const auto e = drank::fit_lse(s, t);
      covered[j] = std::abs(e.rho_hat - 0.3) <= 1.959963984540054 * *e.std_err;
    }
    {
      auto rng = drank::make_rng(707, {1, j});
      const auto s = drank::sim::gen_dataset(normal, n, 0.0, rng).sample.censored(m);
      rejected[j] = drank::fit_lse(s, t).p_value < 0.05;
    }
  });
  const double coverage = std::accumulate(covered.begin(), covered.end(), 0) / double(reps);
  const double size = std::accumulate(rejected.begin(), rejected.end(), 0) / double(reps);
  const bool pass = coverage >= 0.92 && coverage <= 0.98 && size >= 0.03 && size <= 0.07;
  return {pass, fmt::format("coverage {:.3f} in [0.92, 0.98], size {:.3f} in [0.03, 0.07]",
                            coverage, size)};
}

Outcome exact_identities() {
  double worst_orth = 0, worst_mod = 0, worst_hac = 0, worst_affine = 0;
  const std::vector<DistributionSpec> dists{DistributionSpec::normal(), DistributionSpec::gamma(3, 3),
                                            DistributionSpec::pareto(2.3)};
  for (std::size_t d = 0; d < dists.size(); ++d) {
    drank::BuildOptions o;
    o.tail = Tail::upper;
    const ScoreTable full = drank::build_score_table(dists[d], 200, 200, o);
    const ScoreTable top = drank::build_score_table(dists[d], 200, 30, o);
    for (std::uint64_t j = 0; j < 20; ++j) {
      auto rng = drank::make_rng(88, {d, j});
      const RankedSample all = drank::sim::gen_dataset(dists[d], 200, 0.4, rng).sample;
      const RankedSample s = all.censored(30);

      const auto e = drank::fit_lse(s, top);
      const auto res = drank::residuals(s, top, e);
      drank::CompensatedSum ea, aa;
      for (int r = 1; r <= 30; ++r) {
        ea += res[r - 1] * top.alpha(r);
        aa += top.alpha(r) * top.alpha(r);
      }
      worst_orth = std::max(worst_orth, std::abs(ea.value()) / std::sqrt(aa.value()));

      worst_mod = std::max(worst_mod, std::abs(drank::fit_modified(all, full).rho_hat -
                                               drank::fit_lse(all, full).rho_hat));

      std::vector<double> u(all.y_top().begin(), all.y_top().end());
      const double mean = std::accumulate(u.begin(), u.end(), 0.0) / u.size();
      double v = 0;
      for (double x : u) v += (x - mean) * (x - mean);
      v /= u.size();
      worst_hac = std::max(worst_hac, std::abs(drank::panel::hac_variance(u, 0).variance - v) / v);

      std::vector<double> a, b;
      for (double y : s.y_top()) a.push_back(-3.0 + 2.5 * y);
      for (double y : s.y_rest()) b.push_back(-3.0 + 2.5 * y);
      const RankedSample shifted(a, b, Tail::upper);
      worst_affine =
          std::max(worst_affine, std::abs(drank::fit_lse(shifted, top).rho_hat - e.rho_hat));
    }
  }
  const bool pass = worst_orth <= 1e-12 && worst_mod <= 1e-12 && worst_hac <= 1e-12 &&
                    worst_affine <= 1e-12;
  return {pass, fmt::format("orthogonality {:.2g}, modified vs lse {:.2g}, hac lag 0 {:.2g}, "
                            "affine {:.2g} (all <= 1e-12)",
                            worst_orth, worst_mod, worst_hac, worst_affine)};
}

Outcome panel_size() {
  const int panels = 1000;
  drank::BuildOptions o;
  o.tail = Tail::upper;
  o.workers = g_workers;
  const ScoreTable t = drank::build_score_table(DistributionSpec::pareto(2.3), 1771, 30, o);
  std::vector<int> rejected(panels);
  drank::parallel_for(panels, g_workers, [&](std::size_t k) {
    drank::panel::SyntheticPanelConfig c;
    c.T = 200;
    c.rho = 0.0;
    c.seed = 90000 + k;
    rejected[k] = drank::panel::panel_test(drank::panel::synthetic_panel(c), t).p_value < 0.05;
  });
  const double rate = std::accumulate(rejected.begin(), rejected.end(), 0) / double(panels);
  return {rate >= 0.03 && rate <= 0.07,
          fmt::format("rejection rate {:.3f} over {} null panels, in [0.03, 0.07]", rate, panels)};
}

Outcome score_selection() {
  const int n = 2000, m = 100, reps = 500;
  const auto gamma = DistributionSpec::gamma(3, 3);
  drank::BuildOptions o;
  o.tail = Tail::upper;
  o.workers = g_workers;
  const std::vector<ScoreTable> tables{drank::build_score_table(DistributionSpec::uniform(), n, m, o),
                                       drank::build_score_table(DistributionSpec::normal(), n, m, o),
                                       drank::build_score_table(gamma, n, m, o)};
  std::vector<int> first(reps);
  drank::parallel_for(reps, g_workers, [&](std::size_t j) {
    auto rng = drank::make_rng(4242, {j});
    const auto s = drank::sim::gen_dataset(gamma, n, 0.7, rng).sample.censored(m);
    first[j] = drank::select_score(s, tables).front().input_index == 2;
  });
  const double rate = std::accumulate(first.begin(), first.end(), 0) / double(reps);
  return {rate >= 0.9, fmt::format("gamma score ranked first in {:.3f} of {} datasets (>= 0.90)",
                                   rate, reps)};
}

struct Criterion {
  int number;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"drank acceptance suite"};
  int only = 0;
  app.add_option("--criterion", only, "Run a single criterion")->check(CLI::Range(1, 10));
  app.add_option("--workers", g_workers, "Worker threads")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {1, "uniform score exactness", uniform_exactness},
      {2, "quadrature vs Monte Carlo scores", method_agreement},
      {3, "n=2000 m=100 normal cell", table2_cell},
      {4, "misspecification penalty", misspecification_penalty},
      {5, "null calibration", null_calibration},
      {6, "correct score maximizes correlation", optimality},
      {7, "interval coverage and test size", inference_calibration},
      {8, "exact identities", exact_identities},
      {9, "panel test size", panel_size},
      {10, "score selection", score_selection},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    if (only && c.number != only) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    fmt::print("{} criterion {:>2} {}: {}\n", o.pass ? "PASS" : "FAIL", c.number, c.name, o.detail);
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
