#include <benchmark/benchmark.h>

#include "drank/estimator.hpp"
#include "drank/order_statistics.hpp"
#include "drank/panel.hpp"
#include "drank/score_table.hpp"
#include "drank/simulation.hpp"

namespace {

using drank::DistributionSpec;
using drank::Tail;

void BM_MosExactNormal(benchmark::State& state) {
  const auto d = DistributionSpec::normal();
  const int n = static_cast<int>(state.range(0));
  int r = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(drank::scores::mos_exact(d, r, n));
    r = r % n + 1;
  }
}
BENCHMARK(BM_MosExactNormal)->Arg(20)->Arg(500)->Arg(2000);

void BM_MosExactPareto(benchmark::State& state) {
  const auto d = DistributionSpec::pareto(2.3);
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(drank::scores::mos_exact(d, n, n));
}
BENCHMARK(BM_MosExactPareto)->Arg(100)->Arg(1771);

void BM_MosMonteCarlo(benchmark::State& state) {
  const auto d = DistributionSpec::gamma(3, 3);
  for (auto _ : state)
    benchmark::DoNotOptimize(drank::scores::mos_mc(d, 100, static_cast<std::size_t>(state.range(0)), 1));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MosMonteCarlo)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

void BM_FitLse(benchmark::State& state) {
  const int n = 2000, m = static_cast<int>(state.range(0));
  drank::BuildOptions o;
  o.tail = Tail::upper;
  const auto t = drank::build_score_table(DistributionSpec::normal(), n, m, o);
  const auto s = drank::sim::gen_dataset(DistributionSpec::normal(), n, 0.5, 1).sample.censored(m);
  for (auto _ : state) benchmark::DoNotOptimize(drank::fit_lse(s, t).rho_hat);
}
BENCHMARK(BM_FitLse)->Arg(20)->Arg(100);

void BM_FitDayIterative(benchmark::State& state) {
  drank::BuildOptions o;
  o.tail = Tail::upper;
  const auto t = drank::build_score_table(DistributionSpec::pareto(2.3), 1771, 30, o);
  drank::panel::SyntheticPanelConfig c;
  c.T = 1;
  c.rho = 0.3;
  c.gamma = 1.5;
  const auto p = drank::panel::synthetic_panel(c);
  for (auto _ : state) benchmark::DoNotOptimize(drank::panel::fit_day_iterative(p.days[0], t).rho);
}
BENCHMARK(BM_FitDayIterative);

}  // namespace

BENCHMARK_MAIN();
