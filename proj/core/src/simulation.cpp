#include "drank/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "drank/errors.hpp"
#include "drank/estimator.hpp"
#include "drank/parallel.hpp"
#include "drank/summation.hpp"

namespace drank::sim {

Dataset gen_dataset(const DistributionSpec& dist_x, int n, double rho, Rng& rng, Tail tail) {
  if (n < 2) throw InvalidArgument("a dataset needs n >= 2");
  if (!(rho >= 0.0 && rho < 1.0)) throw InvalidArgument(fmt::format("rho must lie in [0, 1), got {}", rho));
  const double beta1 = rho / std::sqrt(1.0 - rho * rho);
  Sampler draw_x(dist_x);
  std::normal_distribution<double> draw_eps;
  std::vector<double> x(static_cast<std::size_t>(n)), y(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = draw_x(rng);
    y[i] = beta1 * x[i] + draw_eps(rng);
  }
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (tail == Tail::upper)
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] > x[b]; });
  else
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranked(x.size());
  for (std::size_t i = 0; i < order.size(); ++i) ranked[i] = y[order[i]];
  return {RankedSample(std::move(ranked), {}, tail), rho};
}

Dataset gen_dataset(const DistributionSpec& dist_x, int n, double rho, std::uint64_t seed,
                    Tail tail) {
  Rng rng = make_rng(seed, {});
  return gen_dataset(dist_x, n, rho, rng, tail);
}

std::string ScoreCandidate::label() const {
  if (!dist) return "1:N";
  switch (dist->family()) {
    case Family::uniform:
      return "U";
    case Family::normal:
      return "N";
    case Family::half_normal:
      return "HN";
    case Family::gamma:
      return fmt::format("G({},{})", dist->shape(), dist->rate());
    case Family::pareto:
      return fmt::format("P({})", dist->tail_index());
  }
  return dist->key();
}

ScoreCandidate ScoreCandidate::parse(const std::string& text) {
  if (text == "identity" || text == "1:N") return identity();
  return of(DistributionSpec::parse(text));
}

void SimConfig::validate() const {
  if (reps < 1) throw InvalidArgument("reps must be at least 1");
  if (n < 2) throw InvalidArgument("n must be at least 2");
  if (rho_values.empty()) throw InvalidArgument("no rho values given");
  if (m_values.empty()) throw InvalidArgument("no m values given");
  if (candidates.empty()) throw InvalidArgument("no score candidates given");
  for (double rho : rho_values)
    if (!(rho >= 0.0 && rho < 1.0))
      throw InvalidArgument(fmt::format("rho must lie in [0, 1), got {}", rho));
  for (int m : m_values)
    if (m < 1 || m > n) throw InvalidArgument(fmt::format("m={} outside 1..{}", m, n));
}

ScoreTable candidate_table(const ScoreCandidate& candidate, int n, int m, Tail tail,
                           unsigned workers, const ScoreCache* cache) {
  if (!candidate.dist) return ScoreTable::identity(n, m, tail);
  BuildOptions opts;
  opts.tail = tail;
  opts.workers = workers;
  return build_score_table(*candidate.dist, n, m, opts, cache);
}

namespace {

struct Moments {
  std::size_t count = 0;
  double mean = 0.0;
  double stderr_ = 0.0;
};

Moments summarize(const std::vector<double>& v) {
  CompensatedSum s;
  std::size_t k = 0;
  for (double x : v)
    if (std::isfinite(x)) {
      s += x;
      ++k;
    }
  Moments out;
  out.count = k;
  if (k == 0) {
    out.mean = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  out.mean = s.value() / k;
  if (k > 1) {
    CompensatedSum ss;
    for (double x : v)
      if (std::isfinite(x)) ss += (x - out.mean) * (x - out.mean);
    out.stderr_ = std::sqrt(ss.value() / (k - 1) / k);
  }
  return out;
}

}  // namespace

SimReport run_study(const SimConfig& config, const ScoreCache* cache) {
  config.validate();
  const int n = config.n;
  const int m_max = *std::max_element(config.m_values.begin(), config.m_values.end());
  std::vector<ScoreTable> tables;
  tables.reserve(config.candidates.size());
  for (const auto& c : config.candidates)
    tables.push_back(candidate_table(c, n, m_max, config.tail, config.workers, cache));

  const std::size_t n_rho = config.rho_values.size();
  const std::size_t n_m = config.m_values.size();
  const std::size_t n_c = config.candidates.size();
  const std::size_t reps = config.reps;
  const std::size_t per_dataset = n_m * n_c;
  std::vector<double> err(n_rho * reps * per_dataset, std::numeric_limits<double>::quiet_NaN());

  parallel_for(n_rho * reps, config.workers, [&](std::size_t job) {
    const std::size_t i = job / reps;
    const std::size_t j = job % reps;
    Rng rng = make_rng(config.seed, {i, j});
    const double rho = config.rho_values[i];
    const Dataset data = gen_dataset(config.dist_x, n, rho, rng, config.tail);
    for (std::size_t a = 0; a < n_m; ++a) {
      const RankedSample sample = data.sample.censored(config.m_values[a]);
      for (std::size_t c = 0; c < n_c; ++c) {
        double& slot = err[job * per_dataset + a * n_c + c];
        try {
          slot = fit_lse(sample, tables[c]).rho_hat - rho;
        } catch (const Error&) {
          slot = std::numeric_limits<double>::quiet_NaN();
        }
      }
    }
  });

  SimReport report;
  report.reps = reps;
  report.seed = config.seed;
  std::vector<double> e(reps), e2(reps);
  for (std::size_t i = 0; i < n_rho; ++i)
    for (std::size_t a = 0; a < n_m; ++a)
      for (std::size_t c = 0; c < n_c; ++c) {
        for (std::size_t j = 0; j < reps; ++j) {
          e[j] = err[(i * reps + j) * per_dataset + a * n_c + c];
          e2[j] = e[j] * e[j];
        }
        const Moments b = summarize(e);
        const Moments q = summarize(e2);
        CellResult cell;
        cell.dist_x = config.dist_x.key();
        cell.score = config.candidates[c].label();
        cell.rho = config.rho_values[i];
        cell.n = n;
        cell.m = config.m_values[a];
        cell.reps = b.count;
        cell.failures = reps - b.count;
        cell.bias = b.mean;
        cell.mse = q.mean;
        cell.bias_stderr = b.stderr_;
        cell.mse_stderr = q.stderr_;
        report.cells.push_back(cell);
      }
  return report;
}

void write_report_csv(std::ostream& out, const SimReport& report,
                      const std::vector<std::string>& comments) {
  for (const auto& c : comments) out << "# " << c << '\n';
  out << "dist_x,score,rho,n,m,reps,failures,bias,mse,bias_stderr,mse_stderr,seed\n";
  for (const auto& c : report.cells)
    out << fmt::format("{},{},{:.17g},{},{},{},{},{:.17g},{:.17g},{:.17g},{:.17g},{}\n", c.dist_x,
                       c.score, c.rho, c.n, c.m, c.reps, c.failures, c.bias, c.mse,
                       c.bias_stderr, c.mse_stderr, report.seed);
}

std::string format_table(const std::vector<SimReport>& reports) {
  std::vector<std::string> columns;
  std::vector<std::pair<int, int>> blocks;
  std::vector<double> rhos;
  std::vector<std::string> scores;
  std::map<std::tuple<std::string, int, int, double, std::string>, const CellResult*> index;
  auto remember = [](auto& list, const auto& value) {
    if (std::find(list.begin(), list.end(), value) == list.end()) list.push_back(value);
  };
  for (const auto& r : reports)
    for (const auto& c : r.cells) {
      remember(columns, c.dist_x);
      remember(blocks, std::make_pair(c.n, c.m));
      remember(rhos, c.rho);
      remember(scores, c.score);
      index[{c.dist_x, c.n, c.m, c.rho, c.score}] = &c;
    }

  std::ostringstream out;
  const std::size_t cell_width = 19;
  std::string header = fmt::format("{:<12}{:>5}  {:<8}", "", "rho", "score");
  std::string sub = fmt::format("{:<12}{:>5}  {:<8}", "", "", "");
  for (const auto& col : columns) {
    header += fmt::format("{:^{}}", col, cell_width);
    sub += fmt::format("{:>9} {:>9}", "Bias", "MSE");
  }
  const std::string rule(header.size(), '-');
  out << header << '\n' << sub << '\n' << rule << '\n';
  for (const auto& [n, m] : blocks) {
    bool first_row = true;
    for (double rho : rhos) {
      bool first_score = true;
      for (const auto& score : scores) {
        std::string line = fmt::format("{:<12}{:>5}  {:<8}",
                                       first_row ? fmt::format("n={} m={}", n, m) : "",
                                       first_score ? fmt::format("{:.1f}", rho) : "", score);
        bool any = false;
        for (const auto& col : columns) {
          auto it = index.find({col, n, m, rho, score});
          if (it == index.end()) {
            line += fmt::format("{:>9} {:>9}", "", "");
          } else {
            line += fmt::format("{:>9.4f} {:>9.4f}", it->second->bias, it->second->mse);
            any = true;
          }
        }
        if (!any) continue;
        out << line << '\n';
        first_row = false;
        first_score = false;
      }
    }
    out << rule << '\n';
  }
  return out.str();
}

namespace {

double pearson(std::span<const double> a, std::span<const double> b) {
  CompensatedSum sa, sb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
  }
  const double ma = sa.value() / a.size();
  const double mb = sb.value() / b.size();
  CompensatedSum sab, saa, sbb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab.value() / std::sqrt(saa.value() * sbb.value());
}

}  // namespace

OptimalityReport verify_optimality(const DistributionSpec& dist_x, int n, double rho,
                                   std::size_t reps, std::uint64_t seed,
                                   const std::vector<ScoreCandidate>& candidates,
                                   unsigned workers, const ScoreCache* cache) {
  if (candidates.empty()) throw InvalidArgument("no score candidates given");
  if (reps < 2) throw InvalidArgument("verify_optimality needs at least 2 replicates");
  const std::size_t k = candidates.size();
  std::vector<ScoreTable> tables;
  for (const auto& c : candidates)
    tables.push_back(candidate_table(c, n, n, Tail::upper, workers, cache));

  std::vector<double> corr(reps * k);
  parallel_for(reps, workers, [&](std::size_t j) {
    Rng rng = make_rng(seed, {0x0B7u, j});
    const Dataset data = gen_dataset(dist_x, n, rho, rng, Tail::upper);
    for (std::size_t c = 0; c < k; ++c)
      corr[j * k + c] = pearson(data.sample.y_top(), tables[c].alpha());
  });

  OptimalityReport rep;
  rep.reps = reps;
  for (std::size_t c = 0; c < k; ++c) {
    rep.labels.push_back(candidates[c].label());
    if (candidates[c].dist && *candidates[c].dist == dist_x && !rep.correct) rep.correct = c;
    std::vector<double> v(reps);
    for (std::size_t j = 0; j < reps; ++j) v[j] = corr[j * k + c];
    const Moments mo = summarize(v);
    rep.mean_corr.push_back(mo.mean);
    rep.corr_stderr.push_back(mo.stderr_);
  }
  if (rep.correct) {
    const std::size_t ref = *rep.correct;
    for (std::size_t c = 0; c < k; ++c) {
      std::vector<double> d(reps);
      for (std::size_t j = 0; j < reps; ++j) d[j] = corr[j * k + ref] - corr[j * k + c];
      const Moments mo = summarize(d);
      rep.gap.push_back(mo.mean);
      rep.gap_stderr.push_back(mo.stderr_);
    }
  }
  rep.ordering.resize(k);
  std::iota(rep.ordering.begin(), rep.ordering.end(), std::size_t{0});
  std::stable_sort(rep.ordering.begin(), rep.ordering.end(), [&](std::size_t a, std::size_t b) {
    return rep.mean_corr[a] > rep.mean_corr[b];
  });
  return rep;
}

}  // namespace drank::sim
