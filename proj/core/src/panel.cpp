#include "drank/panel.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "drank/errors.hpp"
#include "drank/parallel.hpp"
#include "drank/simulation.hpp"
#include "drank/summation.hpp"
#include "json.hpp"

namespace drank::panel {

Residualized preprocess_residualize(const Eigen::VectorXd& y, const Eigen::MatrixXd& covariates,
                                    const std::vector<std::string>& column_names) {
  const Eigen::Index rows = y.size();
  const Eigen::Index q = covariates.cols();
  if (covariates.rows() != rows)
    throw InvalidArgument(fmt::format("covariates have {} rows, response has {}",
                                      covariates.rows(), rows));
  if (!column_names.empty() && static_cast<Eigen::Index>(column_names.size()) != q)
    throw InvalidArgument("one name per covariate column is required");
  if (rows <= q + 1)
    throw RankDeficiencyError("design", fmt::format("{} rows cannot identify {} coefficients",
                                                    rows, q + 1));
  Eigen::MatrixXd design(rows, q + 1);
  design.col(0).setOnes();
  design.rightCols(q) = covariates;

  constexpr double threshold = 1e-10;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(threshold);
  if (qr.rank() < q + 1) {
    for (Eigen::Index j = 2; j <= q + 1; ++j) {
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> part(design.leftCols(j));
      part.setThreshold(threshold);
      if (part.rank() < j) {
        const std::string name = column_names.empty()
                                     ? fmt::format("column {}", j - 1)
                                     : column_names[static_cast<std::size_t>(j - 2)];
        throw RankDeficiencyError(
            name, fmt::format("covariate '{}' is collinear with the intercept and earlier "
                              "covariates",
                              name));
      }
    }
  }
  Residualized out;
  out.coefficients = qr.solve(y);
  out.residuals = y - design * out.coefficients;
  out.abs_residuals = out.residuals.cwiseAbs();
  return out;
}

namespace {

void check_day(const RankedSample& day, const ScoreTable& scores) {
  if (scores.n() != day.n())
    throw InvalidArgument(fmt::format("score table is for n={}, day has n={}", scores.n(), day.n()));
  if (scores.m() < day.m())
    throw InvalidArgument(fmt::format("score table has {} ranks, day needs {}", scores.m(), day.m()));
  if (scores.tail() != day.tail()) throw InvalidArgument("score table and day rank different tails");
}

std::vector<bool> exclusion_mask(const std::vector<int>& excluded, int m) {
  std::vector<bool> mask(static_cast<std::size_t>(m), false);
  for (int r : excluded) {
    if (r < 1 || r > m) throw InvalidArgument(fmt::format("excluded rank {} outside 1..{}", r, m));
    if (mask[static_cast<std::size_t>(r - 1)])
      throw InvalidArgument(fmt::format("excluded rank {} listed twice", r));
    mask[static_cast<std::size_t>(r - 1)] = true;
  }
  return mask;
}

}  // namespace

DayFit fit_day_iterative(const RankedSample& day, const ScoreTable& scores,
                         const std::vector<int>& excluded, const IterationOptions& options) {
  check_day(day, scores);
  const int m = day.m();
  const std::vector<bool> mask = exclusion_mask(excluded, m);
  const int n_ex = static_cast<int>(excluded.size());
  if (m <= n_ex + 1)
    throw InvalidArgument(fmt::format("need more than {} ranks, got {}", n_ex + 1, m));
  if (options.max_iter < 1 || !(options.tol > 0.0))
    throw InvalidArgument("iteration needs max_iter >= 1 and tol > 0");

  const double mu = day.mu_hat();
  const double sigma = day.sigma_hat();
  const auto y = day.y_top();
  std::vector<double> a(static_cast<std::size_t>(m));
  for (int r = 1; r <= m; ++r) a[static_cast<std::size_t>(r - 1)] = scores.alpha(r);

  // Preliminary with-intercept regression over the ranks outside the set.
  CompensatedSum sx, sy;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!mask[i]) {
      sx += a[i];
      sy += (y[i] - mu) / sigma;
    }
  const double k = m - n_ex;
  const double xbar = sx.value() / k;
  const double ybar = sy.value() / k;
  CompensatedSum sxx, sxy, saa;
  for (std::size_t i = 0; i < a.size(); ++i) {
    saa += a[i] * a[i];
    if (mask[i]) continue;
    sxx += (a[i] - xbar) * (a[i] - xbar);
    sxy += (a[i] - xbar) * ((y[i] - mu) / sigma - ybar);
  }
  if (!(sxx.value() > 0.0))
    throw DegenerateDesignError("scores are constant over the non-excluded ranks");
  const double sum_a2 = saa.value();

  auto objective = [&](double rho, double gamma) {
    CompensatedSum l;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double e = y[i] - mu - sigma * rho * a[i] - (mask[i] ? gamma : 0.0);
      l += e * e;
    }
    return l.value();
  };

  DayFit fit;
  fit.rho = sxy.value() / sxx.value();
  fit.gamma = 0.0;
  for (int it = 1; it <= options.max_iter; ++it) {
    double gamma = 0.0;
    if (n_ex > 0) {
      CompensatedSum g;
      for (std::size_t i = 0; i < a.size(); ++i)
        if (mask[i]) g += y[i] - mu - sigma * fit.rho * a[i];
      gamma = g.value() / n_ex;
    }
    fit.objective_trace.push_back(objective(fit.rho, gamma));
    CompensatedSum num;
    for (std::size_t i = 0; i < a.size(); ++i)
      num += a[i] * (y[i] - mu - (mask[i] ? gamma : 0.0));
    const double rho = num.value() / (sigma * sum_a2);
    fit.objective_trace.push_back(objective(rho, gamma));
    const double change = std::abs(rho - fit.rho) + std::abs(gamma - fit.gamma);
    fit.rho = rho;
    fit.gamma = gamma;
    fit.iterations = it;
    if (change < options.tol) {
      fit.converged = true;
      break;
    }
  }
  return fit;
}

Combined combined_statistic(const std::vector<double>& rho_ts, int n) {
  if (rho_ts.empty()) throw InvalidArgument("the combined statistic needs at least one day");
  if (n < 1) throw InvalidArgument("n must be positive");
  Combined c;
  const double root_n = std::sqrt(static_cast<double>(n));
  CompensatedSum su, sr;
  for (double r : rho_ts) {
    c.u.push_back(root_n * r);
    su += root_n * r;
    sr += r;
  }
  const double t = static_cast<double>(rho_ts.size());
  c.t_rho = su.value() / std::sqrt(t);
  c.rho_bar = sr.value() / t;
  return c;
}

HacResult hac_variance(const std::vector<double>& u, int lag, HacForm form) {
  const int T = static_cast<int>(u.size());
  if (T < 1) throw InvalidArgument("hac_variance needs at least one value");
  if (lag < 0 || lag >= T)
    throw InvalidArgument(fmt::format("lag must satisfy 0 <= lag < T={}, got {}", T, lag));
  CompensatedSum s;
  for (double v : u) s += v;
  const double mean = s.value() / T;
  CompensatedSum total;
  double lag0 = 0.0;
  for (int k = 0; k <= lag; ++k) {
    // (T-k) * cov_k is the plain sum of the T-k cross products.
    CompensatedSum cross;
    for (int t = 0; t + k < T; ++t)
      cross += (u[static_cast<std::size_t>(t)] - mean) * (u[static_cast<std::size_t>(t + k)] - mean);
    const double term = cross.value() / T;
    if (k == 0)
      lag0 = term;
    total += (k > 0 && form == HacForm::symmetric) ? 2.0 * term : term;
  }
  HacResult r;
  r.lag0 = lag0;
  r.variance = total.value();
  if (r.variance < 0.0) {
    r.variance = lag0;
    r.floored = true;
  }
  return r;
}

int default_lag(int T) {
  if (T < 1) throw InvalidArgument("T must be positive");
  int lag = static_cast<int>(std::floor(std::cbrt(static_cast<double>(T)) + 1e-12));
  return std::min(lag, T - 1);
}

void PanelSeries::validate() const {
  if (days.empty()) throw InvalidArgument("panel has no days");
  if (!day_ids.empty() && day_ids.size() != days.size())
    throw InvalidArgument("one day id per day is required");
  const int n = days.front().n();
  const int m = days.front().m();
  for (std::size_t t = 0; t < days.size(); ++t) {
    const long long id = day_ids.empty() ? static_cast<long long>(t + 1) : day_ids[t];
    if (days[t].n() != n || days[t].m() != m)
      throw InvalidArgument(fmt::format("day {} has n={}, m={}; expected n={}, m={}", id,
                                        days[t].n(), days[t].m(), n, m));
  }
  exclusion_mask(excluded, m);
}

CombinedTest panel_test(const PanelSeries& panel, const ScoreTable& scores,
                        const PanelOptions& options) {
  panel.validate();
  const int T = static_cast<int>(panel.days.size());
  if (T < 2) throw InvalidArgument("the combined test needs at least 2 days");
  const int n = panel.days.front().n();
  const int m = panel.days.front().m();
  auto id_of = [&](std::size_t t) {
    return panel.day_ids.empty() ? static_cast<long long>(t + 1) : panel.day_ids[t];
  };

  CombinedTest out;
  out.day_fits.resize(static_cast<std::size_t>(T));
  parallel_for(static_cast<std::size_t>(T), options.workers, [&](std::size_t t) {
    out.day_fits[t] = fit_day_iterative(panel.days[t], scores, panel.excluded, options.iteration);
  });
  for (std::size_t t = 0; t < out.day_fits.size(); ++t)
    if (!out.day_fits[t].converged) out.nonconverged_days.push_back(id_of(t));
  out.nonconverged_fraction = static_cast<double>(out.nonconverged_days.size()) / T;
  if (out.nonconverged_fraction > options.max_nonconverged_fraction) {
    std::string list;
    for (std::size_t i = 0; i < out.nonconverged_days.size(); ++i)
      list += (i ? ", " : "") + std::to_string(out.nonconverged_days[i]);
    throw NonConvergenceError(fmt::format(
        "{} of {} days did not converge (limit {:.0f}%): days {}", out.nonconverged_days.size(),
        T, 100.0 * options.max_nonconverged_fraction, list));
  }

  std::vector<double> rhos;
  rhos.reserve(out.day_fits.size());
  for (const auto& f : out.day_fits) rhos.push_back(f.rho);
  const Combined c = combined_statistic(rhos, n);
  out.t_rho = c.t_rho;
  out.rho_bar = c.rho_bar;
  out.lag = options.lag ? *options.lag : default_lag(T);
  const HacResult h = hac_variance(c.u, out.lag, options.hac_form);
  out.hac_variance = h.variance;
  out.hac_floored = h.floored;
  if (!(h.variance > 0.0))
    throw DegenerateDesignError("the day statistics are constant; the HAC variance is zero");
  out.z = out.t_rho / std::sqrt(h.variance);
  out.p_value = std::erfc(std::abs(out.z) / std::sqrt(2.0));
  out.p_value_greater = 0.5 * std::erfc(out.z / std::sqrt(2.0));

  const std::vector<bool> mask = exclusion_mask(panel.excluded, m);
  CompensatedSum num, var, a2;
  for (int r = 1; r <= m; ++r) a2 += scores.alpha(r) * scores.alpha(r);
  for (std::size_t t = 0; t < panel.days.size(); ++t) {
    const RankedSample& day = panel.days[t];
    var += day.sigma_hat() * day.sigma_hat();
    for (int r = 1; r <= m; ++r) {
      const double g = mask[static_cast<std::size_t>(r - 1)] ? out.day_fits[t].gamma : 0.0;
      num += scores.alpha(r) * (day.y_top()[static_cast<std::size_t>(r - 1)] - day.mu_hat() - g);
    }
  }
  const double sigma_pool = std::sqrt(var.value() / T);
  out.pooled_rho_lse = num.value() / (sigma_pool * T * a2.value());
  return out;
}

PanelSeries synthetic_panel(const SyntheticPanelConfig& config) {
  if (config.T < 1) throw InvalidArgument("T must be positive");
  if (config.m < 1 || config.m > config.n) throw InvalidArgument("need 1 <= m <= n");
  exclusion_mask(config.excluded, config.m);
  PanelSeries panel;
  panel.excluded = config.excluded;
  for (int t = 0; t < config.T; ++t) {
    Rng rng = make_rng(config.seed, {0xDA7u, static_cast<std::uint64_t>(t)});
    const sim::Dataset data = sim::gen_dataset(config.dist_x, config.n, config.rho, rng, Tail::upper);
    std::vector<double> y(data.sample.y_top().begin(), data.sample.y_top().end());
    for (int r : config.excluded) y[static_cast<std::size_t>(r - 1)] += config.gamma;
    std::vector<double> top(y.begin(), y.begin() + config.m);
    std::vector<double> rest(y.begin() + config.m, y.end());
    panel.day_ids.push_back(t + 1);
    panel.days.emplace_back(std::move(top), std::move(rest), Tail::upper);
  }
  return panel;
}

std::string combined_test_to_json(const CombinedTest& test, const PanelSeries& panel, int indent) {
  using nlohmann::json;
  json days = json::array();
  const int n = panel.days.empty() ? 0 : panel.days.front().n();
  for (std::size_t t = 0; t < test.day_fits.size(); ++t) {
    const DayFit& f = test.day_fits[t];
    days.push_back({{"day", panel.day_ids.empty() ? static_cast<long long>(t + 1) : panel.day_ids[t]},
                    {"rho", f.rho},
                    {"gamma", f.gamma},
                    {"u", std::sqrt(static_cast<double>(n)) * f.rho},
                    {"iterations", f.iterations},
                    {"converged", f.converged}});
  }
  json j;
  j["combined_test"] = {{"t_rho", test.t_rho},
                        {"rho_bar", test.rho_bar},
                        {"hac_variance", test.hac_variance},
                        {"hac_floored", test.hac_floored},
                        {"lag", test.lag},
                        {"z", test.z},
                        {"p_value", test.p_value},
                        {"p_value_greater", test.p_value_greater},
                        {"pooled_rho_lse", test.pooled_rho_lse},
                        {"nonconverged_fraction", test.nonconverged_fraction},
                        {"nonconverged_days", test.nonconverged_days}};
  j["days"] = days;
  return j.dump(indent);
}

}  // namespace drank::panel
