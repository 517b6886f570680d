#include "drank/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <fmt/format.h>

#include "drank/errors.hpp"
#include "drank/summation.hpp"
#include "json.hpp"

namespace drank {

namespace {

struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  double intercept_se = 0.0;
};

LineFit ols_line(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t m = x.size();
  CompensatedSum sx, sy;
  for (std::size_t i = 0; i < m; ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double xbar = sx.value() / m;
  const double ybar = sy.value() / m;
  CompensatedSum sxx, sxy;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += (x[i] - xbar) * (x[i] - xbar);
    sxy += (x[i] - xbar) * (y[i] - ybar);
  }
  if (!(sxx.value() > 0.0)) throw DegenerateDesignError("scores are constant over the ranked block");
  LineFit f;
  f.slope = sxy.value() / sxx.value();
  f.intercept = ybar - f.slope * xbar;
  if (m > 2) {
    CompensatedSum sse;
    for (std::size_t i = 0; i < m; ++i) {
      const double e = y[i] - f.intercept - f.slope * x[i];
      sse += e * e;
    }
    const double s2 = sse.value() / static_cast<double>(m - 2);
    f.intercept_se = std::sqrt(s2 * (1.0 / m + xbar * xbar / sxx.value()));
  }
  return f;
}

std::vector<double> alpha_block(const ScoreTable& scores, int m) {
  return std::vector<double>(scores.alpha().begin(), scores.alpha().begin() + m);
}

}  // namespace

std::vector<double> standardized_responses(const RankedSample& sample) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(sample.m()));
  for (double y : sample.y_top()) out.push_back((y - sample.mu_hat()) / sample.sigma_hat());
  return out;
}

std::vector<double> residuals(const RankedSample& sample, const ScoreTable& scores,
                              const Estimate& estimate) {
  if (estimate.score_table_id != scores.id())
    throw ProvenanceError("estimate was fitted with a different score table");
  if (estimate.sample_fingerprint != sample.fingerprint() || estimate.m != sample.m())
    throw ProvenanceError("estimate was fitted on a different sample");
  std::vector<double> e = standardized_responses(sample);
  for (int r = 1; r <= sample.m(); ++r)
    e[static_cast<std::size_t>(r - 1)] -= estimate.rho_hat * scores.alpha(r);
  return e;
}

double rss(const RankedSample& sample, const ScoreTable& scores, const Estimate& estimate) {
  CompensatedSum total;
  for (double e : residuals(sample, scores, estimate)) total += e * e;
  return total.value();
}

double residual_variance_theoretical(const ScoreTable& scores, double rho, int r, double s,
                                     double sigma_y, const VarianceOptions& options) {
  const int n = scores.n();
  const int k = static_cast<int>(std::floor(n * s + 1e-9));
  if (k < 1 || k > scores.m())
    throw InsufficientTableError(fmt::format("s={} needs {} ranks, table has {}", s, k, scores.m()));
  if (r < 1 || r > k) throw InvalidArgument(fmt::format("rank {} outside 1..{}", r, k));
  if (!scores.beta() || scores.beta()->rows() < k)
    throw InsufficientTableError(fmt::format("residual variance needs beta for {} ranks", k));
  VarianceOptions opts = options;
  if (opts.noise == NoiseVariance::conditional_response && !opts.noise_variance)
    opts.noise_variance = sigma_y * sigma_y * (1.0 - std::min(1.0, rho * rho));
  const VarianceComponents c = variance_components(scores, s, opts);
  const Eigen::MatrixXd& beta = *scores.beta();
  const double rho2 = rho * rho;
  const double ar = scores.alpha(r);
  CompensatedSum sum_a2, cross;
  for (int w = 1; w <= k; ++w) {
    const double aw = scores.alpha(w);
    sum_a2 += aw * aw;
    cross += aw * ar * beta(r - 1, w - 1);
  }
  const double first = rho2 * beta(r - 1, r - 1) + (1.0 - rho2);
  const double second = ar * ar * c.psi1 / (n * sigma_y * sigma_y * c.phi * c.phi);
  const double third = 2.0 / sum_a2.value() * (rho2 * cross.value() + ar * ar * (1.0 - rho2));
  return first + second - third;
}

double InterceptFit::intercept_z() const {
  if (intercept == 0.0) return 0.0;
  if (intercept_std_err == 0.0) return std::numeric_limits<double>::infinity();
  return std::abs(intercept) / intercept_std_err;
}

InterceptFit intercept_check(const RankedSample& sample, const ScoreTable& scores) {
  if (sample.m() < 3)
    throw InvalidArgument(fmt::format("intercept check needs at least 3 ranks, got {}", sample.m()));
  if (scores.m() < sample.m())
    throw InvalidArgument("score table has fewer ranks than the sample");
  const LineFit f = ols_line(alpha_block(scores, sample.m()), standardized_responses(sample));
  return {f.intercept, f.slope, f.intercept_se};
}

ResidualReport residual_report(const RankedSample& sample, const ScoreTable& scores,
                               const Estimate& estimate) {
  ResidualReport rep;
  const int m = sample.m();
  rep.alpha = alpha_block(scores, m);
  rep.std_y = standardized_responses(sample);
  rep.residuals = residuals(sample, scores, estimate);
  rep.fitted.resize(static_cast<std::size_t>(m));
  CompensatedSum total;
  for (std::size_t i = 0; i < rep.alpha.size(); ++i) {
    rep.fitted[i] = estimate.rho_hat * rep.alpha[i];
    total += rep.residuals[i] * rep.residuals[i];
  }
  rep.rss = total.value();
  if (m >= 3) {
    rep.intercept_fit = intercept_check(sample, scores);
    rep.trend_slope = ols_line(rep.alpha, rep.residuals).slope;
  }
  rep.score_table_id = scores.id();
  if (scores.beta() && scores.beta()->rows() >= m) {
    const double s = static_cast<double>(m) / sample.n();
    std::vector<double> v(static_cast<std::size_t>(m));
    for (int r = 1; r <= m; ++r) {
      v[static_cast<std::size_t>(r - 1)] =
          residual_variance_theoretical(scores, estimate.rho_hat, r, s);
      if (v[static_cast<std::size_t>(r - 1)] < 0.0) rep.negative_variance_ranks.push_back(r);
    }
    rep.per_rank_theoretical_var = std::move(v);
  }
  return rep;
}

void write_residual_csv(std::ostream& out, const ResidualReport& rep,
                        const std::vector<std::string>& comments) {
  for (const auto& c : comments) out << "# " << c << '\n';
  const bool bands = rep.per_rank_theoretical_var.has_value();
  out << "rank,alpha,std_y,fitted,residual";
  if (bands) out << ",band_lo,band_hi";
  out << '\n';
  for (std::size_t i = 0; i < rep.residuals.size(); ++i) {
    out << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g}", i + 1, rep.alpha[i], rep.std_y[i],
                       rep.fitted[i], rep.residuals[i]);
    if (bands) {
      const double v = (*rep.per_rank_theoretical_var)[i];
      if (v >= 0.0)
        out << fmt::format(",{:.17g},{:.17g}", -2.0 * std::sqrt(v), 2.0 * std::sqrt(v));
      else
        out << ",,";
    }
    out << '\n';
  }
}

std::vector<CandidateMetrics> select_score(const RankedSample& sample,
                                           const std::vector<ScoreTable>& candidates) {
  if (candidates.empty()) throw InvalidArgument("select_score needs at least one candidate");
  std::vector<CandidateMetrics> out;
  out.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const ScoreTable& t = candidates[i];
    const Estimate e = fit_lse(sample, t);
    CandidateMetrics c;
    c.input_index = i;
    c.label = t.label();
    c.score_table_id = t.id();
    c.rho_hat = e.rho_hat;
    c.rss = rss(sample, t, e);
    if (sample.m() >= 3) {
      const InterceptFit f = intercept_check(sample, t);
      c.intercept = f.intercept;
      c.intercept_z = f.intercept_z();
      c.trend_slope = ols_line(alpha_block(t, sample.m()), residuals(sample, t, e)).slope;
    }
    out.push_back(std::move(c));
  }
  std::stable_sort(out.begin(), out.end(), [](const CandidateMetrics& a, const CandidateMetrics& b) {
    if (a.rss != b.rss) return a.rss < b.rss;
    return a.intercept_z < b.intercept_z;
  });
  return out;
}

std::string selection_to_json(const std::vector<CandidateMetrics>& ranking, int indent) {
  using nlohmann::json;
  json rows = json::array();
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    const auto& c = ranking[i];
    rows.push_back({{"rank", i + 1},
                    {"input_index", c.input_index},
                    {"label", c.label},
                    {"score_table_id", c.score_table_id},
                    {"rho_hat", c.rho_hat},
                    {"rss", c.rss},
                    {"intercept", c.intercept},
                    {"intercept_z", std::isfinite(c.intercept_z) ? json(c.intercept_z) : json("inf")},
                    {"trend_slope", c.trend_slope}});
  }
  return json{{"candidates", rows}}.dump(indent);
}

}  // namespace drank
