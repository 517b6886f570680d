#include "drank/estimator.hpp"

#include <cmath>

#include <fmt/format.h>

#include "drank/errors.hpp"
#include "drank/summation.hpp"
#include "json.hpp"

namespace drank {

std::string to_string(EstimatorMethod method) {
  switch (method) {
    case EstimatorMethod::lse:
      return "lse";
    case EstimatorMethod::modified:
      return "modified";
    case EstimatorMethod::multiple:
      return "multiple";
  }
  return "unknown";
}

std::string to_string(Alternative alternative) {
  return alternative == Alternative::two_sided ? "two_sided" : "greater";
}

Alternative parse_alternative(const std::string& text) {
  if (text == "two_sided" || text == "two-sided") return Alternative::two_sided;
  if (text == "greater") return Alternative::greater;
  throw InvalidArgument("alternative must be 'two_sided' or 'greater', got '" + text + "'");
}

namespace {

int ranks_for(int n, double s) {
  if (!(s > 0.0) || s > 1.0) throw InvalidArgument(fmt::format("s must lie in (0, 1], got {}", s));
  // n*s is meant to be an integer count; absorb representation error.
  return static_cast<int>(std::floor(n * s + 1e-9));
}

void check_compatible(const RankedSample& sample, const ScoreTable& scores) {
  if (scores.n() != sample.n())
    throw InvalidArgument(fmt::format("score table is for n={}, sample has n={}", scores.n(),
                                      sample.n()));
  if (scores.m() < sample.m())
    throw InvalidArgument(fmt::format("score table has {} ranks, sample needs {}", scores.m(),
                                      sample.m()));
  if (scores.tail() != sample.tail())
    throw InvalidArgument(fmt::format("score table ranks the {} tail, sample the {} tail",
                                      to_string(scores.tail()), to_string(sample.tail())));
}

double beta_term(double b, int power) { return power == 1 ? b : b * b; }

VarianceComponents components_from(const std::vector<double>& a, const ScoreTable& scores,
                                   int n, const VarianceOptions& options) {
  if (options.beta_power != 1 && options.beta_power != 2)
    throw InvalidArgument(fmt::format("beta power must be 1 or 2, got {}", options.beta_power));
  const int k = static_cast<int>(a.size());
  if (!scores.beta() || scores.beta()->rows() < k)
    throw InvalidArgument(fmt::format("variance components need beta for {} ranks", k));
  const Eigen::MatrixXd& beta = *scores.beta();
  double noise = 0.0;
  if (options.noise == NoiseVariance::order_statistic) {
    if (!scores.sigma2() || static_cast<int>(scores.sigma2()->size()) < k)
      throw InsufficientTableError(fmt::format("variance components need sigma2 for {} ranks", k));
  } else {
    if (!options.noise_variance)
      throw InvalidArgument("conditional-response variance needs a noise variance");
    noise = *options.noise_variance;
  }
  CompensatedSum psi1, psi2, phi;
  for (int r = 0; r < k; ++r) {
    const double ar = a[static_cast<std::size_t>(r)];
    const double s2 = options.noise == NoiseVariance::order_statistic
                          ? (*scores.sigma2())[static_cast<std::size_t>(r)]
                          : noise;
    psi1 += ar * ar * s2;
    phi += ar * ar;
    for (int w = 0; w < k; ++w)
      psi2 += ar * a[static_cast<std::size_t>(w)] * beta_term(beta(r, w), options.beta_power);
  }
  const double nn = static_cast<double>(n);
  return {psi1.value() / nn, psi2.value() / nn, phi.value() / nn};
}

void require_beta(const ScoreTable& scores, int k) {
  if (!scores.beta() || scores.beta()->rows() < k)
    throw InsufficientTableError(fmt::format("variance components need beta for {} ranks", k));
}

double p_value_for(double z, Alternative alternative) {
  if (alternative == Alternative::two_sided) return std::erfc(std::abs(z) / std::sqrt(2.0));
  return 0.5 * std::erfc(z / std::sqrt(2.0));
}

bool can_compute_components(const ScoreTable& scores, int k, const VarianceOptions& options) {
  if (!scores.beta() || scores.beta()->rows() < k) return false;
  if (options.noise == NoiseVariance::order_statistic &&
      (!scores.sigma2() || static_cast<int>(scores.sigma2()->size()) < k))
    return false;
  return true;
}

void finish(Estimate& e, const RankedSample& sample, const ScoreTable& scores,
            const VarianceOptions& options, double den) {
  e.exceeds_unit = std::abs(e.rho_hat) > 1.0;
  e.n = sample.n();
  e.m = sample.m();
  e.s = static_cast<double>(sample.m()) / sample.n();
  e.mu_hat = sample.mu_hat();
  e.sigma_hat = sample.sigma_hat();
  e.phi = den / sample.n();
  e.t_stat = std::sqrt(static_cast<double>(sample.n())) * e.rho_hat * std::sqrt(e.phi);
  e.alternative = Alternative::two_sided;
  e.p_value = p_value_for(e.t_stat, e.alternative);
  e.score_table_id = scores.id();
  e.sample_fingerprint = sample.fingerprint();
  e.variance_options = options;
  if (e.variance_options.noise == NoiseVariance::conditional_response &&
      !e.variance_options.noise_variance) {
    const double r2 = std::min(1.0, e.rho_hat * e.rho_hat);
    e.variance_options.noise_variance = e.sigma_hat * e.sigma_hat * (1.0 - r2);
  }
}

void attach_variance(Estimate& e, const VarianceComponents& c) {
  e.components = c;
  e.asym_var = asymptotic_variance(c, e.rho_hat, e.sigma_hat);
  e.std_err = std::sqrt(*e.asym_var / e.n);
}

}  // namespace

VarianceComponents variance_components(const ScoreTable& scores, double s,
                                       const VarianceOptions& options) {
  const int k = ranks_for(scores.n(), s);
  if (k < 1 || k > scores.m())
    throw InsufficientTableError(
        fmt::format("s={} needs {} ranks, table has {}", s, k, scores.m()));
  require_beta(scores, k);
  const auto alpha = scores.alpha();
  return components_from(std::vector<double>(alpha.begin(), alpha.begin() + k), scores,
                         scores.n(), options);
}

VarianceComponents modified_variance_components(const ScoreTable& scores, double s,
                                                const VarianceOptions& options) {
  const int n = scores.n();
  const int k = ranks_for(n, s);
  if (scores.m() != n)
    throw InsufficientTableError("modified variance components need all n ranks in the table");
  require_beta(scores, n);
  std::vector<double> a(scores.alpha().begin(), scores.alpha().end());
  if (k < n) {
    CompensatedSum tail;
    for (int r = k; r < n; ++r) tail += a[static_cast<std::size_t>(r)];
    const double mean = tail.value() / (n - k);
    for (int r = k; r < n; ++r) a[static_cast<std::size_t>(r)] = mean;
  }
  return components_from(a, scores, n, options);
}

double asymptotic_variance(const VarianceComponents& c, double rho, double sigma_y) {
  if (!(c.phi > 0.0)) throw DegenerateDesignError("phi must be positive");
  if (!(sigma_y > 0.0)) throw InvalidArgument("sigma_y must be positive");
  return (c.psi1 / (sigma_y * sigma_y) + rho * rho * c.psi2) / (c.phi * c.phi);
}

double test_rho_zero(const Estimate& estimate, Alternative alternative) {
  return p_value_for(estimate.t_stat, alternative);
}

Estimate fit_lse(const RankedSample& sample, const ScoreTable& scores,
                 const VarianceOptions& options) {
  check_compatible(sample, scores);
  const auto y = sample.y_top();
  const double mu = sample.mu_hat();
  CompensatedSum num, den;
  for (int r = 1; r <= sample.m(); ++r) {
    const double a = scores.alpha(r);
    num += a * (y[static_cast<std::size_t>(r - 1)] - mu);
    den += a * a;
  }
  if (!(den.value() > 0.0))
    throw DegenerateDesignError("sum of squared scores over the ranked block is zero");
  Estimate e;
  e.method = EstimatorMethod::lse;
  e.rho_hat = num.value() / (sample.sigma_hat() * den.value());
  finish(e, sample, scores, options, den.value());
  if (can_compute_components(scores, sample.m(), e.variance_options))
    attach_variance(e, variance_components(scores, e.s, e.variance_options));
  return e;
}

Estimate fit_modified(const RankedSample& sample, const ScoreTable& scores,
                      const VarianceOptions& options) {
  check_compatible(sample, scores);
  const int n = sample.n();
  const int k = sample.m();
  if (k == n) {
    Estimate e = fit_lse(sample, scores, options);
    e.method = EstimatorMethod::modified;
    return e;
  }
  double tail_mean = 0.0;
  if (scores.m() == n) {
    CompensatedSum t;
    for (int r = k + 1; r <= n; ++r) t += scores.alpha(r);
    tail_mean = t.value() / (n - k);
  } else if (scores.m() == k && scores.alpha_tail_mean()) {
    tail_mean = *scores.alpha_tail_mean();
  } else {
    CompensatedSum t;
    for (int r = 1; r <= k; ++r) t += scores.alpha(r);
    tail_mean = -t.value() / (n - k);
  }
  const auto y = sample.y_top();
  const double mu = sample.mu_hat();
  CompensatedSum num, den, rest;
  for (int r = 1; r <= k; ++r) {
    const double a = scores.alpha(r);
    num += a * (y[static_cast<std::size_t>(r - 1)] - mu);
    den += a * a;
  }
  for (double v : sample.y_rest()) rest += v;
  const double y_rest_mean = rest.value() / (n - k);
  num += (n - k) * tail_mean * (y_rest_mean - mu);
  den += (n - k) * tail_mean * tail_mean;
  if (!(den.value() > 0.0)) throw DegenerateDesignError("sum of squared scores is zero");
  Estimate e;
  e.method = EstimatorMethod::modified;
  e.rho_hat = num.value() / (sample.sigma_hat() * den.value());
  finish(e, sample, scores, options, den.value());
  if (scores.m() == n && can_compute_components(scores, n, e.variance_options))
    attach_variance(e, modified_variance_components(scores, e.s, e.variance_options));
  return e;
}

MultipleFit fit_multiple(const RankedSample& sample, const Eigen::MatrixXd& z,
                         const ScoreTable& scores, Centering centering) {
  check_compatible(sample, scores);
  const int m = sample.m();
  const Eigen::Index q = z.cols();
  if (z.rows() != m)
    throw InvalidArgument(fmt::format("covariate matrix has {} rows, expected {}", z.rows(), m));
  Eigen::VectorXd a(m), y(m);
  for (int r = 0; r < m; ++r) {
    a(r) = scores.alpha(r + 1);
    y(r) = sample.y_top()[static_cast<std::size_t>(r)];
  }
  const double ybar = centering == Centering::top_block_mean ? y.mean() : sample.mu_hat();
  y.array() -= ybar;
  Eigen::MatrixXd zc = z;
  if (q > 0) zc.rowwise() -= z.colwise().mean();

  if (a.squaredNorm() == 0.0) throw RankDeficiencyError("score", "scores are all zero");
  constexpr double threshold = 1e-10;
  if (q > 0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(zc);
    qr.setThreshold(threshold);
    if (qr.rank() < q) {
      for (Eigen::Index j = 1; j <= q; ++j) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> part(zc.leftCols(j));
        part.setThreshold(threshold);
        if (part.rank() < j)
          throw RankDeficiencyError(
              fmt::format("covariate {}", j),
              fmt::format("centered covariate column {} is a linear combination of earlier "
                          "columns (or constant over the ranked block)",
                          j));
      }
    }
  }
  Eigen::MatrixXd design(m, q + 1);
  design.col(0) = a;
  if (q > 0) design.rightCols(q) = zc;
  const Eigen::MatrixXd lhs = design.transpose() * design;
  const Eigen::VectorXd rhs = design.transpose() * y;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> solver(lhs);
  solver.setThreshold(threshold);
  if (solver.rank() < q + 1)
    throw RankDeficiencyError("score-covariate",
                              "scores lie in the span of the centered covariates");
  const Eigen::VectorXd sol = solver.solve(rhs);
  MultipleFit fit;
  fit.delta_hat = sol(0);
  fit.eta_hat = sol.tail(q);
  fit.rho_hat = fit.delta_hat / sample.sigma_hat();
  fit.centering = centering;
  return fit;
}

std::string estimate_to_json(const Estimate& e, int indent) {
  using nlohmann::json;
  json j;
  j["method"] = to_string(e.method);
  j["rho_hat"] = e.rho_hat;
  j["exceeds_unit"] = e.exceeds_unit;
  j["s"] = e.s;
  j["n"] = e.n;
  j["m"] = e.m;
  j["mu_hat"] = e.mu_hat;
  j["sigma_hat"] = e.sigma_hat;
  j["phi"] = e.phi;
  if (e.components)
    j["variance_components"] = {{"psi1", e.components->psi1},
                                {"psi2", e.components->psi2},
                                {"phi", e.components->phi}};
  else
    j["variance_components"] = nullptr;
  j["asym_var"] = e.asym_var ? json(*e.asym_var) : json(nullptr);
  j["std_err"] = e.std_err ? json(*e.std_err) : json(nullptr);
  j["t_stat"] = e.t_stat;
  j["p_value"] = e.p_value;
  j["alternative"] = to_string(e.alternative);
  j["variance_options"] = {
      {"beta_power", e.variance_options.beta_power},
      {"noise", e.variance_options.noise == NoiseVariance::order_statistic
                    ? "order_statistic"
                    : "conditional_response"},
      {"noise_variance", e.variance_options.noise_variance
                             ? json(*e.variance_options.noise_variance)
                             : json(nullptr)}};
  j["score_table_id"] = e.score_table_id;
  j["sample_fingerprint"] = fmt::format("{:016x}", e.sample_fingerprint);
  return j.dump(indent);
}

}  // namespace drank
