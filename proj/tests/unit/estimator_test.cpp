#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "drank/errors.hpp"
#include "drank/estimator.hpp"
#include "drank/rng.hpp"
#include "drank/simulation.hpp"

namespace {

using drank::DistributionSpec;
using drank::RankedSample;
using drank::ScoreTable;
using drank::Tail;

const std::vector<double> kHandAlpha{-1.0294, -0.2970, 0.2970, 1.0294};

RankedSample hand_sample() { return RankedSample({-2.0, -0.5}, {0.5, 2.0}); }

ScoreTable hand_table() { return ScoreTable::supplied(4, kHandAlpha); }

TEST(RankedSample, PlugInMoments) {
  const RankedSample s = hand_sample();
  EXPECT_EQ(s.n(), 4);
  EXPECT_EQ(s.m(), 2);
  EXPECT_DOUBLE_EQ(s.mu_hat(), 0.0);
  EXPECT_DOUBLE_EQ(s.sigma_hat(), std::sqrt(8.5 / 4.0));
  EXPECT_THROW(RankedSample({1.0, 1.0}, {1.0}), drank::InvalidArgument);
  EXPECT_THROW(RankedSample({}, {1.0, 2.0}), drank::InvalidArgument);
  EXPECT_THROW(RankedSample({1.0, NAN}, {}), drank::InvalidArgument);
}

TEST(RankedSample, CensoringKeepsMoments) {
  const RankedSample full({3, 1, 4, 1, 5, 9, 2, 6}, {});
  const RankedSample top = full.censored(3);
  EXPECT_EQ(top.m(), 3);
  EXPECT_EQ(top.n(), 8);
  EXPECT_NEAR(top.mu_hat(), full.mu_hat(), 1e-15);
  EXPECT_NEAR(top.sigma_hat(), full.sigma_hat(), 1e-15);
  EXPECT_NE(top.fingerprint(), full.fingerprint());
}

TEST(FitLse, PerfectFitGivesOne) {
  const int n = 50;
  const ScoreTable id = ScoreTable::identity(n, n);
  std::vector<double> y;
  for (double a : id.alpha()) y.push_back(5.0 + 2.0 * a);
  const RankedSample full(y, {});
  const RankedSample top = full.censored(12);
  EXPECT_NEAR(top.mu_hat(), 5.0, 1e-14);
  EXPECT_NEAR(top.sigma_hat(), 2.0, 1e-14);
  const auto e = drank::fit_lse(top, id);
  EXPECT_NEAR(e.rho_hat, 1.0, 1e-14);
  EXPECT_FALSE(e.exceeds_unit && std::abs(e.rho_hat - 1.0) > 1e-14);
}

TEST(FitLse, FlatTopBlockGivesZero) {
  const RankedSample s({3.0, 3.0, 3.0}, {1.0, 5.0});
  EXPECT_DOUBLE_EQ(drank::fit_lse(s, ScoreTable::identity(5, 3)).rho_hat, 0.0);
}

TEST(FitLse, HandExample) {
  const RankedSample s = hand_sample();
  const double sigma = std::sqrt(8.5 / 4.0);
  const double expected =
      (-1.0294 * -2.0 + -0.2970 * -0.5) / (1.0294 * 1.0294 + 0.2970 * 0.2970) / sigma;
  const auto e = drank::fit_lse(s, hand_table());
  EXPECT_NEAR(e.rho_hat, expected, 1e-15);
  EXPECT_DOUBLE_EQ(e.s, 0.5);
  EXPECT_NEAR(e.phi, (1.0294 * 1.0294 + 0.2970 * 0.2970) / 4.0, 1e-15);
  EXPECT_NEAR(e.t_stat, 2.0 * e.rho_hat * std::sqrt(e.phi), 1e-15);
  EXPECT_FALSE(e.std_err.has_value());
}

TEST(FitLse, FlagsValuesOutsideUnitInterval) {
  const RankedSample s({10.0, 9.0}, {0.0, 0.0, 0.0, 0.0, 0.0, 0.0}, Tail::upper);
  const auto e = drank::fit_lse(s, ScoreTable::identity(8, 2, Tail::upper));
  EXPECT_GT(std::abs(e.rho_hat), 1.0);
  EXPECT_TRUE(e.exceeds_unit);
}

TEST(FitLse, DegenerateDesign) {
  const ScoreTable zero = ScoreTable::supplied(3, {0.0});
  EXPECT_THROW(drank::fit_lse(RankedSample({1.0}, {2.0, 3.0}), zero), drank::DegenerateDesignError);
}

TEST(FitLse, RejectsMismatchedTables) {
  const RankedSample s = hand_sample();
  EXPECT_THROW(drank::fit_lse(s, ScoreTable::identity(5, 2)), drank::InvalidArgument);
  EXPECT_THROW(drank::fit_lse(s, ScoreTable::identity(4, 1)), drank::InvalidArgument);
  EXPECT_THROW(drank::fit_lse(s, ScoreTable::identity(4, 2, Tail::upper)), drank::InvalidArgument);
}

TEST(FitModified, HandExample) {
  const RankedSample s = hand_sample();
  const double sigma = std::sqrt(8.5 / 4.0);
  const double tail = -(-1.0294 + -0.2970) / 2.0;
  const double num = -1.0294 * -2.0 + -0.2970 * -0.5 + 2.0 * tail * (1.25 - 0.0);
  const double den = 1.0294 * 1.0294 + 0.2970 * 0.2970 + 2.0 * tail * tail;
  EXPECT_NEAR(drank::fit_modified(s, hand_table()).rho_hat, num / den / sigma, 1e-14);
  // A table holding only the observed ranks falls back on the stored tail mean.
  const ScoreTable top = ScoreTable::supplied(4, {-1.0294, -0.2970});
  EXPECT_NEAR(drank::fit_modified(s, top).rho_hat, num / den / sigma, 1e-14);
}

TEST(FitModified, FlatDataGivesZero) {
  // Sum of alpha (y - mu) over the top block is zero and y_rest sits at mu.
  const RankedSample s({1.0, -1.0}, {0.0, 0.0});
  const ScoreTable t = ScoreTable::supplied(4, {1.0, 1.0, -1.0, -1.0});
  EXPECT_DOUBLE_EQ(drank::fit_modified(s, t).rho_hat, 0.0);
}

TEST(FitModified, EqualsLseWhenAllRanksObserved) {
  auto rng = drank::make_rng(1, {});
  for (const auto& d : {DistributionSpec::normal(), DistributionSpec::gamma(3, 3)}) {
    const auto data = drank::sim::gen_dataset(d, 60, 0.4, rng);
    const ScoreTable t = drank::build_score_table(d, 60, 60, {.tail = Tail::upper});
    const auto a = drank::fit_lse(data.sample, t);
    const auto b = drank::fit_modified(data.sample, t);
    EXPECT_EQ(a.rho_hat, b.rho_hat);
    EXPECT_EQ(b.method, drank::EstimatorMethod::modified);
  }
}

TEST(Estimator, NormalEquationAndAffineEquivariance) {
  auto rng = drank::make_rng(2, {});
  const auto dist = DistributionSpec::gamma(3, 3);
  const ScoreTable t = drank::build_score_table(dist, 300, 25, {.tail = Tail::upper});
  for (int rep = 0; rep < 20; ++rep) {
    const auto data = drank::sim::gen_dataset(dist, 300, 0.5, rng);
    const RankedSample s = data.sample.censored(25);
    const auto e = drank::fit_lse(s, t);
    double ortho = 0;
    for (int r = 1; r <= 25; ++r) {
      const double z = (s.y_top()[static_cast<std::size_t>(r - 1)] - s.mu_hat()) / s.sigma_hat();
      ortho += t.alpha(r) * (z - e.rho_hat * t.alpha(r));
    }
    EXPECT_LT(std::abs(ortho), 1e-12);

    std::vector<double> top, rest;
    for (double y : s.y_top()) top.push_back(-3.0 + 2.5 * y);
    for (double y : s.y_rest()) rest.push_back(-3.0 + 2.5 * y);
    const auto moved = drank::fit_lse(RankedSample(top, rest, Tail::upper), t);
    EXPECT_LT(std::abs(moved.rho_hat - e.rho_hat), 1e-12);
  }
}

ScoreTable uniform_table_with_moments(int n, int m) {
  ScoreTable::Parts p;
  p.label = "uniform-closed-form";
  p.n = n;
  p.method = drank::ScoreMethod::supplied;
  p.sigma2.emplace();
  p.beta = Eigen::MatrixXd(m, m);
  for (int r = 1; r <= m; ++r) {
    p.alpha.push_back(std::sqrt(12.0) * (static_cast<double>(r) / (n + 1) - 0.5));
    for (int s = 1; s <= m; ++s) {
      const int lo = std::min(r, s), hi = std::max(r, s);
      (*p.beta)(r - 1, s - 1) = 12.0 * lo * (n - hi + 1.0) / ((n + 1.0) * (n + 1.0) * (n + 2.0));
    }
    p.sigma2->push_back((*p.beta)(r - 1, r - 1));
  }
  return ScoreTable(std::move(p));
}

TEST(VarianceComponents, ZeroScoresGiveZero) {
  ScoreTable::Parts p;
  p.n = 5;
  p.alpha.assign(5, 0.0);
  p.sigma2 = std::vector<double>(5, 0.3);
  p.beta = Eigen::MatrixXd::Constant(5, 5, 0.1);
  const ScoreTable t(std::move(p));
  for (auto noise : {drank::NoiseVariance::order_statistic, drank::NoiseVariance::conditional_response}) {
    drank::VarianceOptions o;
    o.noise = noise;
    o.noise_variance = 0.7;
    const auto c = drank::variance_components(t, 1.0, o);
    EXPECT_EQ(c.psi1, 0.0);
    EXPECT_EQ(c.psi2, 0.0);
    EXPECT_EQ(c.phi, 0.0);
  }
}

TEST(VarianceComponents, UniformMatchesDirectSummation) {
  const int n = 10;
  const ScoreTable t = uniform_table_with_moments(n, n);
  for (int power : {1, 2}) {
    drank::VarianceOptions o;
    o.beta_power = power;
    o.noise = drank::NoiseVariance::order_statistic;
    const auto c = drank::variance_components(t, 1.0, o);
    double psi1 = 0, psi2 = 0, phi = 0;
    for (int r = 1; r <= n; ++r) {
      const double ar = std::sqrt(12.0) * (r / 11.0 - 0.5);
      const double vr = 12.0 * r * (n - r + 1.0) / (121.0 * 12.0);
      psi1 += ar * ar * vr;
      phi += ar * ar;
      for (int s = 1; s <= n; ++s) {
        const double as = std::sqrt(12.0) * (s / 11.0 - 0.5);
        const double b = 12.0 * std::min(r, s) * (n - std::max(r, s) + 1.0) / (121.0 * 12.0);
        psi2 += ar * as * std::pow(b, power);
      }
    }
    EXPECT_NEAR(c.psi1, psi1 / n, 1e-12);
    EXPECT_NEAR(c.psi2, psi2 / n, 1e-12);
    EXPECT_NEAR(c.phi, phi / n, 1e-12);
  }
}

TEST(VarianceComponents, PhiNondecreasingInS) {
  const ScoreTable t = uniform_table_with_moments(40, 40);
  drank::VarianceOptions o;
  o.noise_variance = 1.0;
  double prev = 0;
  for (int k = 1; k <= 40; ++k) {
    const double phi = drank::variance_components(t, k / 40.0, o).phi;
    EXPECT_GE(phi, prev);
    prev = phi;
  }
}

TEST(VarianceComponents, MissingMomentsAreReported) {
  const ScoreTable bare = ScoreTable::identity(10, 4);
  EXPECT_THROW(drank::variance_components(bare, 0.4), drank::InsufficientTableError);
  const ScoreTable t = uniform_table_with_moments(10, 4);
  EXPECT_THROW(drank::variance_components(t, 0.5), drank::InsufficientTableError);
  drank::VarianceOptions o;  // conditional response without a noise variance
  EXPECT_THROW(drank::variance_components(t, 0.4, o), drank::InvalidArgument);
}

TEST(AsymptoticVariance, Algebra) {
  const drank::VarianceComponents c{0.8, 0.3, 0.5};
  EXPECT_DOUBLE_EQ(drank::asymptotic_variance(c, 0.0, 1.0), 0.8 / 0.25);
  EXPECT_DOUBLE_EQ(drank::asymptotic_variance(c, 0.0, 2.0), 0.8 / 4.0 / 0.25);
  EXPECT_DOUBLE_EQ(drank::asymptotic_variance(c, 0.5, 1.0), (0.8 + 0.25 * 0.3) / 0.25);
  EXPECT_THROW(drank::asymptotic_variance({1, 1, 0}, 0.1, 1.0), drank::DegenerateDesignError);
}

TEST(TestRhoZero, NormalReference) {
  drank::Estimate e;
  e.rho_hat = 0.0;
  e.t_stat = 0.0;
  EXPECT_DOUBLE_EQ(drank::test_rho_zero(e), 1.0);
  e.rho_hat = 0.1;
  e.t_stat = 1.959963984540054;
  EXPECT_NEAR(drank::test_rho_zero(e), 0.05, 1e-12);
  EXPECT_NEAR(drank::test_rho_zero(e, drank::Alternative::greater), 0.025, 1e-12);
  e.t_stat = 0.7;
  EXPECT_DOUBLE_EQ(drank::test_rho_zero(e, drank::Alternative::greater),
                   0.5 * drank::test_rho_zero(e, drank::Alternative::two_sided));
}

TEST(FitLse, ComponentsAttachedWhenTableHasBeta) {
  const ScoreTable t = uniform_table_with_moments(30, 30);
  std::vector<double> y;
  for (int r = 1; r <= 30; ++r) y.push_back(std::sin(r) + 0.1 * r);
  const RankedSample s = RankedSample(y, {}).censored(12);
  const auto e = drank::fit_lse(s, t);
  ASSERT_TRUE(e.components);
  ASSERT_TRUE(e.std_err);
  const double noise = e.sigma_hat * e.sigma_hat * (1 - e.rho_hat * e.rho_hat);
  drank::VarianceOptions o;
  o.noise_variance = noise;
  const auto c = drank::variance_components(t, 12.0 / 30.0, o);
  EXPECT_NEAR(e.components->psi1, c.psi1, 1e-15);
  EXPECT_NEAR(*e.asym_var, drank::asymptotic_variance(c, e.rho_hat, e.sigma_hat), 1e-14);
  EXPECT_NEAR(*e.std_err, std::sqrt(*e.asym_var / 30.0), 1e-15);
}

TEST(FitMultiple, NoCovariatesReducesToLse) {
  auto rng = drank::make_rng(3, {});
  const auto d = DistributionSpec::normal();
  const auto data = drank::sim::gen_dataset(d, 200, 0.6, rng);
  const RankedSample s = data.sample.censored(30);
  const ScoreTable t = drank::build_score_table(d, 200, 30, {.tail = Tail::upper});
  const auto fit = drank::fit_multiple(s, Eigen::MatrixXd(30, 0), t, drank::Centering::mu_hat);
  EXPECT_NEAR(fit.rho_hat, drank::fit_lse(s, t).rho_hat, 1e-13);
  EXPECT_EQ(fit.eta_hat.size(), 0);
}

TEST(FitMultiple, OrthogonalCovariateHasZeroEffect) {
  // alpha and y are symmetric about the middle rank; z is antisymmetric.
  const std::vector<double> a{-2, -1, 0, 1, 2};
  const ScoreTable t = ScoreTable::supplied(6, a);
  const RankedSample s({1.0, 3.0, 0.0, 3.0, 1.0}, {4.0});
  Eigen::MatrixXd z(5, 1);
  z << -1, -2, 0, 2, 1;
  for (auto c : {drank::Centering::top_block_mean, drank::Centering::mu_hat}) {
    const auto fit = drank::fit_multiple(s, z, t, c);
    EXPECT_NEAR(fit.eta_hat(0), 0.0, 1e-14);
  }
}

TEST(FitMultiple, RankDeficiencyNamesTheBlock) {
  const ScoreTable t = ScoreTable::identity(10, 6);
  const RankedSample s({1, 5, 2, 8, 3, 4}, {0, 0, 1, 1});
  Eigen::MatrixXd dup(6, 2);
  dup << 1, 2, 3, 6, 2, 4, 5, 10, 7, 14, 1, 2;
  try {
    drank::fit_multiple(s, dup, t);
    FAIL();
  } catch (const drank::RankDeficiencyError& e) {
    EXPECT_EQ(e.block(), "covariate 2");
  }
  Eigen::MatrixXd constant = Eigen::MatrixXd::Constant(6, 1, 3.0);
  try {
    drank::fit_multiple(s, constant, t);
    FAIL();
  } catch (const drank::RankDeficiencyError& e) {
    EXPECT_EQ(e.block(), "covariate 1");
  }
  Eigen::MatrixXd span(6, 1);
  for (int r = 0; r < 6; ++r) span(r, 0) = 4.0 * t.alpha(r + 1) + 1.0;
  // After centering z equals 4 (alpha - mean alpha); with centered y the
  // 2x2 system stays regular unless alpha itself has zero mean.
  const ScoreTable centred = ScoreTable::supplied(10, {-2.5, -1.5, -0.5, 0.5, 1.5, 2.5});
  for (int r = 0; r < 6; ++r) span(r, 0) = 4.0 * centred.alpha(r + 1);
  try {
    drank::fit_multiple(s, span, centred);
    FAIL();
  } catch (const drank::RankDeficiencyError& e) {
    EXPECT_EQ(e.block(), "score-covariate");
  }
}

TEST(FitMultiple, RecoversCoefficientsWithMuHatCentering) {
  const int n = 2000, m = 100, reps = 500;
  const double delta = 0.5;
  const Eigen::Vector2d eta(0.8, -0.4);
  const auto d = DistributionSpec::normal();
  const ScoreTable t = drank::build_score_table(d, n, m, {.tail = Tail::upper});
  drank::Sampler draw(d);
  std::normal_distribution<double> g;
  std::vector<double> est_d, est_e0, est_e1;
  for (int rep = 0; rep < reps; ++rep) {
    auto rng = drank::make_rng(4, {static_cast<std::uint64_t>(rep)});
    std::vector<double> x(n), y(n);
    Eigen::MatrixXd z(n, 2);
    for (int i = 0; i < n; ++i) {
      x[i] = draw(rng);
      z(i, 0) = g(rng);
      z(i, 1) = g(rng);
      y[i] = delta * x[i] + eta(0) * z(i, 0) + eta(1) * z(i, 1) + g(rng);
    }
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return x[a] > x[b]; });
    std::vector<double> top, rest;
    Eigen::MatrixXd zt(m, 2);
    for (int i = 0; i < n; ++i) {
      if (i < m) {
        top.push_back(y[order[i]]);
        zt.row(i) = z.row(order[i]);
      } else {
        rest.push_back(y[order[i]]);
      }
    }
    const auto fit = drank::fit_multiple(RankedSample(top, rest, Tail::upper), zt, t,
                                         drank::Centering::mu_hat);
    est_d.push_back(fit.delta_hat);
    est_e0.push_back(fit.eta_hat(0));
    est_e1.push_back(fit.eta_hat(1));
  }
  auto check = [&](const std::vector<double>& v, double truth) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / reps;
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double se = std::sqrt(ss / (reps - 1) / reps);
    EXPECT_LT(std::abs(mean - truth), 3 * se) << "mean " << mean << " truth " << truth;
  };
  check(est_d, delta);
  check(est_e0, eta(0));
  check(est_e1, eta(1));
}

TEST(EstimateJson, CarriesFields) {
  const auto e = drank::fit_lse(hand_sample(), hand_table());
  const std::string text = drank::estimate_to_json(e);
  for (const char* field : {"\"rho_hat\"", "\"std_err\"", "\"p_value\"", "\"score_table_id\"",
                            "\"variance_components\"", "\"method\": \"lse\""})
    EXPECT_NE(text.find(field), std::string::npos) << field;
}

}  // namespace
