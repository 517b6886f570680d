#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "drank/errors.hpp"
#include "drank/score_table.hpp"

namespace {

using drank::BuildOptions;
using drank::DistributionSpec;
using drank::ScoreMethod;
using drank::ScoreTable;
using drank::Tail;

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("drank_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

TEST(ScoreTable, UniformFullTable) {
  const ScoreTable t = drank::build_score_table(DistributionSpec::uniform(), 4, 4);
  const double s12 = std::sqrt(12.0);
  const std::vector<double> expected{-0.3 * s12, -0.1 * s12, 0.1 * s12, 0.3 * s12};
  for (int r = 1; r <= 4; ++r) EXPECT_NEAR(t.alpha(r), expected[static_cast<std::size_t>(r - 1)], 1e-12);
  EXPECT_FALSE(t.alpha_tail_mean().has_value());
}

TEST(ScoreTable, TailMeanFromZeroSum) {
  const ScoreTable t = drank::build_score_table(DistributionSpec::normal(), 4, 2);
  ASSERT_TRUE(t.alpha_tail_mean());
  EXPECT_DOUBLE_EQ(*t.alpha_tail_mean(), -(t.alpha(1) + t.alpha(2)) / 2.0);
  EXPECT_NEAR(*t.alpha_tail_mean(), 0.66319337763930473, 1e-9);
}

TEST(ScoreTable, GammaTopRanksIncreasingAndConvex) {
  BuildOptions opts;
  opts.tail = Tail::lower;
  const ScoreTable full = drank::build_score_table(DistributionSpec::gamma(3, 3), 500, 500, opts);
  for (int r = 2; r <= 500; ++r) EXPECT_LT(full.alpha(r - 1), full.alpha(r));
  for (int r = 482; r < 500; ++r)
    EXPECT_GE(full.alpha(r + 1) - full.alpha(r), full.alpha(r) - full.alpha(r - 1));

  opts.tail = Tail::upper;
  const ScoreTable top = drank::build_score_table(DistributionSpec::gamma(3, 3), 500, 20, opts);
  for (int r = 1; r <= 20; ++r) EXPECT_DOUBLE_EQ(top.alpha(r), full.alpha(501 - r));
  for (int r = 2; r <= 20; ++r) EXPECT_GT(top.alpha(r - 1), top.alpha(r));
  EXPECT_NEAR(top.alpha(1), 4.66150049000093816, 1e-9);
}

TEST(ScoreTable, IdentityScoresAreStandardizedOverAllRanks) {
  const ScoreTable full = ScoreTable::identity(9, 9);
  double s = 0, s2 = 0;
  for (double a : full.alpha()) {
    s += a;
    s2 += a * a;
  }
  EXPECT_NEAR(s, 0.0, 1e-12);
  EXPECT_NEAR(s2 / 9, 1.0, 1e-12);
  const ScoreTable top = ScoreTable::identity(9, 3, Tail::upper);
  EXPECT_DOUBLE_EQ(top.alpha(1), full.alpha(9));
  EXPECT_DOUBLE_EQ(top.alpha(3), full.alpha(7));
}

TEST(ScoreTable, RejectsNonMonotoneDistributionScores) {
  ScoreTable::Parts p;
  p.label = "broken";
  p.n = 3;
  p.method = ScoreMethod::exact_quadrature;
  p.alpha = {-1.0, 0.5, 0.2};
  EXPECT_THROW(ScoreTable{p}, drank::AccuracyError);
}

TEST(ScoreTable, RejectsBadShapes) {
  EXPECT_THROW(ScoreTable::supplied(3, {1, 2, 3, 4}), drank::InvalidArgument);
  EXPECT_THROW(ScoreTable::supplied(3, {}), drank::InvalidArgument);
  ScoreTable::Parts p;
  p.n = 3;
  p.alpha = {-1, 0, 1};
  p.beta = Eigen::MatrixXd::Identity(3, 3);
  (*p.beta)(0, 1) = 0.5;
  EXPECT_THROW(ScoreTable{p}, drank::InvalidArgument);
  p.beta = -Eigen::MatrixXd::Identity(3, 3);
  EXPECT_THROW(ScoreTable{p}, drank::InvalidArgument);
}

TEST(ScoreTable, JsonRoundTripPreservesEverything) {
  BuildOptions opts;
  opts.with_beta = true;
  opts.beta_mc = {5000, 4};
  const ScoreTable t = drank::build_score_table(DistributionSpec::pareto(2.3), 50, 6, opts);
  ASSERT_TRUE(t.sigma2());
  ASSERT_TRUE(t.beta());
  const ScoreTable back = ScoreTable::from_json_text(t.to_json_text());
  EXPECT_EQ(back.id(), t.id());
  EXPECT_EQ(back.key(), t.key());
  EXPECT_EQ(std::vector<double>(back.alpha().begin(), back.alpha().end()),
            std::vector<double>(t.alpha().begin(), t.alpha().end()));
  EXPECT_EQ(*back.sigma2(), *t.sigma2());
  EXPECT_EQ(*back.beta(), *t.beta());
}

TEST(ScoreTable, TamperedJsonIsRejected) {
  const ScoreTable t = drank::build_score_table(DistributionSpec::normal(), 10, 3);
  std::string text = t.to_json_text();
  const auto pos = text.find("\"n\":10");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 6, "\"n\":11");
  EXPECT_THROW(ScoreTable::from_json_text(text), drank::InvalidArgument);
  EXPECT_THROW(ScoreTable::from_json_text("{not json"), drank::InvalidArgument);
}

TEST(ScoreTable, KeyMatchesRequest) {
  BuildOptions opts;
  opts.tail = Tail::upper;
  const auto dist = DistributionSpec::gamma(3, 3);
  const ScoreTable t = drank::build_score_table(dist, 30, 5, opts);
  EXPECT_EQ(t.key(), drank::score_table_key(dist, 30, 5, opts));
  opts.method = ScoreMethod::monte_carlo;
  opts.mc = {2000, 1};
  const ScoreTable mc = drank::build_score_table(dist, 30, 5, opts);
  EXPECT_EQ(mc.key(), drank::score_table_key(dist, 30, 5, opts));
  ASSERT_TRUE(mc.alpha_stderr());
}

TEST(ScoreCache, StoresLoadsAndRecomputesCorruptFiles) {
  const auto dir = fresh_dir("cache");
  const drank::ScoreCache cache(dir);
  const auto dist = DistributionSpec::half_normal();
  BuildOptions opts;
  const ScoreTable first = drank::build_score_table(dist, 40, 10, opts, &cache);
  const auto path = cache.path_for(first.key());
  ASSERT_TRUE(std::filesystem::exists(path));
  const auto hit = cache.load(first.key());
  ASSERT_TRUE(hit);
  EXPECT_EQ(hit->id(), first.id());

  {
    std::ofstream out(path, std::ios::trunc);
    out << "{\"format\":\"drank.score_table\",\"garbage\":1}";
  }
  EXPECT_FALSE(cache.load(first.key()));
  const ScoreTable again = drank::build_score_table(dist, 40, 10, opts, &cache);
  EXPECT_EQ(again.id(), first.id());
  EXPECT_TRUE(cache.load(first.key()));
  std::filesystem::remove_all(dir);
}

TEST(ScoreTable, CsvExport) {
  BuildOptions opts;
  opts.with_sigma2 = true;
  const ScoreTable t = drank::build_score_table(DistributionSpec::uniform(), 4, 4, opts);
  std::ostringstream out;
  drank::write_score_csv(out, t, {"run abc"});
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "# run abc");
  std::getline(in, line);
  EXPECT_EQ(line, "rank,alpha,sigma2");
  std::getline(in, line);
  EXPECT_EQ(line.rfind("1,-1.039230484541", 0), 0u) << line;
}

TEST(ScoreTable, MethodsAgreeOnModerateRanks) {
  const auto dist = DistributionSpec::normal();
  BuildOptions dj;
  dj.method = ScoreMethod::david_johnson;
  const ScoreTable a = drank::build_score_table(dist, 200, 200);
  const ScoreTable b = drank::build_score_table(dist, 200, 200, dj);
  for (int r = 20; r <= 180; ++r) EXPECT_NEAR(a.alpha(r), b.alpha(r), 1e-3);
}

TEST(ScoreTable, WorkerCountDoesNotChangeValues) {
  BuildOptions one, three;
  three.workers = 3;
  const auto dist = DistributionSpec::pareto(2.3);
  EXPECT_EQ(drank::build_score_table(dist, 300, 40, one).id(),
            drank::build_score_table(dist, 300, 40, three).id());
}

}  // namespace
