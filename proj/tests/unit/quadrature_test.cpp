#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "drank/quadrature.hpp"

namespace {

using drank::quad::integrate;

TEST(Quadrature, PolynomialsAreExact) {
  for (int k = 0; k <= 20; ++k) {
    const auto r = integrate([k](double x) { return std::pow(x, k); }, 0.0, 1.0);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.value, 1.0 / (k + 1), 1e-15) << "k=" << k;
  }
}

TEST(Quadrature, Sine) {
  const auto r = integrate([](double x) { return std::sin(x); }, 0.0, std::numbers::pi);
  EXPECT_NEAR(r.value, 2.0, 1e-14);
}

TEST(Quadrature, IntegrableEndpointSingularity) {
  const auto r = integrate([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 1.0);
  EXPECT_NEAR(r.value, 2.0, 1e-10);
}

TEST(Quadrature, BreakpointsMatchSingleInterval) {
  auto f = [](double x) { return std::exp(-x * x); };
  const auto whole = integrate(f, -3.0, 4.0);
  const auto split = integrate(f, std::vector<double>{-3.0, -1.0, 0.5, 4.0});
  EXPECT_NEAR(whole.value, split.value, 1e-14);
  EXPECT_NEAR(whole.value, 0.5 * std::sqrt(std::numbers::pi) * (std::erf(4.0) + std::erf(3.0)), 1e-14);
}

TEST(Quadrature, ReportsFailureInsteadOfThrowing) {
  drank::quad::Options opts;
  opts.max_intervals = 3;
  const auto r = integrate([](double x) { return std::sin(1.0 / x); }, 1e-6, 1.0, opts);
  EXPECT_FALSE(r.converged);
  EXPECT_GT(r.abs_error, 0.0);
}

}  // namespace
