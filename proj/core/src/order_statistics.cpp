#include "drank/order_statistics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "drank/errors.hpp"
#include "drank/parallel.hpp"
#include "drank/quadrature.hpp"
#include "drank/rng.hpp"

namespace drank::scores {

namespace {

constexpr double kQuadTol = 1e-13;
constexpr std::size_t kBlockUnits = 4096;

void check_rank(int r, int n) {
  if (n < 1 || r < 1 || r > n)
    throw InvalidArgument(fmt::format("rank {} is outside 1..{}", r, n));
}

double log_beta(int r, int n) {
  return std::lgamma(static_cast<double>(r)) + std::lgamma(static_cast<double>(n - r + 1)) -
         std::lgamma(static_cast<double>(n + 1));
}

double ipow(double x, int power) { return power == 1 ? x : x * x; }

// Raw quantile at u, choosing the tail-accurate branch.
double raw_q(const DistributionSpec& dist, double u) {
  return u <= 0.5 ? dist.raw_quantile(u) : dist.raw_quantile_upper(1.0 - u);
}

}  // namespace

RawMoment raw_order_statistic_moment(const DistributionSpec& dist, int r, int n,
                                     int power) {
  check_rank(r, n);
  if (power != 1 && power != 2) throw InvalidArgument("moment power must be 1 or 2");

  const double lb = log_beta(r, n);
  const double nd = n;
  const double p0 = r / (nd + 1.0);
  const double sd0 = std::sqrt(p0 * (1.0 - p0) / (nd + 2.0));
  const double lo_cut = std::max(p0 - 10.0 * sd0, 0.5 * p0);
  const double hi_cut = std::min(p0 + 10.0 * sd0, 0.5 * (1.0 + p0));

  quad::Options opts;
  opts.abs_tol = kQuadTol;
  opts.rel_tol = kQuadTol;

  // Lower piece, u = t^(1/r): u^(r-1) du = dt / r.
  const double k_lo = 1.0 / r;
  auto lower = [&](double t) {
    const double u = std::exp(k_lo * std::log(t));
    const double w = (n - r) * std::log1p(-u) + std::log(k_lo) - lb;
    return ipow(raw_q(dist, u), power) * std::exp(w);
  };
  const double t_lo = std::exp(r * std::log(lo_cut));

  // Middle piece in u directly, with breakpoints around the kernel's bulk.
  auto middle = [&](double u) {
    const double w = (r - 1) * std::log(u) + (n - r) * std::log1p(-u) - lb;
    return ipow(raw_q(dist, u), power) * std::exp(w);
  };
  std::vector<double> mid_points{lo_cut};
  for (double k : {-6.0, -3.0, -1.0, 1.0, 3.0, 6.0}) {
    const double x = p0 + k * sd0;
    if (x > lo_cut && x < hi_cut) mid_points.push_back(x);
  }
  mid_points.push_back(hi_cut);
  std::sort(mid_points.begin(), mid_points.end());

  // Upper piece in w = 1 - u = t^c. The exponent c flattens the kernel's
  // (1-u)^(n-r) factor together with a power-law quantile singularity.
  const double expo = dist.upper_singularity_exponent() * power;
  const double c = 1.0 / (n - r + 1 - expo);
  auto upper = [&](double t) {
    const double lt = std::log(t);
    const double w = std::exp(c * lt);
    const double lw = (c * (n - r + 1) - 1.0) * lt + (r - 1) * std::log1p(-w) +
                      std::log(c) - lb;
    return ipow(dist.raw_quantile_upper(w), power) * std::exp(lw);
  };
  const double t_hi = std::exp(std::log1p(-hi_cut) / c);

  // A cut that underflows leaves a piece of negligible kernel mass; panels
  // of subnormal width would round nodes below zero.
  constexpr double kTiny = std::numeric_limits<double>::min();
  const quad::Result a = t_lo > kTiny ? quad::integrate(lower, 0.0, t_lo, opts) : quad::Result{0.0, 0.0, 0, true};
  const quad::Result b = quad::integrate(middle, mid_points, opts);
  const quad::Result d = t_hi > kTiny ? quad::integrate(upper, 0.0, t_hi, opts) : quad::Result{0.0, 0.0, 0, true};

  RawMoment out;
  out.value = a.value + b.value + d.value;
  out.abs_error = a.abs_error + b.abs_error + d.abs_error;
  out.converged = a.converged && b.converged && d.converged && std::isfinite(out.value);
  return out;
}

double mos_exact(const DistributionSpec& dist, int r, int n) {
  const RawMoment m = raw_order_statistic_moment(dist, r, n, 1);
  const double err = m.abs_error / dist.raw_sd();
  if (!m.converged || !(err <= kExactTolerance))
    throw AccuracyError(
        fmt::format("quadrature for E(Z_({}:{})) of {} reached error {:.3g} only", r, n,
                    dist.key(), err),
        err);
  return dist.to_standard(m.value);
}

double os_variance_exact(const DistributionSpec& dist, int r, int n) {
  const RawMoment m1 = raw_order_statistic_moment(dist, r, n, 1);
  const RawMoment m2 = raw_order_statistic_moment(dist, r, n, 2);
  const double s2 = dist.raw_sd() * dist.raw_sd();
  const double err = (m2.abs_error + 2.0 * std::abs(m1.value) * m1.abs_error) / s2;
  if (!m1.converged || !m2.converged || !(err <= kExactTolerance))
    throw AccuracyError(
        fmt::format("quadrature for Var(Z_({}:{})) of {} reached error {:.3g} only", r, n,
                    dist.key(), err),
        err);
  return std::max(0.0, (m2.value - m1.value * m1.value) / s2);
}

namespace {

struct QuantilePoint {
  double p;
  double q;
  double z;
  double f;
};

QuantilePoint quantile_point(const DistributionSpec& dist, int r, int n) {
  check_rank(r, n);
  QuantilePoint out;
  out.p = r / (n + 1.0);
  out.q = (n + 1.0 - r) / (n + 1.0);
  out.z = out.p <= 0.5 ? dist.quantile(out.p) : dist.quantile_upper(out.q);
  out.f = dist.density(out.z);
  if (!std::isfinite(out.z) || !std::isfinite(out.f) || !(out.f > 0.0))
    throw DegenerateDensityError(fmt::format(
        "density of {} vanishes or is undefined at Q({}/{}); use exact or Monte Carlo scores",
        dist.key(), r, n + 1));
  return out;
}

}  // namespace

double mos_approx(const DistributionSpec& dist, int r, int n) {
  const QuantilePoint pt = quantile_point(dist, r, n);
  const double fprime = dist.density_derivative(pt.z);
  const double q2 = -fprime / (pt.f * pt.f * pt.f);
  const double value = pt.z + pt.p * pt.q / (2.0 * (n + 2.0)) * q2;
  if (!std::isfinite(value))
    throw DegenerateDensityError(fmt::format(
        "expansion term for rank {} of {} is not finite for {}; use exact or Monte Carlo "
        "scores",
        r, n, dist.key()));
  return value;
}

double os_variance_approx(const DistributionSpec& dist, int r, int n) {
  const QuantilePoint pt = quantile_point(dist, r, n);
  return pt.p * pt.q / ((n + 2.0) * pt.f * pt.f);
}

namespace {

// Per-rank running mean and sum of squared deviations.
struct Welford {
  std::vector<double> mean;
  std::vector<double> m2;
  std::size_t count = 0;

  explicit Welford(std::size_t dim) : mean(dim, 0.0), m2(dim, 0.0) {}

  void add(const std::vector<double>& x) {
    ++count;
    const double inv = 1.0 / static_cast<double>(count);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double delta = x[i] - mean[i];
      mean[i] += delta * inv;
      m2[i] += delta * (x[i] - mean[i]);
    }
  }

  // Chan et al. pairwise merge.
  void merge(const Welford& other) {
    if (other.count == 0) return;
    const double na = static_cast<double>(count);
    const double nb = static_cast<double>(other.count);
    const double nt = na + nb;
    for (std::size_t i = 0; i < mean.size(); ++i) {
      const double delta = other.mean[i] - mean[i];
      mean[i] += delta * nb / nt;
      m2[i] += other.m2[i] + delta * delta * na * nb / nt;
    }
    count += other.count;
  }
};

}  // namespace

MonteCarloMos mos_mc(const DistributionSpec& dist, int n, std::size_t reps,
                     std::uint64_t seed, unsigned workers) {
  if (n < 1) throw InvalidArgument("sample size must be positive");
  if (reps < 1000) throw InvalidArgument("Monte Carlo scores need at least 1000 replicates");

  const bool antithetic = dist.symmetric();
  const std::size_t units = antithetic ? reps / 2 : reps;
  const std::size_t blocks = (units + kBlockUnits - 1) / kBlockUnits;
  const std::size_t un = static_cast<std::size_t>(n);

  std::vector<Welford> partial(blocks, Welford(un));
  parallel_for(blocks, workers, [&](std::size_t b) {
    Rng rng = make_rng(seed, {b});
    Sampler draw(dist);
    const std::size_t count = std::min(kBlockUnits, units - b * kBlockUnits);
    std::vector<double> x(un);
    std::vector<double> unit(un);
    Welford& acc = partial[b];
    for (std::size_t k = 0; k < count; ++k) {
      for (auto& v : x) v = draw(rng);
      std::sort(x.begin(), x.end());
      if (antithetic) {
        // Sorted -x is the reversed negation of sorted x.
        for (std::size_t i = 0; i < un; ++i) unit[i] = 0.5 * (x[i] - x[un - 1 - i]);
        acc.add(unit);
      } else {
        acc.add(x);
      }
    }
  });

  Welford total(un);
  for (const auto& p : partial) total.merge(p);

  MonteCarloMos out;
  out.antithetic = antithetic;
  out.reps = antithetic ? 2 * units : units;
  out.alpha = total.mean;
  out.stderr_.resize(un);
  const double cnt = static_cast<double>(total.count);
  for (std::size_t i = 0; i < un; ++i)
    out.stderr_[i] = std::sqrt(total.m2[i] / (cnt - 1.0) / cnt);
  return out;
}

namespace {

struct CovAccumulator {
  Eigen::VectorXd mean;
  Eigen::MatrixXd comoment;
  std::size_t count = 0;

  explicit CovAccumulator(int dim)
      : mean(Eigen::VectorXd::Zero(dim)), comoment(Eigen::MatrixXd::Zero(dim, dim)) {}

  void add(const Eigen::VectorXd& x) {
    ++count;
    const Eigen::VectorXd delta = x - mean;
    mean += delta / static_cast<double>(count);
    comoment.noalias() += delta * (x - mean).transpose();
  }

  void merge(const CovAccumulator& other) {
    if (other.count == 0) return;
    const double na = static_cast<double>(count);
    const double nb = static_cast<double>(other.count);
    const double nt = na + nb;
    const Eigen::VectorXd delta = other.mean - mean;
    mean += delta * (nb / nt);
    comoment += other.comoment + delta * delta.transpose() * (na * nb / nt);
    count += other.count;
  }
};

}  // namespace

MonteCarloMoments mc_order_statistic_moments(const DistributionSpec& dist, int n, int m,
                                             Tail tail, std::size_t reps,
                                             std::uint64_t seed, unsigned workers) {
  if (n < 1 || m < 1 || m > n)
    throw InvalidArgument(fmt::format("need 1 <= m <= n (got m={}, n={})", m, n));
  if (reps < 1000) throw InvalidArgument("Monte Carlo moments need at least 1000 replicates");

  const std::size_t blocks = (reps + kBlockUnits - 1) / kBlockUnits;
  std::vector<CovAccumulator> partial(blocks, CovAccumulator(m));
  parallel_for(blocks, workers, [&](std::size_t b) {
    // Distinct stream family from mos_mc so the two never share draws.
    Rng rng = make_rng(seed, {0xC0FFEEULL, b});
    Sampler draw(dist);
    const std::size_t count = std::min(kBlockUnits, reps - b * kBlockUnits);
    std::vector<double> x(static_cast<std::size_t>(n));
    Eigen::VectorXd ranked(m);
    CovAccumulator& acc = partial[b];
    for (std::size_t k = 0; k < count; ++k) {
      for (auto& v : x) v = draw(rng);
      if (tail == Tail::lower) {
        std::partial_sort(x.begin(), x.begin() + m, x.end());
        for (int i = 0; i < m; ++i) ranked[i] = x[static_cast<std::size_t>(i)];
      } else {
        std::partial_sort(x.begin(), x.begin() + m, x.end(), std::greater<>());
        for (int i = 0; i < m; ++i) ranked[i] = x[static_cast<std::size_t>(i)];
      }
      acc.add(ranked);
    }
  });

  CovAccumulator total(m);
  for (const auto& p : partial) total.merge(p);

  MonteCarloMoments out;
  out.reps = total.count;
  out.mean = total.mean;
  const double cnt = static_cast<double>(total.count);
  out.cov = total.comoment / (cnt - 1.0);
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  out.mean_stderr = (out.cov.diagonal().array() / cnt).sqrt().matrix();
  return out;
}

Eigen::MatrixXd cov_os(const DistributionSpec& dist, int n, int m,
                       const CovOptions& options) {
  if (n < 1 || m < 1 || m > n)
    throw InvalidArgument(fmt::format("need 1 <= m <= n (got m={}, n={})", m, n));

  if (options.method == CovMethod::monte_carlo)
    return mc_order_statistic_moments(dist, n, m, options.tail, options.reps, options.seed,
                                      options.workers)
        .cov;

  std::vector<QuantilePoint> pts;
  pts.reserve(static_cast<std::size_t>(m));
  for (int rank = 1; rank <= m; ++rank)
    pts.push_back(quantile_point(dist, order_statistic_index(options.tail, rank, n), n));

  Eigen::MatrixXd beta(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = i; j < m; ++j) {
      const QuantilePoint& a = pts[static_cast<std::size_t>(i)];
      const QuantilePoint& b = pts[static_cast<std::size_t>(j)];
      const QuantilePoint& lo = a.p <= b.p ? a : b;
      const QuantilePoint& hi = a.p <= b.p ? b : a;
      const double v = lo.p * hi.q / ((n + 2.0) * lo.f * hi.f);
      beta(i, j) = v;
      beta(j, i) = v;
    }
  }
  return beta;
}

}  // namespace drank::scores
