#include "drank/distribution.hpp"

#include <cmath>
#include <numbers>
#include <regex>

#include <boost/math/special_functions/gamma.hpp>
#include <fmt/format.h>

#include "drank/errors.hpp"
#include "drank/normal.hpp"
#include "drank/order_statistics.hpp"

namespace drank {

namespace {

constexpr double kStandardizationTol = 1e-8;

void check_probability(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw DomainError(fmt::format("probability {} is outside (0, 1)", p));
}

}  // namespace

DistributionSpec::DistributionSpec(Family family, double shape, double rate,
                                   double tail_index)
    : family_(family), shape_(shape), rate_(rate), tail_index_(tail_index) {
  switch (family_) {
    case Family::uniform:
      mean_ = 0.5;
      sd_ = std::sqrt(1.0 / 12.0);
      break;
    case Family::normal:
      mean_ = 0.0;
      sd_ = 1.0;
      break;
    case Family::half_normal:
      mean_ = std::sqrt(2.0 / std::numbers::pi);
      sd_ = std::sqrt(1.0 - 2.0 / std::numbers::pi);
      break;
    case Family::gamma:
      mean_ = shape_ / rate_;
      sd_ = std::sqrt(shape_) / rate_;
      break;
    case Family::pareto: {
      const double a = tail_index_;
      mean_ = a / (a - 1.0);
      sd_ = std::sqrt(a / ((a - 1.0) * (a - 1.0) * (a - 2.0)));
      break;
    }
  }
  verify_standardization();
}

DistributionSpec DistributionSpec::uniform() { return {Family::uniform, 0, 0, 0}; }
DistributionSpec DistributionSpec::normal() { return {Family::normal, 0, 0, 0}; }
DistributionSpec DistributionSpec::half_normal() {
  return {Family::half_normal, 0, 0, 0};
}

DistributionSpec DistributionSpec::gamma(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0) || !std::isfinite(shape) || !std::isfinite(rate))
    throw InvalidArgument(
        fmt::format("gamma requires positive shape and rate (got {}, {})", shape, rate));
  return {Family::gamma, shape, rate, 0};
}

DistributionSpec DistributionSpec::pareto(double tail_index) {
  if (!(tail_index > 2.0) || !std::isfinite(tail_index))
    throw InvalidArgument(fmt::format(
        "pareto tail index must exceed 2 for a finite variance (got {})", tail_index));
  return {Family::pareto, 0, 0, tail_index};
}

DistributionSpec DistributionSpec::parse(const std::string& text) {
  static const std::regex pattern(
      R"(^\s*([a-z_]+)\s*(?:\(\s*([^,\s)]+)\s*(?:,\s*([^,\s)]+)\s*)?\))?\s*$)");
  std::smatch match;
  if (!std::regex_match(text, match, pattern))
    throw InvalidArgument("cannot parse distribution '" + text + "'");
  const std::string name = match[1];
  auto number = [&](int group) {
    if (!match[group].matched)
      throw InvalidArgument("distribution '" + text + "' is missing a parameter");
    try {
      std::size_t used = 0;
      const double v = std::stod(match[group].str(), &used);
      if (used != static_cast<std::size_t>(match[group].length())) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw InvalidArgument("bad numeric parameter in '" + text + "'");
    }
  };
  auto no_params = [&] {
    if (match[2].matched)
      throw InvalidArgument("distribution '" + name + "' takes no parameters");
  };
  if (name == "uniform") return no_params(), uniform();
  if (name == "normal") return no_params(), normal();
  if (name == "half_normal" || name == "halfnormal") return no_params(), half_normal();
  if (name == "gamma") return gamma(number(2), number(3));
  if (name == "pareto" || name == "power_law") {
    if (match[3].matched) throw InvalidArgument("pareto takes one parameter");
    return pareto(number(2));
  }
  throw InvalidArgument("unknown distribution family '" + name + "'");
}

std::string DistributionSpec::key() const {
  switch (family_) {
    case Family::uniform:
      return "uniform";
    case Family::normal:
      return "normal";
    case Family::half_normal:
      return "half_normal";
    case Family::gamma:
      return fmt::format("gamma({},{})", shape_, rate_);
    case Family::pareto:
      return fmt::format("pareto({})", tail_index_);
  }
  return "unknown";
}

void DistributionSpec::verify_standardization() const {
  // E(Z) and E(Z^2) from the quantile integral, i.e. the n = 1 order statistic.
  const scores::RawMoment m1 = scores::raw_order_statistic_moment(*this, 1, 1, 1);
  const scores::RawMoment m2 = scores::raw_order_statistic_moment(*this, 1, 1, 2);
  const double mean_z = (m1.value - mean_) / sd_;
  const double var_z = (m2.value - m1.value * m1.value) / (sd_ * sd_);
  if (!(std::abs(mean_z) < kStandardizationTol) ||
      !(std::abs(var_z - 1.0) < kStandardizationTol))
    throw AccuracyError(
        fmt::format("standardization check failed for {}: mean {:.3g}, variance {:.12g}",
                    key(), mean_z, var_z),
        std::max(std::abs(mean_z), std::abs(var_z - 1.0)));
}

double DistributionSpec::raw_quantile(double p) const {
  switch (family_) {
    case Family::uniform:
      return p;
    case Family::normal:
      return normal::quantile(p);
    case Family::half_normal:
      return normal::quantile_upper(0.5 * (1.0 - p));
    case Family::gamma:
      return boost::math::gamma_p_inv(shape_, p) / rate_;
    case Family::pareto:
      return std::pow(1.0 - p, -1.0 / tail_index_);
  }
  return std::nan("");
}

double DistributionSpec::raw_quantile_upper(double q) const {
  switch (family_) {
    case Family::uniform:
      return 1.0 - q;
    case Family::normal:
      return normal::quantile_upper(q);
    case Family::half_normal:
      return normal::quantile_upper(0.5 * q);
    case Family::gamma:
      return boost::math::gamma_q_inv(shape_, q) / rate_;
    case Family::pareto:
      return std::pow(q, -1.0 / tail_index_);
  }
  return std::nan("");
}

double DistributionSpec::raw_density(double x) const {
  switch (family_) {
    case Family::uniform:
      return (x >= 0.0 && x <= 1.0) ? 1.0 : 0.0;
    case Family::normal:
      return normal::pdf(x);
    case Family::half_normal:
      return x >= 0.0 ? 2.0 * normal::pdf(x) : 0.0;
    case Family::gamma:
      if (x <= 0.0) return 0.0;
      return std::exp(shape_ * std::log(rate_) + (shape_ - 1.0) * std::log(x) -
                      rate_ * x - std::lgamma(shape_));
    case Family::pareto:
      return x >= 1.0 ? tail_index_ * std::pow(x, -tail_index_ - 1.0) : 0.0;
  }
  return std::nan("");
}

double DistributionSpec::raw_density_derivative(double x) const {
  switch (family_) {
    case Family::uniform:
      return 0.0;
    case Family::normal:
      return -x * normal::pdf(x);
    case Family::half_normal:
      return x >= 0.0 ? -2.0 * x * normal::pdf(x) : 0.0;
    case Family::gamma:
      if (x <= 0.0) return 0.0;
      return raw_density(x) * ((shape_ - 1.0) / x - rate_);
    case Family::pareto:
      return x >= 1.0 ? -tail_index_ * (tail_index_ + 1.0) *
                            std::pow(x, -tail_index_ - 2.0)
                      : 0.0;
  }
  return std::nan("");
}

double DistributionSpec::quantile(double p) const {
  check_probability(p);
  return to_standard(raw_quantile(p));
}

double DistributionSpec::quantile_upper(double q) const {
  check_probability(q);
  return to_standard(raw_quantile_upper(q));
}

double DistributionSpec::density(double z) const {
  return sd_ * raw_density(mean_ + sd_ * z);
}

double DistributionSpec::density_derivative(double z) const {
  return sd_ * sd_ * raw_density_derivative(mean_ + sd_ * z);
}

Sampler::Sampler(const DistributionSpec& dist)
    : dist_(dist),
      gamma_(dist.family() == Family::gamma ? dist.shape() : 1.0,
             dist.family() == Family::gamma ? 1.0 / dist.rate() : 1.0) {}

double Sampler::raw(Rng& rng) {
  switch (dist_.family()) {
    case Family::uniform:
      return uniform_(rng);
    case Family::normal:
      return normal_(rng);
    case Family::half_normal:
      return std::abs(normal_(rng));
    case Family::gamma:
      return gamma_(rng);
    case Family::pareto:
      // 1 - U lies in (0, 1], so the power is finite.
      return std::pow(1.0 - uniform_(rng), -1.0 / dist_.tail_index());
  }
  return std::nan("");
}

double Sampler::operator()(Rng& rng) { return dist_.to_standard(raw(rng)); }

}  // namespace drank
