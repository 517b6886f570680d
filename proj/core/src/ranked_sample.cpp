#include "drank/ranked_sample.hpp"

#include <cmath>
#include <functional>
#include <string_view>

#include <fmt/format.h>

#include "drank/errors.hpp"
#include "drank/rng.hpp"
#include "drank/summation.hpp"

namespace drank {

namespace {

std::uint64_t hash_block(std::span<const double> v) {
  const std::string_view bytes(reinterpret_cast<const char*>(v.data()), v.size_bytes());
  return std::hash<std::string_view>{}(bytes);
}

}  // namespace

RankedSample::RankedSample(std::vector<double> y_top, std::vector<double> y_rest, Tail tail)
    : y_top_(std::move(y_top)), y_rest_(std::move(y_rest)), tail_(tail) {
  if (y_top_.empty()) throw InvalidArgument("a ranked sample needs at least one ranked response");
  CompensatedSum sum;
  auto check = [](const std::vector<double>& v, const char* block) {
    for (std::size_t i = 0; i < v.size(); ++i)
      if (!std::isfinite(v[i]))
        throw InvalidArgument(fmt::format("non-finite response at {} position {}", block, i + 1));
  };
  check(y_top_, "ranked");
  check(y_rest_, "unranked");
  for (double y : y_top_) sum += y;
  for (double y : y_rest_) sum += y;
  const double nn = static_cast<double>(n());
  mu_ = sum.value() / nn;
  CompensatedSum ss;
  for (double y : y_top_) ss += (y - mu_) * (y - mu_);
  for (double y : y_rest_) ss += (y - mu_) * (y - mu_);
  sigma_ = std::sqrt(ss.value() / nn);
  if (!(sigma_ > 0.0))
    throw InvalidArgument("all responses are equal; the sample standard deviation is zero");
  fingerprint_ = derive_seed(hash_block(y_top_),
                             {hash_block(y_rest_), static_cast<std::uint64_t>(tail_),
                              static_cast<std::uint64_t>(y_top_.size())});
}

RankedSample RankedSample::censored(int k) const {
  if (k < 1 || k > m())
    throw InvalidArgument(fmt::format("cannot keep {} of {} ranks", k, m()));
  std::vector<double> top(y_top_.begin(), y_top_.begin() + k);
  std::vector<double> rest(y_top_.begin() + k, y_top_.end());
  rest.insert(rest.end(), y_rest_.begin(), y_rest_.end());
  return RankedSample(std::move(top), std::move(rest), tail_);
}

}  // namespace drank
