#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "drank/order_statistics.hpp"

namespace drank {

/// Responses of a sample of size n whose covariate ranks are observed only
/// for the first m ranks. y_top[r-1] is the response paired with rank r;
/// y_rest holds the remaining responses, whose ranks are censored.
class RankedSample {
 public:
  /// Throws InvalidArgument when y_top is empty, any value is not finite, or
  /// all n responses are equal.
  RankedSample(std::vector<double> y_top, std::vector<double> y_rest,
               Tail tail = Tail::lower);

  int n() const noexcept { return static_cast<int>(y_top_.size() + y_rest_.size()); }
  int m() const noexcept { return static_cast<int>(y_top_.size()); }
  Tail tail() const noexcept { return tail_; }
  std::span<const double> y_top() const noexcept { return y_top_; }
  std::span<const double> y_rest() const noexcept { return y_rest_; }

  /// Mean over all n responses.
  double mu_hat() const noexcept { return mu_; }
  /// Standard deviation over all n responses, divisor n.
  double sigma_hat() const noexcept { return sigma_; }

  /// The same responses with only the first k ranks kept (k <= m).
  RankedSample censored(int k) const;

  /// Hash of (tail, y_top, y_rest); ties estimates to their input.
  std::uint64_t fingerprint() const noexcept { return fingerprint_; }

 private:
  std::vector<double> y_top_;
  std::vector<double> y_rest_;
  Tail tail_;
  double mu_ = 0.0;
  double sigma_ = 0.0;
  std::uint64_t fingerprint_ = 0;
};

}  // namespace drank
