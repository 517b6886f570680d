#pragma once

namespace drank::normal {

double cdf(double x);
/// Upper tail 1 - cdf(x), accurate far into the tail.
double sf(double x);
double pdf(double x);
double quantile(double p);
/// quantile(1 - q) without forming 1 - q.
double quantile_upper(double q);

}  // namespace drank::normal
