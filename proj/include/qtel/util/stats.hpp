#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace qtel::util {

double mean(std::span<const double> xs);

/// Unbiased sample variance (n-1 denominator), two-pass.
double variance(std::span<const double> xs);

/// Linear-interpolation percentile, p in [0,100]. Sorts a copy.
double percentile(std::span<const double> xs, double p);

/// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
double gamma_q(double a, double x);

/// Survival function of the chi-square distribution with k dof.
double chi2_sf(double x, double k);

} // namespace qtel::util
