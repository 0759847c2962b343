#pragma once

#include <cstdint>

#include "certismooth/types.hpp"

namespace certismooth::stats {

// Standard normal CDF. Backed by erfc; absolute error well below 1e-12.
double normal_cdf(double z);

// Inverse of normal_cdf on (0, 1). Acklam's rational initial guess refined
// by Newton steps against normal_cdf; |cdf(quantile(p)) - p| < 1e-10.
double normal_quantile(double p);

// Two-sided exact binomial test at p = 1/2: min(1, 2 * P[X <= min(nA, nB)])
// for X ~ Binomial(nA + nB, 1/2). Tail summed in log space so n = 10,000
// never underflows. Symmetric in (nA, nB).
double binom_p_value_two_sided(std::int64_t n_a, std::int64_t n_b);

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation
// (modified Lentz).
double regularized_incomplete_beta(double x, double a, double b);

// One-sided Clopper-Pearson lower confidence bound: the alpha-quantile of
// Beta(nA, n - nA + 1), found by bracketing bisection to 1e-12. Returns 0
// when nA = 0.
double clopper_pearson_lower(std::int64_t n_a, std::int64_t n, double alpha);

}  // namespace certismooth::stats
