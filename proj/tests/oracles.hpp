#pragma once

// Test-only oracles, kept independent of the library implementations they
// check: quadrature instead of erfc, direct tail recurrences instead of
// log-space sums, a second MLP evaluator, and grid integration for the GMM
// posterior mean.

#include <cstdint>
#include <functional>

#include "certismooth/nn.hpp"
#include "certismooth/types.hpp"

namespace oracles {

using certismooth::Vec;

// Standard normal CDF by adaptive Simpson integration of the density.
double normal_cdf(double z);

// Inverse of the quadrature CDF by bisection.
double normal_quantile(double p);

// P[X <= m] for X ~ Binomial(n, 1/2), long-double multiplicative recurrence.
double binom_lower_tail_half(long n, long m);

// Beta(a, b) CDF by adaptive Simpson on the log density.
double beta_cdf(double x, double a, double b);

// alpha-quantile of Beta(nA, n-nA+1) via bisection on beta_cdf.
double clopper_pearson_lower(long n_a, long n, double alpha);

// Straightforward re-evaluation of an MLP, written against the same math but
// with its own traversal.
Vec mlp_eval(const certismooth::nn::Mlp& params, const Vec& input);

// E[x | x_hat] for a two-component isotropic GMM in d=2 observed through
// N(0, sigma^2 I) noise, by tensor-grid quadrature.
Vec gmm_posterior_mean_2d(const Vec& mu0, const Vec& mu1, double prior0, double gamma,
                          double sigma, const Vec& x_hat, int grid_points = 601);

// Central finite difference of a scalar function.
double central_diff(const std::function<double(double)>& f, double x0, double h);

// Worst relative error between analytic and central-difference gradients of
// f over the coordinates of x, denominator max(|a|, |b|, 1e-8).
double grad_fd_max_rel_error(const std::function<double(const Vec&)>& f, const Vec& x,
                             const Vec& analytic, double h);

}  // namespace oracles
