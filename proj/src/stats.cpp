#include "certismooth/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace certismooth::stats {

namespace {

constexpr double kSqrt2 = 1.4142135623730950488016887242097;
constexpr double kSqrt2Pi = 2.5066282746310005024157652848110;

// Acklam's rational approximation for the normal quantile; relative error
// ~1.15e-9, then polished by Newton below.
double acklam_quantile(double p) {
    static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                -2.759285104469687e+02, 1.383577518672690e+02,
                                -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                -1.556989798598866e+02, 6.680131188771972e+01,
                                -1.328068155288572e+01};
    static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                -2.400758277161838e+00, -2.549732539343734e+00,
                                4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;
    if (p < p_low) {
        double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - p_low) {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    double q = p - 0.5;
    double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

double log_choose(std::int64_t n, std::int64_t k) {
    return std::lgamma(static_cast<double>(n) + 1.0) -
           std::lgamma(static_cast<double>(k) + 1.0) -
           std::lgamma(static_cast<double>(n - k) + 1.0);
}

// Continued fraction for I_x(a,b), modified Lentz.
double ibeta_continued_fraction(double x, double a, double b) {
    const double tiny = 1e-300;
    const double eps = 1e-16;
    double c = 1.0;
    double d = 1.0 - (a + b) * x / (a + 1.0);
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; ++m) {
        double dm = static_cast<double>(m);
        // even step
        double num = dm * (b - dm) * x / ((a + 2.0 * dm - 1.0) * (a + 2.0 * dm));
        d = 1.0 + num * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + num / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        // odd step
        num = -(a + dm) * (a + b + dm) * x / ((a + 2.0 * dm) * (a + 2.0 * dm + 1.0));
        d = 1.0 + num * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + num / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < eps) break;
    }
    return h;
}

}  // namespace

double normal_cdf(double z) {
    if (!std::isfinite(z)) throw std::domain_error("normal_cdf: non-finite input");
    return 0.5 * std::erfc(-z / kSqrt2);
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw std::domain_error("normal_quantile: p must lie strictly in (0,1)");
    }
    double z = acklam_quantile(p);
    // Two Newton polishes against the erfc-backed CDF; pdf is exact.
    for (int i = 0; i < 2; ++i) {
        double err = normal_cdf(z) - p;
        double pdf = std::exp(-0.5 * z * z) / kSqrt2Pi;
        if (pdf <= 0.0) break;
        z -= err / pdf;
    }
    return z;
}

double binom_p_value_two_sided(std::int64_t n_a, std::int64_t n_b) {
    if (n_a < 0 || n_b < 0 || n_a + n_b < 1) {
        throw std::domain_error("binom_p_value_two_sided: need nA, nB >= 0 and nA + nB >= 1");
    }
    const std::int64_t n = n_a + n_b;
    const std::int64_t m = std::min(n_a, n_b);
    const double log_half_n = -static_cast<double>(n) * std::log(2.0);
    // log-sum-exp over the lower tail, accumulated against the running max.
    double log_tail = -std::numeric_limits<double>::infinity();
    for (std::int64_t i = 0; i <= m; ++i) {
        double term = log_choose(n, i) + log_half_n;
        if (term > log_tail) {
            log_tail = term + std::log1p(std::exp(log_tail - term));
        } else {
            log_tail += std::log1p(std::exp(term - log_tail));
        }
    }
    double p = 2.0 * std::exp(log_tail);
    return std::min(1.0, p);
}

double regularized_incomplete_beta(double x, double a, double b) {
    if (!(x >= 0.0 && x <= 1.0) || !(a > 0.0) || !(b > 0.0)) {
        throw std::domain_error("regularized_incomplete_beta: invalid arguments");
    }
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    double log_beta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    double front = std::exp(a * std::log(x) + b * std::log1p(-x) - log_beta);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * ibeta_continued_fraction(x, a, b) / a;
    }
    return 1.0 - std::exp(b * std::log1p(-x) + a * std::log(x) - log_beta) *
                     ibeta_continued_fraction(1.0 - x, b, a) / b;
}

double clopper_pearson_lower(std::int64_t n_a, std::int64_t n, double alpha) {
    if (n < 1 || n_a < 0 || n_a > n) {
        throw std::domain_error("clopper_pearson_lower: need 0 <= nA <= n, n >= 1");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::domain_error("clopper_pearson_lower: alpha must lie in (0,1)");
    }
    if (n_a == 0) return 0.0;
    const double a = static_cast<double>(n_a);
    const double b = static_cast<double>(n - n_a) + 1.0;
    // Beta(a,b) CDF is I_x(a,b), strictly increasing in x; bisect for the
    // alpha-quantile. 200-iteration cap; tolerance 1e-12 reached first.
    double lo = 0.0;
    double hi = 1.0;
    for (int iter = 0; iter < 200 && (hi - lo) > 1e-12; ++iter) {
        double mid = 0.5 * (lo + hi);
        if (regularized_incomplete_beta(mid, a, b) < alpha) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace certismooth::stats
