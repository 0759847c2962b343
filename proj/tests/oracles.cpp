#include "oracles.hpp"

#include <cmath>
#include <stdexcept>

namespace oracles {

namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267793994605993438;

double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

// Composite Simpson on a fixed grid: deterministic cost, no tolerance games;
// panel counts are chosen so truncation error sits far below 1e-13.
double simpson_fixed(const std::function<double(double)>& f, double a, double b,
                     int panels) {
    if (b <= a) return 0.0;
    const double h = (b - a) / (2.0 * panels);
    double sum = f(a) + f(b);
    for (int i = 1; i < 2 * panels; ++i) {
        sum += f(a + h * i) * (i % 2 == 1 ? 4.0 : 2.0);
    }
    return sum * h / 3.0;
}

}  // namespace

double normal_cdf(double z) {
    if (z < 0.0) return 1.0 - normal_cdf(-z);
    if (z > 40.0) return 1.0;
    return 0.5 + simpson_fixed(normal_pdf, 0.0, z, 40000);
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("oracle quantile: p in (0,1)");
    double lo = -40.0;
    double hi = 40.0;
    for (int i = 0; i < 200 && (hi - lo) > 1e-14; ++i) {
        double mid = 0.5 * (lo + hi);
        if (normal_cdf(mid) < p) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

double binom_lower_tail_half(long n, long m) {
    // term_i = C(n, i) / 2^n, built by the ratio C(n,i+1)/C(n,i) = (n-i)/(i+1)
    long double term = std::exp(-static_cast<long double>(n) * std::log(2.0L));
    long double sum = term;  // i = 0
    for (long i = 0; i < m; ++i) {
        term *= static_cast<long double>(n - i) / static_cast<long double>(i + 1);
        sum += term;
    }
    return static_cast<double>(sum);
}

double beta_cdf(double x, double a, double b) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double log_beta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    auto density = [&](double t) -> double {
        if (t <= 0.0 || t >= 1.0) return 0.0;
        return std::exp((a - 1.0) * std::log(t) + (b - 1.0) * std::log1p(-t) - log_beta);
    };
    // clip the domain to where the density carries mass (20 sd around the
    // mean); everything left of it is below exp(-200)
    double mean = a / (a + b);
    double sd = std::sqrt(a * b / ((a + b) * (a + b) * (a + b + 1.0)));
    double lo = std::max(0.0, mean - 20.0 * sd);
    if (x <= lo) return 0.0;
    return simpson_fixed(density, lo, x, 200000);
}

double clopper_pearson_lower(long n_a, long n, double alpha) {
    if (n_a == 0) return 0.0;
    double a = static_cast<double>(n_a);
    double b = static_cast<double>(n - n_a) + 1.0;
    double lo = 0.0;
    double hi = 1.0;
    for (int i = 0; i < 200 && (hi - lo) > 1e-13; ++i) {
        double mid = 0.5 * (lo + hi);
        if (beta_cdf(mid, a, b) < alpha) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

Vec mlp_eval(const certismooth::nn::Mlp& params, const Vec& input) {
    Vec cur = input;
    for (const auto& layer : params.layers) {
        Vec next(layer.w.rows, 0.0);
        for (std::size_t c = 0; c < layer.w.cols; ++c) {
            for (std::size_t r = 0; r < layer.w.rows; ++r) {
                next[r] += layer.w.at(r, c) * cur[c];
            }
        }
        for (std::size_t r = 0; r < layer.w.rows; ++r) {
            next[r] += layer.b[r];
            if (layer.act == certismooth::nn::Activation::Tanh) next[r] = std::tanh(next[r]);
        }
        cur = std::move(next);
    }
    return cur;
}

Vec gmm_posterior_mean_2d(const Vec& mu0, const Vec& mu1, double prior0, double gamma,
                          double sigma, const Vec& x_hat, int grid_points) {
    // integrate x * p(x) * N(x_hat; x, sigma^2) over a box covering both
    // components; trapezoid weights on a tensor grid
    double lo0 = std::min(mu0[0], mu1[0]) - 8.0 * gamma;
    double hi0 = std::max(mu0[0], mu1[0]) + 8.0 * gamma;
    double lo1 = std::min(mu0[1], mu1[1]) - 8.0 * gamma;
    double hi1 = std::max(mu0[1], mu1[1]) + 8.0 * gamma;
    const double g2 = gamma * gamma;
    const double s2 = sigma * sigma;
    const int n = grid_points;
    double num0 = 0.0, num1 = 0.0, den = 0.0;
    for (int i = 0; i < n; ++i) {
        double x0 = lo0 + (hi0 - lo0) * i / (n - 1);
        double w0 = (i == 0 || i == n - 1) ? 0.5 : 1.0;
        for (int j = 0; j < n; ++j) {
            double x1 = lo1 + (hi1 - lo1) * j / (n - 1);
            double w1 = (j == 0 || j == n - 1) ? 0.5 : 1.0;
            double d0a = x0 - mu0[0], d1a = x1 - mu0[1];
            double d0b = x0 - mu1[0], d1b = x1 - mu1[1];
            double p_x = prior0 * std::exp(-0.5 * (d0a * d0a + d1a * d1a) / g2) +
                         (1.0 - prior0) * std::exp(-0.5 * (d0b * d0b + d1b * d1b) / g2);
            double e0 = x_hat[0] - x0, e1 = x_hat[1] - x1;
            double lik = std::exp(-0.5 * (e0 * e0 + e1 * e1) / s2);
            double w = w0 * w1 * p_x * lik;
            num0 += w * x0;
            num1 += w * x1;
            den += w;
        }
    }
    return {num0 / den, num1 / den};
}

double central_diff(const std::function<double(double)>& f, double x0, double h) {
    return (f(x0 + h) - f(x0 - h)) / (2.0 * h);
}

double grad_fd_max_rel_error(const std::function<double(const Vec&)>& f, const Vec& x,
                             const Vec& analytic, double h) {
    double worst = 0.0;
    Vec probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double saved = probe[i];
        probe[i] = saved + h;
        double up = f(probe);
        probe[i] = saved - h;
        double dn = f(probe);
        probe[i] = saved;
        double numeric = (up - dn) / (2.0 * h);
        double denom = std::max({std::fabs(numeric), std::fabs(analytic[i]), 1e-8});
        worst = std::max(worst, std::fabs(numeric - analytic[i]) / denom);
    }
    return worst;
}

}  // namespace oracles
