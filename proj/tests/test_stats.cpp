#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "certismooth/rng.hpp"
#include "certismooth/stats.hpp"
#include "oracles.hpp"

using namespace certismooth;

TEST_CASE("normal_cdf matches quadrature oracle and frozen values") {
    CHECK(stats::normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
    // frozen from the quadrature oracle before build
    CHECK(std::fabs(stats::normal_cdf(2.0) - 0.9772498680518208) < 1e-12);
    CHECK(std::fabs(stats::normal_cdf(-2.0) - 0.0227501319481792) < 1e-12);
    for (double z = -6.0; z <= 6.0; z += 0.37) {
        CHECK(std::fabs(stats::normal_cdf(z) - oracles::normal_cdf(z)) < 1e-12);
    }
}

TEST_CASE("normal_cdf is monotone and rejects non-finite input") {
    double prev = -1.0;
    for (double z = -8.0; z <= 8.0; z += 0.05) {
        double p = stats::normal_cdf(z);
        CHECK(p >= prev);
        prev = p;
    }
    CHECK_THROWS_AS(stats::normal_cdf(std::nan("")), std::domain_error);
    CHECK_THROWS_AS(stats::normal_cdf(INFINITY), std::domain_error);
}

TEST_CASE("normal_quantile inverts the cdf") {
    CHECK(stats::normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(std::fabs(stats::normal_quantile(0.975) - 1.9599639845400542) < 1e-9);
    // the all-successes Clopper-Pearson probability at n=100
    CHECK(std::fabs(stats::normal_quantile(0.93325430079699104) - 1.5004750241206365) < 1e-9);

    // round trip on a grid spanning (1e-6, 1 - 1e-6)
    for (double p : {1e-6, 1e-4, 0.01, 0.2, 0.5, 0.77, 0.99, 1.0 - 1e-4, 1.0 - 1e-6}) {
        double z = stats::normal_quantile(p);
        CHECK(std::fabs(stats::normal_cdf(z) - p) < 1e-10);
    }
    // strictly increasing
    double prev = stats::normal_quantile(1e-6);
    for (double p = 1e-4; p < 1.0; p += 0.013) {
        double z = stats::normal_quantile(p);
        CHECK(z > prev);
        prev = z;
    }
}

TEST_CASE("normal_quantile rejects the boundary") {
    CHECK_THROWS_AS(stats::normal_quantile(0.0), std::domain_error);
    CHECK_THROWS_AS(stats::normal_quantile(1.0), std::domain_error);
    CHECK_THROWS_AS(stats::normal_quantile(-0.2), std::domain_error);
    CHECK_THROWS_AS(stats::normal_quantile(1.7), std::domain_error);
}

TEST_CASE("binomial two-sided p-value") {
    CHECK(stats::binom_p_value_two_sided(50, 50) == doctest::Approx(1.0));
    // closed form 2 * (1/2)^100, frozen
    CHECK(stats::binom_p_value_two_sided(100, 0) ==
          doctest::Approx(1.5777218104420236e-30).epsilon(1e-12));
    // exact tail-sum oracle, frozen
    CHECK(stats::binom_p_value_two_sided(60, 40) ==
          doctest::Approx(0.056887933640980792).epsilon(1e-12));
    CHECK(stats::binom_p_value_two_sided(60, 40) ==
          doctest::Approx(2.0 * oracles::binom_lower_tail_half(100, 40)).epsilon(1e-12));

    CHECK_THROWS_AS(stats::binom_p_value_two_sided(0, 0), std::domain_error);
    CHECK_THROWS_AS(stats::binom_p_value_two_sided(-1, 3), std::domain_error);
}

TEST_CASE("binomial p-value symmetry and large-n stability") {
    rng::Stream rs(123);
    for (int i = 0; i < 50; ++i) {
        long a = rs.next_int(0, 2000);
        long b = rs.next_int(0, 2000);
        if (a + b == 0) a = 1;
        CHECK(stats::binom_p_value_two_sided(a, b) == stats::binom_p_value_two_sided(b, a));
    }
    // log-space keeps mid-tail sums alive at n = 10,000 where naive
    // binomial coefficients overflow (C(10000, 4000) ~ 1e2900)
    double p = stats::binom_p_value_two_sided(6000, 4000);
    CHECK(p > 0.0);
    CHECK(std::isfinite(std::log(p)));
    CHECK(p == doctest::Approx(2.0 * oracles::binom_lower_tail_half(10000, 4000))
                   .epsilon(1e-9));
    // the fully one-sided split is genuinely below double range
    CHECK(stats::binom_p_value_two_sided(10000, 0) < 1e-300);
}

TEST_CASE("clopper_pearson_lower closed forms and oracle value") {
    CHECK(stats::clopper_pearson_lower(0, 100, 0.001) == 0.0);
    // all successes: alpha^(1/n), frozen
    CHECK(std::fabs(stats::clopper_pearson_lower(100, 100, 0.001) - 0.93325430079699104) <
          1e-9);
    CHECK(std::fabs(stats::clopper_pearson_lower(10000, 10000, 0.001) - 0.99930946300258992) <
          1e-9);
    // incomplete-beta-inverse oracle, frozen before build
    double v = stats::clopper_pearson_lower(9900, 10000, 0.001);
    CHECK(v > 0.985);
    CHECK(v < 0.990);
    CHECK(std::fabs(v - 0.98653115932380618) < 1e-9);
    CHECK(std::fabs(v - oracles::clopper_pearson_lower(9900, 10000, 0.001)) < 1e-9);

    CHECK_THROWS_AS(stats::clopper_pearson_lower(5, 4, 0.001), std::domain_error);
    CHECK_THROWS_AS(stats::clopper_pearson_lower(0, 0, 0.001), std::domain_error);
}

TEST_CASE("clopper_pearson_lower never exceeds the empirical mean and is monotone") {
    for (long n : {10L, 100L, 1000L}) {
        double prev = -1.0;
        for (long na = 0; na <= n; na += std::max(1L, n / 17)) {
            double lo = stats::clopper_pearson_lower(na, n, 0.001);
            CHECK(lo <= static_cast<double>(na) / static_cast<double>(n) + 1e-12);
            CHECK(lo >= prev - 1e-12);
            prev = lo;
        }
    }
}

TEST_CASE("clopper_pearson coverage simulation") {
    const double alpha = 0.001;
    const int n = 1000;
    const int runs = 10000;
    const double slack = alpha + 3.0 * std::sqrt(alpha * (1.0 - alpha) / runs);
    for (double p_star : {0.6, 0.8, 0.95}) {
        int violations = 0;
        for (int r = 0; r < runs; ++r) {
            rng::Stream rs = rng::substream(2024, {static_cast<std::uint64_t>(p_star * 100),
                                                   static_cast<std::uint64_t>(r)});
            long hits = 0;
            for (int i = 0; i < n; ++i) {
                if (rs.next_unit() <= p_star) ++hits;
            }
            if (stats::clopper_pearson_lower(hits, n, alpha) > p_star) ++violations;
        }
        CHECK(static_cast<double>(violations) / runs <= slack);
    }
}

TEST_CASE("regularized incomplete beta sanity") {
    CHECK(stats::regularized_incomplete_beta(0.0, 3.0, 4.0) == 0.0);
    CHECK(stats::regularized_incomplete_beta(1.0, 3.0, 4.0) == 1.0);
    // I_x(1,1) = x
    CHECK(stats::regularized_incomplete_beta(0.37, 1.0, 1.0) == doctest::Approx(0.37));
    // against the quadrature oracle
    for (double x : {0.1, 0.5, 0.9}) {
        CHECK(stats::regularized_incomplete_beta(x, 7.5, 2.25) ==
              doctest::Approx(oracles::beta_cdf(x, 7.5, 2.25)).epsilon(1e-10));
    }
    CHECK_THROWS_AS(stats::regularized_incomplete_beta(-0.1, 1.0, 1.0), std::domain_error);
}
