#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "certismooth/schedule.hpp"

using namespace certismooth;
using schedule::ScheduleKind;

TEST_CASE("cosine schedule endpoints and monotonicity") {
    auto sched = schedule::build_schedule(ScheduleKind::Cosine, 1000);
    CHECK(sched.alpha_bar.size() == 1001);
    CHECK(sched.alpha_bar[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sched.alpha_bar[1000] > 0.0);
    // exhaustive strict-decrease scan
    for (int t = 1; t <= 1000; ++t) {
        CHECK(sched.alpha_bar[t] < sched.alpha_bar[t - 1]);
    }
}

TEST_CASE("linear schedule first step") {
    auto sched = schedule::build_schedule(ScheduleKind::Linear, 1000);
    CHECK(sched.alpha_bar[0] == 1.0);
    CHECK(sched.alpha_bar[1] == doctest::Approx(1.0 - 1e-4).epsilon(1e-12));
    for (int t = 1; t <= 1000; ++t) {
        CHECK(sched.alpha_bar[t] < sched.alpha_bar[t - 1]);
        CHECK(sched.alpha_bar[t] > 0.0);
    }
}

TEST_CASE("build_schedule rejects tiny T") {
    CHECK_THROWS_AS(schedule::build_schedule(ScheduleKind::Cosine, 1), std::domain_error);
}

TEST_CASE("sigma_to_alpha closed form") {
    CHECK(schedule::sigma_to_alpha(0.0) == 1.0);
    CHECK(schedule::sigma_to_alpha(1.0) == doctest::Approx(0.5));
    CHECK(schedule::sigma_to_alpha(0.5) == doctest::Approx(0.8));
    CHECK_THROWS_AS(schedule::sigma_to_alpha(-0.1), std::domain_error);
    // inversion recovers sigma
    for (double sigma : {0.01, 0.25, 0.5, 1.0, 2.0, 7.5}) {
        double abar = schedule::sigma_to_alpha(sigma);
        CHECK(std::fabs(std::sqrt((1.0 - abar) / abar) - sigma) < 1e-12);
    }
}

TEST_CASE("sigma_to_timestep exact matches on a handmade schedule") {
    schedule::NoiseSchedule sched;
    sched.T = 2;
    sched.alpha_bar = {1.0, 0.8, 0.5};
    auto m1 = schedule::sigma_to_timestep(sched, 1.0);
    CHECK(m1.t_hat == 2);
    CHECK(m1.residual == doctest::Approx(0.0));
    auto m2 = schedule::sigma_to_timestep(sched, 0.5);
    CHECK(m2.t_hat == 1);
    CHECK(m2.residual == doctest::Approx(0.0));
    CHECK_THROWS_AS(schedule::sigma_to_timestep(sched, 0.0), std::domain_error);
}

TEST_CASE("sigma_to_timestep equals brute force and is locally optimal") {
    auto sched = schedule::build_schedule(ScheduleKind::Cosine, 1000);
    for (double sigma : {0.1, 0.5, 1.0, 2.0}) {
        auto match = schedule::sigma_to_timestep(sched, sigma);
        // brute-force oracle over all entries
        double target = sigma * sigma;
        int best_t = 0;
        double best_res = 1e300;
        for (int t = 0; t <= sched.T; ++t) {
            double abar = sched.alpha_bar[t];
            double res = std::fabs((1.0 - abar) / abar - target);
            if (res < best_res) {
                best_res = res;
                best_t = t;
            }
        }
        CHECK(match.t_hat == best_t);
        // local optimality at the neighbours
        auto res_at = [&](int t) {
            double abar = sched.alpha_bar[t];
            return std::fabs((1.0 - abar) / abar - target);
        };
        if (match.t_hat > 0) CHECK(match.residual <= res_at(match.t_hat - 1));
        if (match.t_hat < sched.T) CHECK(match.residual <= res_at(match.t_hat + 1));
    }
}

TEST_CASE("corrected_timestep rounding, clamping, monotonicity") {
    CHECK(schedule::corrected_timestep(100, {1.8}, 1000) == 180);
    CHECK(schedule::corrected_timestep(100, {1.0}, 1000) == 100);
    CHECK(schedule::corrected_timestep(900, {1.8}, 1000) == 1000);
    CHECK(schedule::corrected_timestep(0, {1.8}, 1000) == 0);
    int prev = 0;
    for (double k = 0.1; k < 3.0; k += 0.1) {
        int t = schedule::corrected_timestep(333, {k}, 1000);
        CHECK(t >= prev);
        prev = t;
    }
    CHECK_THROWS_AS(schedule::corrected_timestep(-1, {1.8}, 1000), std::domain_error);
}

TEST_CASE("effective sigma doubles the unit-space level") {
    CHECK(schedule::effective_sigma(0.25) == doctest::Approx(0.5));
    CHECK(schedule::effective_sigma(0.0) == 0.0);
    CHECK(schedule::effective_sigma(0.5) == doctest::Approx(1.0));
    CHECK_THROWS_AS(schedule::effective_sigma(-1.0), std::domain_error);
}
