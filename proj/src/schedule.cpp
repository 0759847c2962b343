#include "certismooth/schedule.hpp"

#include <algorithm>
#include <cmath>

namespace certismooth::schedule {

namespace {
constexpr double kPi = 3.1415926535897932384626433832795;

double cosine_profile(double t, double T) {
    const double s = 0.008;
    double u = (t / T + s) / (1.0 + s) * kPi / 2.0;
    double c = std::cos(u);
    return c * c;
}
}  // namespace

ScheduleKind schedule_kind_from_string(const std::string& s) {
    if (s == "cosine") return ScheduleKind::Cosine;
    if (s == "linear") return ScheduleKind::Linear;
    throw ConfigError("unknown schedule kind: " + s);
}

std::string to_string(ScheduleKind kind) {
    return kind == ScheduleKind::Cosine ? "cosine" : "linear";
}

NoiseSchedule build_schedule(ScheduleKind kind, int T) {
    if (T < 2) throw std::domain_error("build_schedule: T must be >= 2");
    NoiseSchedule out;
    out.kind = kind;
    out.T = T;
    out.alpha_bar.assign(static_cast<std::size_t>(T) + 1, 1.0);
    if (kind == ScheduleKind::Cosine) {
        const double f0 = cosine_profile(0.0, T);
        double prev_raw = 1.0;
        double abar = 1.0;
        for (int t = 1; t <= T; ++t) {
            double raw = cosine_profile(static_cast<double>(t), T) / f0;
            // beta clip keeps alpha_bar[T] strictly positive; the raw profile
            // reaches 0 at t = T.
            double beta = std::min(1.0 - raw / prev_raw, 0.999);
            abar *= 1.0 - beta;
            out.alpha_bar[static_cast<std::size_t>(t)] = abar;
            prev_raw = raw;
        }
    } else {
        const double beta_lo = 1e-4;
        const double beta_hi = 0.02;
        double abar = 1.0;
        for (int t = 1; t <= T; ++t) {
            double beta = beta_lo + (beta_hi - beta_lo) * static_cast<double>(t - 1) /
                                        static_cast<double>(T - 1);
            abar *= 1.0 - beta;
            out.alpha_bar[static_cast<std::size_t>(t)] = abar;
        }
    }
    return out;
}

double sigma_to_alpha(double sigma) {
    if (sigma < 0.0) throw std::domain_error("sigma_to_alpha: sigma must be >= 0");
    return 1.0 / (1.0 + sigma * sigma);
}

TimestepMatch sigma_to_timestep(const NoiseSchedule& schedule, double sigma) {
    if (!(sigma > 0.0)) throw std::domain_error("sigma_to_timestep: sigma must be > 0");
    const double target = sigma * sigma;
    TimestepMatch best;
    best.t_hat = 0;
    best.alpha_bar_t = schedule.alpha_bar[0];
    best.residual = std::fabs((1.0 - best.alpha_bar_t) / best.alpha_bar_t - target);
    for (int t = 1; t <= schedule.T; ++t) {
        double abar = schedule.alpha_bar[static_cast<std::size_t>(t)];
        double residual = std::fabs((1.0 - abar) / abar - target);
        if (residual < best.residual) {
            best.t_hat = t;
            best.alpha_bar_t = abar;
            best.residual = residual;
        }
    }
    return best;
}

int corrected_timestep(int t_hat, const CorrectionFactor& k, int T) {
    if (t_hat < 0 || t_hat > T) {
        throw std::domain_error("corrected_timestep: t_hat outside [0, T]");
    }
    if (!(k.k > 0.0)) throw std::domain_error("corrected_timestep: k must be > 0");
    long long scaled = std::llround(k.k * static_cast<double>(t_hat));
    return static_cast<int>(std::clamp<long long>(scaled, 0, T));
}

double effective_sigma(double sigma_unit) {
    if (sigma_unit < 0.0) throw std::domain_error("effective_sigma: sigma must be >= 0");
    return 2.0 * sigma_unit;
}

}  // namespace certismooth::schedule
