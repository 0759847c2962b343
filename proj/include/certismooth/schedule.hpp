#pragma once

#include <string>

#include "certismooth/types.hpp"

namespace certismooth::schedule {

enum class ScheduleKind { Cosine, Linear };

ScheduleKind schedule_kind_from_string(const std::string& s);
std::string to_string(ScheduleKind kind);

// Discrete diffusion schedule: alpha_bar[t] for t in [0, T], alpha_bar[0] = 1,
// strictly decreasing, alpha_bar[T] > 0.
struct NoiseSchedule {
    ScheduleKind kind = ScheduleKind::Cosine;
    int T = 0;
    Vec alpha_bar;  // size T + 1
};

struct TimestepMatch {
    int t_hat = 0;
    double alpha_bar_t = 1.0;
    double residual = 0.0;  // |(1 - abar)/abar - sigma^2| at t_hat
};

struct CorrectionFactor {
    double k = 1.8;
};

// Cosine: abar_t = cos^2(((t/T + s)/(1+s)) * pi/2) / cos^2((s/(1+s)) * pi/2),
// s = 0.008, with per-step beta clipped at 0.999 so abar stays positive at
// the tail. Linear: beta_t linearly spaced in [1e-4, 0.02].
NoiseSchedule build_schedule(ScheduleKind kind, int T);

// Eq-6 algebra: sigma^2 = (1 - abar)/abar  <=>  abar = 1/(1 + sigma^2).
double sigma_to_alpha(double sigma);

// Discrete search: argmin_t |(1 - abar_t)/abar_t - sigma^2|, linear scan,
// ties toward smaller t.
TimestepMatch sigma_to_timestep(const NoiseSchedule& schedule, double sigma);

// t' = clamp(round(k * t_hat), 0, T).
int corrected_timestep(int t_hat, const CorrectionFactor& k, int T);

// [0,1] inputs are rescaled to [-1,1] before denoising, which doubles the
// noise the denoiser sees.
double effective_sigma(double sigma_unit);

}  // namespace certismooth::schedule
