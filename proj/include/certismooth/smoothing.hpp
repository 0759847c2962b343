#pragma once

#include <cstdint>
#include <functional>
#include <map>

#include "certismooth/classifier.hpp"
#include "certismooth/denoiser.hpp"
#include "certismooth/schedule.hpp"
#include "certismooth/types.hpp"

namespace certismooth::smoothing {

struct SmoothingConfig {
    double sigma = 0.25;   // noise level in [0,1] input space
    int n0 = 100;          // selection draws (also Predict's sample count)
    long n = 10000;        // estimation draws
    double alpha = 0.001;  // significance level
    int batch = 1000;      // evaluation convenience only; must not affect results

    void validate() const;
};

struct PredictOutcome {
    bool abstained = true;
    int klass = -1;
    long n_a = 0;
    long n_b = 0;
    double p_value = 1.0;
};

struct Certificate {
    bool abstained = true;
    int klass = -1;
    double pa_lower = 0.0;
    double radius = 0.0;
    std::map<int, long> counts_selection;
    std::map<int, long> counts_estimation;
};

using BaseFn = std::function<int(const Vec&)>;

// Denoise-and-classify base function: normalize to [-1,1], single-step
// denoise at the doubled noise level, denormalize, clamp to [0,1], classify.
struct Pipeline {
    const denoiser::Denoiser* den = nullptr;
    const classifier::Classifier* clf = nullptr;
    const schedule::NoiseSchedule* sched = nullptr;
    schedule::CorrectionFactor k{1.8};
    double sigma = 0.25;  // input-space smoothing level
    denoiser::Conditioning cond = denoiser::Conditioning::empty();

    // The clamped classifier input for x_noisy (the denoised reconstruction).
    Vec denoised_input(const Vec& x_noisy) const;
    int classify(const Vec& x_noisy) const;
    BaseFn base_fn() const;
};

int base_classify(const Pipeline& pipe, const Vec& x_noisy);

// Identifies one example's draw streams inside a run. phase separates
// selection from estimation so the two never share noise.
struct NoiseStreams {
    std::uint64_t seed = 0;
    std::uint64_t example = 0;
    std::uint64_t phase = 0;
};

// counts[class] over m draws of base_fn(x + sigma * z). Each draw uses the
// substream (seed, example, phase, draw), so any partitioning across workers
// gives identical counts.
std::map<int, long> sample_under_noise(const BaseFn& base_fn, const Vec& x, long m,
                                       double sigma, const NoiseStreams& streams,
                                       int workers = 1);

// Algorithm-1 Predict with cfg.n0 draws: return the top class iff the
// two-sided binomial test against the runner-up rejects at cfg.alpha.
PredictOutcome predict(const BaseFn& base_fn, const Vec& x, const SmoothingConfig& cfg,
                       std::uint64_t seed, std::uint64_t example, int workers = 1);

// Algorithm-1 Certify: selection with n0 draws, estimation with n fresh
// draws, Clopper-Pearson lower bound, radius sigma * quantile(pa_lower).
Certificate certify(const BaseFn& base_fn, const Vec& x, const SmoothingConfig& cfg,
                    std::uint64_t seed, std::uint64_t example, int workers = 1);

// sigma * Phi^-1(p) for p > 1/2, else 0.
double certified_radius(double sigma, double pa_lower);

// Exact smoothed accuracy of a binary linear classifier for the positive
// class: Phi((w.x + b) / (sigma * ||w||)).
double analytic_linear_pa(const Vec& w, double b, const Vec& x, double sigma);

}  // namespace certismooth::smoothing
