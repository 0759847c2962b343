#pragma once

#include <cstdint>

#include "certismooth/smoothing.hpp"
#include "certismooth/types.hpp"

namespace certismooth::attack {

struct AttackConfig {
    double epsilon = 0.5;  // l2 budget
    int steps = 100;
    int m_test = 32;  // noise draws per SmoothAdv gradient
    std::uint64_t seed = 0;

    void validate() const;
};

// Paper step-size rule: (4/3) * epsilon / steps.
double pgd_step_size(double epsilon, int steps);

// x + (x_adv - x) * min(1, eps / ||x_adv - x||).
Vec project_l2(const Vec& x_adv, const Vec& x, double epsilon);

// CE loss of the full denoise-and-classify pipeline at a noisy input, and
// its exact gradient w.r.t. the [0,1]-space input (chain through normalize,
// Eq-9 denoising, denormalize, clamp, classifier).
double pipeline_ce_with_grad(const smoothing::Pipeline& pipe, const Vec& x_noisy, int label,
                             Vec* grad);

// SmoothAdv gradient: (1/m) sum_i grad_x CE(pipeline(x + delta_i), y),
// delta_i ~ N(0, sigma^2 I), substreams keyed by (seed, example, step, i).
Vec smoothadv_grad(const smoothing::Pipeline& pipe, const Vec& x, int label, double sigma,
                   int m, std::uint64_t seed, std::uint64_t example, std::uint64_t step);

// l2 PGD ascent on the SmoothAdv objective, projected to the epsilon-ball
// and clipped to [0,1] each step. Zero-gradient steps are skipped.
Vec pgd_l2(const smoothing::Pipeline& pipe, const Vec& x, int label,
           const AttackConfig& atk, std::uint64_t example);

struct EvalRecord {
    int index = 0;
    int label = 0;
    bool clean_predict_correct = false;
    bool clean_abstained = false;
    bool fallback_correct = false;  // base pipeline on the clean input
    bool clean_correct = false;     // Predict correct, or abstained-but-fallback-correct
    bool robust = false;            // Predict on x_adv returned the true label
    double adv_distance = 0.0;
    double certified_radius = 0.0;
    bool certified_correct = false;
};

struct EvalMetrics {
    double clean_accuracy = 0.0;
    double robust_accuracy = 0.0;
    double abstain_rate = 0.0;
    double certified_accuracy_at_eps = 0.0;
    double acr = 0.0;
};

// Appendix-A.3 protocol: clean accuracy counts Predict-correct plus
// abstained-but-base-correct; abstain on the adversarial input counts as
// attack success. Also certifies every point (same run seed, disjoint
// streams) so robust and certified accuracy are comparable on one set.
EvalMetrics empirical_eval(const smoothing::Pipeline& pipe,
                           const std::vector<Vec>& inputs, const std::vector<int>& labels,
                           const smoothing::SmoothingConfig& smooth_cfg,
                           const AttackConfig& atk, std::uint64_t seed,
                           std::vector<EvalRecord>* records, int workers = 1);

}  // namespace certismooth::attack
