#pragma once

#include <cstdint>
#include <string>

#include "certismooth/classifier.hpp"
#include "certismooth/denoiser.hpp"
#include "certismooth/schedule.hpp"
#include "certismooth/types.hpp"

namespace certismooth::adapt {

// Synthetic reference items live in model space [-1,1]^d.
struct ReferenceSet {
    std::vector<data::Sample> items;
    int shots_per_class = 1;
};

enum class AdaptMode { Staged, Joint };

AdaptMode adapt_mode_from_string(const std::string& s);

struct AdaptConfig {
    double lambda = 0.01;
    int steps = 500;
    double lr_denoiser = 1e-2;
    double lr_classifier = 1e-3;
    double momentum = 0.9;
    int batch = 32;
    AdaptMode mode = AdaptMode::Staged;
    schedule::CorrectionFactor k{1.8};
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrainLogRow {
    int step = 0;
    double l_diff = 0.0;
    double l_clf = 0.0;
    double total = 0.0;
};

using TrainLog = std::vector<TrainLogRow>;

void write_training_curve(const TrainLog& log, const std::string& path);

// shots samples per class from the class-conditional generator, normalized
// to model space; deterministic under the seed.
ReferenceSet synthesize_reference_set(const data::GmmWorld& generator, int shots,
                                      std::uint64_t seed);

// DreamBooth-style diffusion loss at one reference item: forward-diffuse to
// t, self-conditioned prediction with the adaptation token at t' = round(k t),
// squared l2 error against the drawn noise. Parameter gradients optional.
double loss_diff(const denoiser::NeuralDenoiser& den, const Vec& x_g, int t,
                 const Vec& noise, const schedule::CorrectionFactor& k,
                 const schedule::NoiseSchedule& sched,
                 denoiser::NeuralDenoiserGrads* grads);

// Denoised classification loss: x_tilde = x_t / sqrt(abar_t) - sigma_t *
// eps_hat with sigma_t from the Eq-6 relation at the sampled t, then CE of
// the classifier on the clamped [0,1] reconstruction. Gradients w.r.t. the
// denoiser and/or classifier parameters on request.
double loss_clf(const denoiser::NeuralDenoiser& den, const classifier::Classifier& clf,
                const Vec& x_g, int label, int t, const Vec& noise,
                const schedule::CorrectionFactor& k, const schedule::NoiseSchedule& sched,
                denoiser::NeuralDenoiserGrads* den_grads, nn::MlpGrads* clf_grads);

// Classifier-guided personalization (denoiser side): cfg.steps minibatch
// steps on L_diff + lambda * L_clf; classifier stays untouched.
void personalize(denoiser::NeuralDenoiser& den, const classifier::Classifier& frozen_clf,
                 const ReferenceSet& refset, const AdaptConfig& cfg,
                 const schedule::NoiseSchedule& sched, TrainLog* log = nullptr);

// Classifier fine-tuning on denoised reconstructions, denoiser frozen.
void finetune_classifier(const denoiser::NeuralDenoiser& frozen_den,
                         classifier::NeuralClassifier& clf, const ReferenceSet& refset,
                         const AdaptConfig& cfg, const schedule::NoiseSchedule& sched,
                         TrainLog* log = nullptr);

// Staged: personalize then finetune (main-text ordering, the default).
// Joint: both parameter sets updated in the same loop, the denoiser on the
// combined objective and the classifier on L_clf alone.
void run_adaptation(denoiser::NeuralDenoiser& den, classifier::NeuralClassifier& clf,
                    const ReferenceSet& refset, const AdaptConfig& cfg,
                    const schedule::NoiseSchedule& sched, TrainLog* log_denoiser = nullptr,
                    TrainLog* log_classifier = nullptr);

}  // namespace certismooth::adapt
