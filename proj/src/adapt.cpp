#include "certismooth/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "certismooth/rng.hpp"

namespace certismooth::adapt {

namespace {

const denoiser::Conditioning kAdaptToken = denoiser::Conditioning::adapt();

struct BatchItem {
    const data::Sample* sample;
    int t;
    Vec noise;
};

std::vector<BatchItem> draw_batch(const ReferenceSet& refset, int batch, int T,
                                  std::uint64_t seed, std::uint64_t stage, int step) {
    std::vector<BatchItem> items;
    items.reserve(static_cast<std::size_t>(batch));
    const int n = static_cast<int>(refset.items.size());
    const std::size_t d = refset.items.front().x.size();
    for (int b = 0; b < batch; ++b) {
        rng::Stream rs = rng::substream(
            seed, {stage, static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(b)});
        BatchItem item;
        item.sample = &refset.items[static_cast<std::size_t>(rs.next_int(0, n - 1))];
        // t = 0 is excluded: sigma_t = 0 leaves the noise target unidentified
        item.t = rs.next_int(1, T);
        item.noise = rs.gaussian_vec(d);
        items.push_back(std::move(item));
    }
    return items;
}

void check_finite(double loss, const char* what, int step) {
    if (!std::isfinite(loss)) {
        throw TrainingError(std::string(what) + ": non-finite loss at step " +
                            std::to_string(step));
    }
}

}  // namespace

AdaptMode adapt_mode_from_string(const std::string& s) {
    if (s == "staged") return AdaptMode::Staged;
    if (s == "joint") return AdaptMode::Joint;
    throw ConfigError("unknown adapt mode: " + s);
}

void AdaptConfig::validate() const {
    if (lambda < 0.0) throw ConfigError("adapt: lambda must be >= 0");
    if (steps < 0) throw ConfigError("adapt: steps must be >= 0");
    if (batch < 1) throw ConfigError("adapt: batch must be >= 1");
    if (!(lr_denoiser > 0.0) || !(lr_classifier > 0.0)) {
        throw ConfigError("adapt: learning rates must be > 0");
    }
}

void write_training_curve(const TrainLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("write_training_curve: cannot open " + path);
    out << "step,L_diff,L_clf,total\n";
    out.precision(17);
    for (const TrainLogRow& row : log) {
        out << row.step << "," << row.l_diff << "," << row.l_clf << "," << row.total << "\n";
    }
}

ReferenceSet synthesize_reference_set(const data::GmmWorld& generator, int shots,
                                      std::uint64_t seed) {
    if (shots < 1) throw std::domain_error("synthesize_reference_set: shots must be >= 1");
    ReferenceSet out;
    out.shots_per_class = shots;
    for (int c = 0; c < generator.K; ++c) {
        for (int s = 0; s < shots; ++s) {
            rng::Stream rs = rng::substream(
                seed, {0x726566ULL, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(s)});
            data::Sample item;
            item.label = c;
            Vec x(static_cast<std::size_t>(generator.d));
            for (int j = 0; j < generator.d; ++j) {
                double v =
                    generator.means[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)] +
                    generator.gamma * rs.next_gaussian();
                x[static_cast<std::size_t>(j)] = std::clamp(v, 0.0, 1.0);
            }
            item.x = data::normalize(x);
            out.items.push_back(std::move(item));
        }
    }
    return out;
}

double loss_diff(const denoiser::NeuralDenoiser& den, const Vec& x_g, int t,
                 const Vec& noise, const schedule::CorrectionFactor& k,
                 const schedule::NoiseSchedule& sched,
                 denoiser::NeuralDenoiserGrads* grads) {
    if (t < 1 || t > sched.T) throw std::domain_error("loss_diff: t outside [1, T]");
    Vec x_t = denoiser::forward_diffuse(x_g, t, noise, sched);
    int t_prime = schedule::corrected_timestep(t, k, sched.T);
    Vec eps_hat = den.eps(x_t, t, kAdaptToken, x_t, t_prime, 0.0);
    double loss = 0.0;
    Vec upstream(eps_hat.size());
    for (std::size_t i = 0; i < eps_hat.size(); ++i) {
        double diff = eps_hat[i] - noise[i];
        loss += diff * diff;
        upstream[i] = 2.0 * diff;
    }
    if (grads) *grads = den.backward(x_t, t, kAdaptToken, x_t, t_prime, upstream);
    return loss;
}

double loss_clf(const denoiser::NeuralDenoiser& den, const classifier::Classifier& clf,
                const Vec& x_g, int label, int t, const Vec& noise,
                const schedule::CorrectionFactor& k, const schedule::NoiseSchedule& sched,
                denoiser::NeuralDenoiserGrads* den_grads, nn::MlpGrads* clf_grads) {
    if (t < 1 || t > sched.T) throw std::domain_error("loss_clf: t outside [1, T]");
    Vec x_t = denoiser::forward_diffuse(x_g, t, noise, sched);
    int t_prime = schedule::corrected_timestep(t, k, sched.T);
    Vec eps_hat = den.eps(x_t, t, kAdaptToken, x_t, t_prime, 0.0);

    const double abar = sched.alpha_bar[static_cast<std::size_t>(t)];
    const double inv_sa = 1.0 / std::sqrt(abar);
    const double sigma_t = std::sqrt((1.0 - abar) / abar);
    Vec x_tilde(x_t.size());
    for (std::size_t i = 0; i < x_t.size(); ++i) {
        x_tilde[i] = inv_sa * x_t[i] - sigma_t * eps_hat[i];
    }
    Vec clf_in = data::denormalize(x_tilde);
    Vec clamped = clf_in;
    data::clamp01(clamped);

    auto [loss, dlogits] = nn::cross_entropy(clf.logits(clamped), label);
    (void)dlogits;
    if (den_grads || clf_grads) {
        Vec g_in = clf.input_gradient(clamped, label);
        if (clf_grads) {
            const auto* neural = dynamic_cast<const classifier::NeuralClassifier*>(&clf);
            if (neural == nullptr) {
                throw std::invalid_argument("loss_clf: classifier gradients need a neural "
                                            "classifier");
            }
            *clf_grads = neural->param_gradient(clamped, label).second;
        }
        if (den_grads) {
            Vec upstream(eps_hat.size());
            for (std::size_t i = 0; i < eps_hat.size(); ++i) {
                double g = (clf_in[i] < 0.0 || clf_in[i] > 1.0) ? 0.0 : g_in[i];
                upstream[i] = -sigma_t * 0.5 * g;  // through denormalize and x_tilde
            }
            *den_grads = den.backward(x_t, t, kAdaptToken, x_t, t_prime, upstream);
        }
    }
    return loss;
}

void personalize(denoiser::NeuralDenoiser& den, const classifier::Classifier& frozen_clf,
                 const ReferenceSet& refset, const AdaptConfig& cfg,
                 const schedule::NoiseSchedule& sched, TrainLog* log) {
    cfg.validate();
    if (refset.items.empty()) throw std::invalid_argument("personalize: empty reference set");
    denoiser::NeuralSgdState state;
    for (int step = 0; step < cfg.steps; ++step) {
        auto batch = draw_batch(refset, cfg.batch, sched.T, cfg.seed, 0x706572ULL, step);
        nn::MlpGrads mlp_acc = nn::zero_grads(den.mlp());
        Vec token_acc(denoiser::NeuralDenoiser::kCondDim, 0.0);
        double sum_diff = 0.0;
        double sum_clf = 0.0;
        const double inv_b = 1.0 / cfg.batch;
        for (const BatchItem& item : batch) {
            denoiser::NeuralDenoiserGrads g_diff;
            sum_diff += loss_diff(den, item.sample->x, item.t, item.noise, cfg.k, sched,
                                  &g_diff);
            nn::accumulate(mlp_acc, g_diff.mlp, inv_b);
            for (std::size_t j = 0; j < token_acc.size(); ++j) {
                token_acc[j] += inv_b * g_diff.token_grad[j];
            }
            if (cfg.lambda > 0.0) {
                denoiser::NeuralDenoiserGrads g_clf;
                sum_clf += loss_clf(den, frozen_clf, item.sample->x, item.sample->label,
                                    item.t, item.noise, cfg.k, sched, &g_clf, nullptr);
                nn::accumulate(mlp_acc, g_clf.mlp, cfg.lambda * inv_b);
                for (std::size_t j = 0; j < token_acc.size(); ++j) {
                    token_acc[j] += cfg.lambda * inv_b * g_clf.token_grad[j];
                }
            }
        }
        double total = (sum_diff + cfg.lambda * sum_clf) * inv_b;
        check_finite(total, "personalize", step);
        if (log) log->push_back({step, sum_diff * inv_b, sum_clf * inv_b, total});
        denoiser::NeuralDenoiserGrads packed;
        packed.mlp = std::move(mlp_acc);
        packed.token_grad = std::move(token_acc);
        den.apply_sgd(packed, kAdaptToken, cfg.lr_denoiser, cfg.momentum, state);
    }
}

void finetune_classifier(const denoiser::NeuralDenoiser& frozen_den,
                         classifier::NeuralClassifier& clf, const ReferenceSet& refset,
                         const AdaptConfig& cfg, const schedule::NoiseSchedule& sched,
                         TrainLog* log) {
    cfg.validate();
    if (refset.items.empty()) {
        throw std::invalid_argument("finetune_classifier: empty reference set");
    }
    nn::SgdState state;
    for (int step = 0; step < cfg.steps; ++step) {
        auto batch = draw_batch(refset, cfg.batch, sched.T, cfg.seed, 0x66696eULL, step);
        nn::MlpGrads acc = nn::zero_grads(clf.params());
        double sum_clf = 0.0;
        const double inv_b = 1.0 / cfg.batch;
        for (const BatchItem& item : batch) {
            nn::MlpGrads g;
            sum_clf += loss_clf(frozen_den, clf, item.sample->x, item.sample->label, item.t,
                                item.noise, cfg.k, sched, nullptr, &g);
            nn::accumulate(acc, g, inv_b);
        }
        check_finite(sum_clf * inv_b, "finetune_classifier", step);
        if (log) log->push_back({step, 0.0, sum_clf * inv_b, sum_clf * inv_b});
        nn::sgd_step(clf.params(), acc, cfg.lr_classifier, cfg.momentum, state);
    }
}

void run_adaptation(denoiser::NeuralDenoiser& den, classifier::NeuralClassifier& clf,
                    const ReferenceSet& refset, const AdaptConfig& cfg,
                    const schedule::NoiseSchedule& sched, TrainLog* log_denoiser,
                    TrainLog* log_classifier) {
    cfg.validate();
    if (cfg.mode == AdaptMode::Staged) {
        personalize(den, clf, refset, cfg, sched, log_denoiser);
        finetune_classifier(den, clf, refset, cfg, sched, log_classifier);
        return;
    }
    // Joint: both updates in the same loop from the same forward passes.
    if (refset.items.empty()) throw std::invalid_argument("run_adaptation: empty reference set");
    denoiser::NeuralSgdState den_state;
    nn::SgdState clf_state;
    for (int step = 0; step < cfg.steps; ++step) {
        auto batch = draw_batch(refset, cfg.batch, sched.T, cfg.seed, 0x6a6e74ULL, step);
        nn::MlpGrads den_acc = nn::zero_grads(den.mlp());
        Vec token_acc(denoiser::NeuralDenoiser::kCondDim, 0.0);
        nn::MlpGrads clf_acc = nn::zero_grads(clf.params());
        double sum_diff = 0.0;
        double sum_clf = 0.0;
        const double inv_b = 1.0 / cfg.batch;
        for (const BatchItem& item : batch) {
            denoiser::NeuralDenoiserGrads g_diff;
            sum_diff += loss_diff(den, item.sample->x, item.t, item.noise, cfg.k, sched,
                                  &g_diff);
            nn::accumulate(den_acc, g_diff.mlp, inv_b);
            for (std::size_t j = 0; j < token_acc.size(); ++j) {
                token_acc[j] += inv_b * g_diff.token_grad[j];
            }
            denoiser::NeuralDenoiserGrads g_clf_den;
            nn::MlpGrads g_clf;
            sum_clf += loss_clf(den, clf, item.sample->x, item.sample->label, item.t,
                                item.noise, cfg.k, sched,
                                cfg.lambda > 0.0 ? &g_clf_den : nullptr, &g_clf);
            if (cfg.lambda > 0.0) {
                nn::accumulate(den_acc, g_clf_den.mlp, cfg.lambda * inv_b);
                for (std::size_t j = 0; j < token_acc.size(); ++j) {
                    token_acc[j] += cfg.lambda * inv_b * g_clf_den.token_grad[j];
                }
            }
            nn::accumulate(clf_acc, g_clf, inv_b);
        }
        double total = (sum_diff + cfg.lambda * sum_clf) * inv_b;
        check_finite(total, "run_adaptation(joint)", step);
        if (log_denoiser) log_denoiser->push_back({step, sum_diff * inv_b, sum_clf * inv_b, total});
        denoiser::NeuralDenoiserGrads packed;
        packed.mlp = std::move(den_acc);
        packed.token_grad = std::move(token_acc);
        den.apply_sgd(packed, kAdaptToken, cfg.lr_denoiser, cfg.momentum, den_state);
        nn::sgd_step(clf.params(), clf_acc, cfg.lr_classifier, cfg.momentum, clf_state);
    }
    if (log_classifier && log_denoiser) *log_classifier = *log_denoiser;
}

}  // namespace certismooth::adapt
