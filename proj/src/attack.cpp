#include "certismooth/attack.hpp"

#include <algorithm>
#include <cmath>

#include "certismooth/parallel.hpp"
#include "certismooth/rng.hpp"

namespace certismooth::attack {

void AttackConfig::validate() const {
    if (!(epsilon > 0.0)) throw ConfigError("attack: epsilon must be > 0");
    if (steps < 1) throw ConfigError("attack: steps must be >= 1");
    if (m_test < 1) throw ConfigError("attack: m_test must be >= 1");
}

double pgd_step_size(double epsilon, int steps) {
    if (!(epsilon > 0.0) || steps < 1) {
        throw std::domain_error("pgd_step_size: need epsilon > 0, steps >= 1");
    }
    return (4.0 / 3.0) * epsilon / static_cast<double>(steps);
}

Vec project_l2(const Vec& x_adv, const Vec& x, double epsilon) {
    if (!(epsilon > 0.0)) throw std::domain_error("project_l2: epsilon must be > 0");
    double norm2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double diff = x_adv[i] - x[i];
        norm2 += diff * diff;
    }
    double norm = std::sqrt(norm2);
    if (norm <= epsilon) return x_adv;
    double scale = epsilon / norm;
    Vec out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + scale * (x_adv[i] - x[i]);
    return out;
}

double pipeline_ce_with_grad(const smoothing::Pipeline& pipe, const Vec& x_noisy, int label,
                             Vec* grad) {
    // forward: normalize -> denoise -> denormalize -> clamp -> CE(logits)
    Vec xm = data::normalize(x_noisy);
    const double sigma_eff = schedule::effective_sigma(pipe.sigma);
    Vec recon = denoiser::denoise_one_step(*pipe.den, xm, sigma_eff, *pipe.sched, pipe.k,
                                           pipe.cond);
    Vec clf_in = data::denormalize(recon);
    Vec clamped = clf_in;
    data::clamp01(clamped);
    auto [loss, dlogits] = nn::cross_entropy(pipe.clf->logits(clamped), label);
    if (grad) {
        Vec g = pipe.clf->input_gradient(clamped, label);
        // clamp subgradient: zero where the reconstruction left [0,1]
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (clf_in[i] < 0.0 || clf_in[i] > 1.0) g[i] = 0.0;
            g[i] *= 0.5;  // denormalize
        }
        Vec gm = denoiser::denoise_one_step_vjp(*pipe.den, xm, sigma_eff, *pipe.sched,
                                                pipe.k, pipe.cond, g);
        grad->assign(gm.size(), 0.0);
        for (std::size_t i = 0; i < gm.size(); ++i) (*grad)[i] = 2.0 * gm[i];  // normalize
    }
    (void)dlogits;
    return loss;
}

Vec smoothadv_grad(const smoothing::Pipeline& pipe, const Vec& x, int label, double sigma,
                   int m, std::uint64_t seed, std::uint64_t example, std::uint64_t step) {
    if (m < 1) throw std::domain_error("smoothadv_grad: m must be >= 1");
    Vec total(x.size(), 0.0);
    Vec noisy(x.size());
    Vec g;
    for (int i = 0; i < m; ++i) {
        rng::Stream rs =
            rng::substream(seed, {0x61747441ULL, example, step, static_cast<std::uint64_t>(i)});
        for (std::size_t j = 0; j < x.size(); ++j) noisy[j] = x[j] + sigma * rs.next_gaussian();
        pipeline_ce_with_grad(pipe, noisy, label, &g);
        for (std::size_t j = 0; j < x.size(); ++j) total[j] += g[j] / m;
    }
    return total;
}

Vec pgd_l2(const smoothing::Pipeline& pipe, const Vec& x, int label,
           const AttackConfig& atk, std::uint64_t example) {
    atk.validate();
    const double step = pgd_step_size(atk.epsilon, atk.steps);
    Vec cur = x;
    for (int it = 0; it < atk.steps; ++it) {
        Vec g = smoothadv_grad(pipe, cur, label, pipe.sigma, atk.m_test, atk.seed, example,
                               static_cast<std::uint64_t>(it));
        double norm2 = 0.0;
        for (double v : g) norm2 += v * v;
        double norm = std::sqrt(norm2);
        if (!(norm > 0.0)) continue;  // nothing to ascend
        for (std::size_t j = 0; j < cur.size(); ++j) cur[j] += step * g[j] / norm;
        cur = project_l2(cur, x, atk.epsilon);
        data::clamp01(cur);
    }
    return cur;
}

EvalMetrics empirical_eval(const smoothing::Pipeline& pipe,
                           const std::vector<Vec>& inputs, const std::vector<int>& labels,
                           const smoothing::SmoothingConfig& smooth_cfg,
                           const AttackConfig& atk, std::uint64_t seed,
                           std::vector<EvalRecord>* records, int workers) {
    smooth_cfg.validate();
    atk.validate();
    if (inputs.size() != labels.size()) {
        throw std::invalid_argument("empirical_eval: inputs/labels size mismatch");
    }
    const std::size_t n = inputs.size();
    std::vector<EvalRecord> recs(n);
    auto base = pipe.base_fn();

    parallel_for(n, workers, [&](std::size_t i) {
        EvalRecord& r = recs[i];
        r.index = static_cast<int>(i);
        r.label = labels[i];
        const Vec& x = inputs[i];

        auto clean = smoothing::predict(base, x, smooth_cfg, seed, i);
        r.clean_abstained = clean.abstained;
        r.clean_predict_correct = !clean.abstained && clean.klass == r.label;
        r.fallback_correct = base(x) == r.label;
        r.clean_correct =
            r.clean_predict_correct || (clean.abstained && r.fallback_correct);

        auto cert = smoothing::certify(base, x, smooth_cfg, seed, i);
        r.certified_radius = cert.radius;
        r.certified_correct = !cert.abstained && cert.klass == r.label;

        Vec x_adv = pgd_l2(pipe, x, r.label, atk, i);
        double dist2 = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            double diff = x_adv[j] - x[j];
            dist2 += diff * diff;
        }
        r.adv_distance = std::sqrt(dist2);
        // Predict on the adversarial point: abstain counts as attack success.
        auto adv = smoothing::predict(base, x_adv, smooth_cfg, seed, i + (1ULL << 32));
        r.robust = !adv.abstained && adv.klass == r.label;
    });

    EvalMetrics m;
    for (const EvalRecord& r : recs) {
        m.clean_accuracy += r.clean_correct ? 1.0 : 0.0;
        m.robust_accuracy += r.robust ? 1.0 : 0.0;
        m.abstain_rate += r.clean_abstained ? 1.0 : 0.0;
        m.acr += r.certified_correct ? r.certified_radius : 0.0;
        if (r.certified_correct && r.certified_radius > atk.epsilon) {
            m.certified_accuracy_at_eps += 1.0;
        }
    }
    const double dn = static_cast<double>(n);
    m.clean_accuracy /= dn;
    m.robust_accuracy /= dn;
    m.abstain_rate /= dn;
    m.acr /= dn;
    m.certified_accuracy_at_eps /= dn;
    if (records) *records = std::move(recs);
    return m;
}

}  // namespace certismooth::attack
