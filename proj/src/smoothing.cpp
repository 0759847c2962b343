#include "certismooth/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include "certismooth/parallel.hpp"
#include "certismooth/rng.hpp"
#include "certismooth/stats.hpp"

namespace certismooth::smoothing {

void SmoothingConfig::validate() const {
    if (!(sigma > 0.0)) throw ConfigError("smoothing: sigma must be > 0");
    if (n0 < 1 || n < n0) throw ConfigError("smoothing: need n0 >= 1 and n >= n0");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("smoothing: alpha must be in (0,1)");
    if (batch < 1) throw ConfigError("smoothing: batch must be >= 1");
}

Vec Pipeline::denoised_input(const Vec& x_noisy) const {
    Vec xm = data::normalize(x_noisy);
    double sigma_eff = schedule::effective_sigma(sigma);
    Vec recon = denoiser::denoise_one_step(*den, xm, sigma_eff, *sched, k, cond);
    Vec out = data::denormalize(recon);
    data::clamp01(out);
    return out;
}

int Pipeline::classify(const Vec& x_noisy) const {
    return classifier::argmax_class(clf->logits(denoised_input(x_noisy)));
}

BaseFn Pipeline::base_fn() const {
    return [this](const Vec& x_noisy) { return classify(x_noisy); };
}

int base_classify(const Pipeline& pipe, const Vec& x_noisy) {
    return pipe.classify(x_noisy);
}

std::map<int, long> sample_under_noise(const BaseFn& base_fn, const Vec& x, long m,
                                       double sigma, const NoiseStreams& streams,
                                       int workers) {
    if (m < 1) throw std::domain_error("sample_under_noise: m must be >= 1");
    const int nw = std::max(1, workers);
    std::vector<std::map<int, long>> partial(static_cast<std::size_t>(nw));
    const long chunk = (m + nw - 1) / nw;
    parallel_for(static_cast<std::size_t>(nw), nw, [&](std::size_t w) {
        long lo = static_cast<long>(w) * chunk;
        long hi = std::min(m, lo + chunk);
        auto& counts = partial[w];
        Vec noisy(x.size());
        for (long i = lo; i < hi; ++i) {
            rng::Stream rs = rng::substream(
                streams.seed, {streams.example, streams.phase, static_cast<std::uint64_t>(i)});
            for (std::size_t j = 0; j < x.size(); ++j) {
                noisy[j] = x[j] + sigma * rs.next_gaussian();
            }
            counts[base_fn(noisy)] += 1;
        }
    });
    std::map<int, long> counts;
    for (const auto& p : partial) {
        for (const auto& [cls, cnt] : p) counts[cls] += cnt;
    }
    return counts;
}

namespace {

// top two (class, count) pairs; ties broken toward the lower class index,
// which map iteration order already guarantees.
std::pair<std::pair<int, long>, std::pair<int, long>> top_two(
    const std::map<int, long>& counts) {
    std::pair<int, long> first{-1, -1};
    std::pair<int, long> second{-1, -1};
    for (const auto& [cls, cnt] : counts) {
        if (cnt > first.second) {
            second = first;
            first = {cls, cnt};
        } else if (cnt > second.second) {
            second = {cls, cnt};
        }
    }
    if (second.first < 0) second = {-1, 0};
    return {first, second};
}

}  // namespace

PredictOutcome predict(const BaseFn& base_fn, const Vec& x, const SmoothingConfig& cfg,
                       std::uint64_t seed, std::uint64_t example, int workers) {
    cfg.validate();
    auto counts = sample_under_noise(base_fn, x, cfg.n0, cfg.sigma,
                                     {seed, example, /*phase=*/2}, workers);
    auto [first, second] = top_two(counts);
    PredictOutcome out;
    out.n_a = first.second;
    out.n_b = second.second;
    out.p_value = stats::binom_p_value_two_sided(out.n_a, out.n_b);
    if (out.p_value <= cfg.alpha) {
        out.abstained = false;
        out.klass = first.first;
    }
    return out;
}

Certificate certify(const BaseFn& base_fn, const Vec& x, const SmoothingConfig& cfg,
                    std::uint64_t seed, std::uint64_t example, int workers) {
    cfg.validate();
    Certificate cert;
    cert.counts_selection =
        sample_under_noise(base_fn, x, cfg.n0, cfg.sigma, {seed, example, /*phase=*/0}, workers);
    int c_a = top_two(cert.counts_selection).first.first;
    cert.counts_estimation =
        sample_under_noise(base_fn, x, cfg.n, cfg.sigma, {seed, example, /*phase=*/1}, workers);
    long n_a = 0;
    if (auto it = cert.counts_estimation.find(c_a); it != cert.counts_estimation.end()) {
        n_a = it->second;
    }
    cert.pa_lower = stats::clopper_pearson_lower(n_a, cfg.n, cfg.alpha);
    if (cert.pa_lower > 0.5) {
        cert.abstained = false;
        cert.klass = c_a;
        cert.radius = certified_radius(cfg.sigma, cert.pa_lower);
    }
    return cert;
}

double certified_radius(double sigma, double pa_lower) {
    if (!(sigma > 0.0)) throw std::domain_error("certified_radius: sigma must be > 0");
    if (!(pa_lower >= 0.0 && pa_lower <= 1.0)) {
        throw std::domain_error("certified_radius: p outside [0,1]");
    }
    if (pa_lower <= 0.5) return 0.0;
    return sigma * stats::normal_quantile(pa_lower);
}

double analytic_linear_pa(const Vec& w, double b, const Vec& x, double sigma) {
    if (!(sigma > 0.0)) throw std::domain_error("analytic_linear_pa: sigma must be > 0");
    double norm2 = 0.0;
    double margin = b;
    for (std::size_t i = 0; i < w.size(); ++i) {
        norm2 += w[i] * w[i];
        margin += w[i] * x[i];
    }
    if (!(norm2 > 0.0)) throw std::domain_error("analytic_linear_pa: zero weight vector");
    return stats::normal_cdf(margin / (sigma * std::sqrt(norm2)));
}

}  // namespace certismooth::smoothing
